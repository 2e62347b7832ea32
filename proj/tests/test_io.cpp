#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>

#include "bicert/io.hpp"

using namespace bicert;
namespace fs = std::filesystem;

namespace {

std::string tmp_path(const std::string& name) {
    fs::create_directories("io_test_tmp");
    return (fs::path("io_test_tmp") / name).string();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return all;
}

void spit(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

bool matrices_equal(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j)
            if (a(i, j) != b(i, j)) return false;
    return true;
}

} // namespace

TEST_CASE("instance JSON round-trips bit for bit") {
    QuadraticInstance inst = make_instance(3, 2, 5, 4.0);
    std::string path = tmp_path("instance_roundtrip.json");
    write_instance_json(inst, path);
    QuadraticInstance back = read_instance_json(path);
    CHECK(back.m == 3);
    CHECK(back.n == 2);
    CHECK(matrices_equal(inst.A, back.A));
    CHECK(matrices_equal(inst.B, back.B));
    CHECK(matrices_equal(inst.C, back.C));
    CHECK(matrices_equal(inst.Q, back.Q));
    CHECK(inst.d == back.d);
}

TEST_CASE("instance JSON reader reports structural problems") {
    CHECK_THROWS_AS(read_instance_json(tmp_path("missing.json")), IoError);

    std::string garbled = tmp_path("garbled.json");
    spit(garbled, "this is not json");
    CHECK_THROWS_AS(read_instance_json(garbled), IoError);

    std::string partial = tmp_path("partial.json");
    spit(partial, "{\"m\": 1}");
    CHECK_THROWS_AS(read_instance_json(partial), IoError);

    std::string badshape = tmp_path("badshape.json");
    spit(badshape,
         "{\"m\": 2, \"n\": 1, \"A\": [[1.0]], \"B\": [[1.0]], \"C\": [[0.0, 0.0]],"
         " \"Q\": [[1.0]], \"d\": [0.0]}");
    CHECK_THROWS_AS(read_instance_json(badshape), IoError);
}

TEST_CASE("trajectory CSV round-trips the fitted rate") {
    BilevelOracle oracle = as_oracle(ref1());
    SolverConfig config{0.0007, 0.06, 3000, 0.0, 1};
    Trajectory traj = single_loop_run(oracle, config, {0.0}, {0.0});

    std::string path = tmp_path("trajectory.csv");
    write_trajectory_csv(traj, path);

    std::string contents = slurp(path);
    CHECK(contents.rfind("k,omega_err,v_err,approx_grad_norm,lower_grad_norm,upper_evals,lower_evals\n",
                         0) == 0);

    Trajectory back = read_trajectory_csv(path);
    REQUIRE(back.points.size() == traj.points.size());
    for (size_t i = 0; i < traj.points.size(); ++i) {
        CHECK(back.points[i].k == traj.points[i].k);
        CHECK(back.points[i].omega_err == traj.points[i].omega_err);
        CHECK(back.points[i].v_err == traj.points[i].v_err);
        CHECK(back.points[i].approx_grad_norm == traj.points[i].approx_grad_norm);
        CHECK(back.points[i].lower_grad_norm == traj.points[i].lower_grad_norm);
        CHECK(back.points[i].upper_evals == traj.points[i].upper_evals);
        CHECK(back.points[i].lower_evals == traj.points[i].lower_evals);
    }
    CHECK(back.last_k == traj.last_k);

    RateFit original = fit_rate(traj);
    RateFit refit = fit_rate(back);
    CHECK(std::abs(refit.rho_hat - original.rho_hat) <= 1e-12);
    CHECK(refit.k_start == original.k_start);
    CHECK(refit.points_used == original.points_used);
}

TEST_CASE("trajectory CSV survives non-finite error columns") {
    Trajectory traj;
    traj.points.resize(2);
    traj.points[0].k = 0;
    traj.points[0].omega_err = std::numeric_limits<double>::infinity();
    traj.points[0].v_err = -std::numeric_limits<double>::infinity();
    traj.points[1].k = 1;
    traj.points[1].omega_err = std::nan("");
    traj.points[1].v_err = 0.125;
    traj.last_k = 1;

    std::string path = tmp_path("nonfinite.csv");
    write_trajectory_csv(traj, path);
    Trajectory back = read_trajectory_csv(path);
    REQUIRE(back.points.size() == 2);
    CHECK(std::isinf(back.points[0].omega_err));
    CHECK(back.points[0].omega_err > 0.0);
    CHECK(std::isinf(back.points[0].v_err));
    CHECK(back.points[0].v_err < 0.0);
    CHECK(std::isnan(back.points[1].omega_err));
    CHECK(back.points[1].v_err == 0.125);
}

TEST_CASE("trajectory CSV reader rejects malformed files") {
    std::string wrong_header = tmp_path("wrongheader.csv");
    spit(wrong_header, "k,omega_err\n0,1.0\n");
    CHECK_THROWS_AS(read_trajectory_csv(wrong_header), IoError);

    std::string short_row = tmp_path("shortrow.csv");
    spit(short_row,
         "k,omega_err,v_err,approx_grad_norm,lower_grad_norm,upper_evals,lower_evals\n"
         "0,1.0,2.0\n");
    CHECK_THROWS_AS(read_trajectory_csv(short_row), IoError);

    std::string bad_number = tmp_path("badnumber.csv");
    spit(bad_number,
         "k,omega_err,v_err,approx_grad_norm,lower_grad_norm,upper_evals,lower_evals\n"
         "0,zero,0,0,0,0,0\n");
    CHECK_THROWS_AS(read_trajectory_csv(bad_number), IoError);
}

TEST_CASE("non-finite doubles serialize as tagged strings") {
    CHECK(num_or_inf(1.5) == nlohmann::json(1.5));
    CHECK(num_or_inf(std::numeric_limits<double>::infinity()) == nlohmann::json("inf"));
    CHECK(num_or_inf(-std::numeric_limits<double>::infinity()) == nlohmann::json("-inf"));
    CHECK(num_or_inf(std::nan("")) == nlohmann::json("nan"));
}

TEST_CASE("certificate JSON exposes the full verdict") {
    ProblemConstants c = derive_constants(ref1());
    RateCertificate cert = small_gain_verdict(c, 0.0007, 0.06, 0.99948);
    nlohmann::json j = certificate_to_json(cert);
    CHECK(j["alpha"] == 0.0007);
    CHECK(j["beta"] == 0.06);
    CHECK(j["feasible"] == true);
    CHECK(j["rho"] == 0.99948);
    CHECK(j["violated_conditions"].is_array());
    CHECK(j["violated_conditions"].empty());
    CHECK(j["multipliers"]["lambda2"] == 1.0);
    CHECK(j["multipliers"]["b"].get<double>() == doctest::Approx(0.26).epsilon(1e-9));
    CHECK(j["gain_plant"].is_number());

    RateCertificate bad = small_gain_verdict(c, 0.05, 0.06, 0.9);
    nlohmann::json jb = certificate_to_json(bad);
    CHECK(jb["feasible"] == false);
    CHECK(jb["gain_plant"] == "nan");
}

TEST_CASE("audit JSON carries every check") {
    AuditReport report;
    report.checks.push_back({"upper_gradient_alignment", -5.0e-12, 17, true});
    report.checks.push_back({"normalized_gain", 0.25, 0, true});
    report.pass = true;
    report.first_violation_step = -1;
    report.max_decomposition_error = 1e-13;
    report.max_implication_gap = 2e-13;

    nlohmann::json j = audit_to_json(report);
    CHECK(j["pass"] == true);
    CHECK(j["first_violation_step"] == -1);
    REQUIRE(j["checks"].size() == 2);
    CHECK(j["checks"][0]["name"] == "upper_gradient_alignment");
    CHECK(j["checks"][0]["min_margin"].get<double>() == -5.0e-12);
    CHECK(j["checks"][0]["argmin_step"] == 17);
    CHECK(j["checks"][0]["pass"] == true);
    CHECK(j["max_decomposition_error"].get<double>() == 1e-13);
}

TEST_CASE("JSON files end with a newline and parse back") {
    std::string path = tmp_path("note.json");
    write_json_file(nlohmann::json{{"x", 1}}, path);
    std::string contents = slurp(path);
    REQUIRE_FALSE(contents.empty());
    CHECK(contents.back() == '\n');
    nlohmann::json parsed = nlohmann::json::parse(contents);
    CHECK(parsed["x"] == 1);
}
