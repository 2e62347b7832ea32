#include "bicert/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace bicert {

namespace {

std::string fmt_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

std::ifstream open_for_read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path);
    return in;
}

std::ofstream open_for_write(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    return out;
}

nlohmann::json matrix_to_json(const DenseMatrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

DenseMatrix matrix_from_json(const nlohmann::json& j, int rows, int cols, const std::string& key,
                             const std::string& path) {
    if (!j.is_array() || static_cast<int>(j.size()) != rows)
        throw IoError("instance file " + path + ": field " + key + " must have " +
                      std::to_string(rows) + " rows");
    DenseMatrix m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        const nlohmann::json& row = j[i];
        if (!row.is_array() || static_cast<int>(row.size()) != cols)
            throw IoError("instance file " + path + ": field " + key + " row " + std::to_string(i) +
                          " must have " + std::to_string(cols) + " entries");
        for (int jj = 0; jj < cols; ++jj) {
            if (!row[jj].is_number())
                throw IoError("instance file " + path + ": field " + key + " has a non-numeric entry");
            m(i, jj) = row[jj].get<double>();
        }
    }
    return m;
}

} // namespace

nlohmann::json num_or_inf(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    return x;
}

void write_instance_json(const QuadraticInstance& inst, const std::string& path) {
    nlohmann::json j;
    j["m"] = inst.m;
    j["n"] = inst.n;
    j["A"] = matrix_to_json(inst.A);
    j["B"] = matrix_to_json(inst.B);
    j["C"] = matrix_to_json(inst.C);
    j["Q"] = matrix_to_json(inst.Q);
    j["d"] = inst.d;
    write_json_file(j, path);
}

QuadraticInstance read_instance_json(const std::string& path) {
    std::ifstream in = open_for_read(path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("instance file " + path + ": " + e.what());
    }
    for (const char* key : {"m", "n", "A", "B", "C", "Q", "d"})
        if (!j.contains(key)) throw IoError("instance file " + path + ": missing field " + key);
    if (!j["m"].is_number_integer() || !j["n"].is_number_integer())
        throw IoError("instance file " + path + ": m and n must be integers");
    QuadraticInstance inst;
    inst.m = j["m"].get<int>();
    inst.n = j["n"].get<int>();
    if (inst.m <= 0 || inst.n <= 0)
        throw IoError("instance file " + path + ": dimensions must be positive");
    inst.A = matrix_from_json(j["A"], inst.m, inst.m, "A", path);
    inst.B = matrix_from_json(j["B"], inst.n, inst.n, "B", path);
    inst.C = matrix_from_json(j["C"], inst.n, inst.m, "C", path);
    inst.Q = matrix_from_json(j["Q"], inst.n, inst.n, "Q", path);
    if (!j["d"].is_array() || static_cast<int>(j["d"].size()) != inst.n)
        throw IoError("instance file " + path + ": field d must have n entries");
    inst.d.resize(inst.n);
    for (int i = 0; i < inst.n; ++i) {
        if (!j["d"][i].is_number())
            throw IoError("instance file " + path + ": field d has a non-numeric entry");
        inst.d[i] = j["d"][i].get<double>();
    }
    return inst;
}

void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
    std::ofstream out = open_for_write(path);
    out << "k,omega_err,v_err,approx_grad_norm,lower_grad_norm,upper_evals,lower_evals\n";
    for (const TrajectoryPoint& p : traj.points) {
        out << p.k << ',' << fmt_double(p.omega_err) << ',' << fmt_double(p.v_err) << ','
            << fmt_double(p.approx_grad_norm) << ',' << fmt_double(p.lower_grad_norm) << ','
            << p.upper_evals << ',' << p.lower_evals << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

Trajectory read_trajectory_csv(const std::string& path) {
    std::ifstream in = open_for_read(path);
    std::string line;
    if (!std::getline(in, line)) throw IoError("trajectory file " + path + ": empty");
    if (line != "k,omega_err,v_err,approx_grad_norm,lower_grad_norm,upper_evals,lower_evals")
        throw IoError("trajectory file " + path + ": unexpected header");
    Trajectory traj;
    long lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::string field;
        std::istringstream row(line);
        while (std::getline(row, field, ',')) fields.push_back(field);
        if (fields.size() != 7)
            throw IoError("trajectory file " + path + ": malformed line " + std::to_string(lineno));
        // strtod handles the inf/nan tokens that %.17g emits for non-finite
        // values; istream extraction does not.
        auto as_double = [&](const std::string& s) {
            char* end = nullptr;
            double v = std::strtod(s.c_str(), &end);
            if (end != s.c_str() + s.size())
                throw IoError("trajectory file " + path + ": bad number on line " +
                              std::to_string(lineno));
            return v;
        };
        auto as_long = [&](const std::string& s) {
            char* end = nullptr;
            long v = std::strtol(s.c_str(), &end, 10);
            if (end != s.c_str() + s.size())
                throw IoError("trajectory file " + path + ": bad integer on line " +
                              std::to_string(lineno));
            return v;
        };
        TrajectoryPoint p;
        p.k = as_long(fields[0]);
        p.omega_err = as_double(fields[1]);
        p.v_err = as_double(fields[2]);
        p.approx_grad_norm = as_double(fields[3]);
        p.lower_grad_norm = as_double(fields[4]);
        p.upper_evals = as_long(fields[5]);
        p.lower_evals = as_long(fields[6]);
        traj.points.push_back(std::move(p));
    }
    if (!traj.points.empty()) {
        traj.last_k = traj.points.back().k;
        traj.counters.upper_grad = traj.points.back().upper_evals;
        traj.counters.lower_grad = traj.points.back().lower_evals;
    }
    return traj;
}

nlohmann::json certificate_to_json(const RateCertificate& cert) {
    nlohmann::json j;
    j["alpha"] = cert.alpha;
    j["beta"] = cert.beta;
    j["rho"] = cert.rho;
    j["feasible"] = cert.feasible;
    j["gain_plant"] = num_or_inf(cert.gain_plant);
    j["gain_map_bound"] = cert.gain_map_bound;
    j["violated_conditions"] = cert.violated_conditions;
    j["multipliers"] = {{"lambda1", cert.multipliers.lambda1}, {"lambda2", cert.multipliers.lambda2},
                        {"lambda3", cert.multipliers.lambda3}, {"lambda4", cert.multipliers.lambda4},
                        {"a", cert.multipliers.a},             {"b", cert.multipliers.b}};
    return j;
}

nlohmann::json audit_to_json(const AuditReport& report) {
    nlohmann::json checks = nlohmann::json::array();
    for (const CheckResult& c : report.checks)
        checks.push_back({{"name", c.name},
                          {"min_margin", num_or_inf(c.min_margin)},
                          {"argmin_step", c.argmin_step},
                          {"pass", c.pass}});
    nlohmann::json j;
    j["checks"] = std::move(checks);
    j["pass"] = report.pass;
    j["first_violation_step"] = report.first_violation_step;
    j["max_decomposition_error"] = num_or_inf(report.max_decomposition_error);
    j["max_implication_gap"] = num_or_inf(report.max_implication_gap);
    return j;
}

void write_json_file(const nlohmann::json& j, const std::string& path) {
    std::ofstream out = open_for_write(path);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

} // namespace bicert
