// Acceptance gate: one line per criterion, nonzero exit when any fails.
// Everything here drives the public library and CLI APIs end to end.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bicert/audit.hpp"
#include "bicert/certificate.hpp"
#include "bicert/cli.hpp"
#include "bicert/io.hpp"
#include "bicert/solver.hpp"
#include "bicert/testbed.hpp"

using namespace bicert;
namespace fs = std::filesystem;

namespace {

struct CriterionFailure : std::runtime_error {
    explicit CriterionFailure(const std::string& what) : std::runtime_error(what) {}
};

void require(bool ok, const std::string& msg) {
    if (!ok) throw CriterionFailure(msg);
}

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(10);
    os << x;
    return os.str();
}

struct InstanceSpec {
    int m;
    int n;
    std::uint64_t seed;
    double cond;
};

Vec seeded_start(int dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    Vec x(dim);
    for (double& xi : x) xi = u(rng);
    return x;
}

double max_entry_error_vs_signature(const Multipliers& mult, int m, int n) {
    auto [n0, map] = build_transform(mult, m, n);
    DenseMatrix product = map.transpose() * n0 * map;
    int half = m + n;
    double worst = 0.0;
    for (int i = 0; i < 2 * half; ++i)
        for (int j = 0; j < 2 * half; ++j) {
            double want = (i == j) ? (i < half ? -1.0 : 1.0) : 0.0;
            worst = std::max(worst, std::abs(product(i, j) - want));
        }
    return worst;
}

double hinf_grid(double c, double p, double rho) {
    const int kPoints = 10000;
    const double tau = 2.0 * std::acos(-1.0);
    double worst = 0.0;
    for (int i = 0; i < kPoints; ++i) {
        double theta = tau * i / kPoints;
        double dist = std::sqrt(rho * rho - 2.0 * rho * p * std::cos(theta) + p * p);
        worst = std::max(worst, std::abs(c) / dist);
    }
    return worst;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.good()) throw CriterionFailure("cannot open " + path);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// ---- criterion bodies ----------------------------------------------------

// Certified rate against the measured rate on the coupled scalar fixture.
void criterion_rate_match() {
    auto t0 = std::chrono::steady_clock::now();
    ProblemConstants constants = derive_constants(ref1());
    double rho = certified_rate(constants, 0.0007, 0.06);
    require(std::abs(rho - 0.999479) <= 1e-6, "certified rho " + fmt(rho) + " != 0.999479");

    BilevelOracle oracle = as_oracle(ref1());
    SolverConfig config{0.0007, 0.06, 20000, 0.0, 1};
    Trajectory traj = single_loop_run(oracle, config, {0.0}, {0.0});
    RateFit fit = fit_rate(traj);
    require(std::abs(fit.rho_hat - 0.9986) <= 1e-3,
            "fitted rate " + fmt(fit.rho_hat) + " outside 0.9986 +- 0.001");
    require(fit.rho_hat <= rho + 1e-3,
            "fitted rate " + fmt(fit.rho_hat) + " exceeds certified " + fmt(rho) + " + 1e-3");

    double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    require(seconds < 1.0, "took " + fmt(seconds) + " s, budget 1 s");
    std::cout << "    rho=" << fmt(rho) << " rho_hat=" << fmt(fit.rho_hat) << " in " << fmt(seconds)
              << " s\n";
}

// Fitted rate never beats the certificate across a seeded instance sweep.
void criterion_sweep() {
    auto t0 = std::chrono::steady_clock::now();
    const std::vector<InstanceSpec> specs = {
        {3, 1, 101, 1.5}, {1, 2, 102, 1.0}, {2, 3, 106, 1.0}, {1, 1, 108, 1.0},
        {2, 1, 109, 1.5}, {2, 2, 112, 1.0}, {1, 3, 114, 1.0}, {3, 3, 116, 1.0},
        {1, 1, 117, 1.5}, {2, 1, 118, 1.0}, {3, 1, 119, 1.5}, {1, 2, 120, 1.0},
        {3, 2, 122, 1.0}, {2, 3, 124, 1.0}, {2, 2, 130, 1.0}, {1, 3, 132, 1.0},
        {3, 3, 141, 1.0}, {4, 2, 148, 1.0}, {1, 1, 152, 3.0}, {1, 1, 154, 5.0},
    };
    double worst_gap = -1.0;
    for (const InstanceSpec& spec : specs) {
        QuadraticInstance inst = make_instance(spec.m, spec.n, spec.seed, spec.cond);
        ProblemConstants constants = derive_constants(inst);
        auto [alpha, beta] = auto_step_sizes(constants);
        double rho = certified_rate(constants, alpha, beta);

        RateFit fit;
        bool fitted = false;
        std::string fit_error;
        BilevelOracle oracle = as_oracle(inst);
        for (long budget : {20000L, 60000L, 150000L}) {
            SolverConfig config{alpha, beta, budget, 0.0, 1};
            Trajectory traj = single_loop_run(oracle, config,
                                              seeded_start(spec.m, spec.seed + 1),
                                              seeded_start(spec.n, spec.seed + 2));
            try {
                fit = fit_rate(traj);
                fitted = true;
                break;
            } catch (const InsufficientDecay& e) {
                fit_error = e.what();
            }
        }
        std::ostringstream label;
        label << "instance (" << spec.m << "," << spec.n << ",seed " << spec.seed << ")";
        require(fitted, label.str() + ": no fittable decay: " + fit_error);
        require(fit.rho_hat <= rho + 1e-3, label.str() + ": fitted " + fmt(fit.rho_hat) +
                                               " exceeds certified " + fmt(rho) + " + 1e-3");
        worst_gap = std::max(worst_gap, fit.rho_hat - rho);
    }
    double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    require(seconds < 30.0, "sweep took " + fmt(seconds) + " s, budget 30 s");
    std::cout << "    20 instances, worst fitted-minus-certified gap " << fmt(worst_gap) << ", in "
              << fmt(seconds) << " s\n";
}

// The scalar fixture converges to its known minimizer.
void criterion_convergence() {
    BilevelOracle oracle = as_oracle(ref1());
    SolverConfig config{0.0007, 0.06, 20000, 0.0, 1};
    Trajectory traj = single_loop_run(oracle, config, {0.0}, {0.0});
    for (const TrajectoryPoint& p : traj.points)
        if (std::abs(p.omega[0] - 2.0) <= 1e-8 && std::abs(p.v[0] - 2.0) <= 1e-8) {
            std::cout << "    reached (2, 2) at step " << p.k << "\n";
            return;
        }
    throw CriterionFailure("never within 1e-8 of (2, 2) in 20000 steps");
}

// Approximate gradient against finite differences of the reduced objective.
void criterion_hypergradient() {
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
        int m = 1 + (i % 5);
        int n = 1 + ((i + 2) % 5);
        double conds[] = {1.0, 2.0, 3.0, 5.0, 10.0};
        QuadraticInstance inst = make_instance(m, n, 300 + i, conds[i % 5]);
        BilevelOracle oracle = as_oracle(inst);
        Vec omega = seeded_start(m, 400 + i);
        double err = hypergradient_consistency(oracle, omega, 1e-6);
        worst = std::max(worst, err);
        if (err > 1e-5) {
            std::ostringstream os;
            os << "instance " << m << "x" << n << " seed " << (300 + i) << ": relative error "
               << fmt(err);
            throw CriterionFailure(os.str());
        }
    }
    std::cout << "    50 instances, worst relative error " << fmt(worst) << "\n";
}

// All six sector margins hold along certified runs.
void criterion_margins() {
    const std::vector<InstanceSpec> specs = {
        {1, 1, 201, 2.0}, {2, 1, 202, 1.5}, {1, 2, 203, 1.0}, {2, 2, 204, 1.0},
        {3, 1, 205, 2.0}, {1, 3, 206, 1.0}, {3, 2, 207, 1.0}, {2, 3, 208, 1.0},
        {3, 3, 209, 1.0}, {2, 2, 210, 1.5},
    };
    double worst_margin = 0.0;

    BilevelOracle ref_oracle = as_oracle(ref1());
    ProblemConstants ref_constants = derive_constants(ref1());
    SolverConfig ref_config{0.0007, 0.06, 5000, 0.0, 1};
    Trajectory ref_traj = single_loop_run(ref_oracle, ref_config, {0.0}, {0.0});
    AuditReport ref_report = sector_audit(ref_oracle, ref_constants, ref_config, ref_traj);
    require(ref_report.pass, "margin violation on the coupled scalar fixture at step " +
                                 std::to_string(ref_report.first_violation_step));
    for (const CheckResult& c : ref_report.checks) worst_margin = std::min(worst_margin, c.min_margin);

    for (const InstanceSpec& spec : specs) {
        QuadraticInstance inst = make_instance(spec.m, spec.n, spec.seed, spec.cond);
        BilevelOracle oracle = as_oracle(inst);
        ProblemConstants constants = derive_constants(inst);
        auto [alpha, beta] = auto_step_sizes(constants);
        SolverConfig config{alpha, beta, 5000, 0.0, 1};
        Trajectory traj = single_loop_run(oracle, config, seeded_start(spec.m, spec.seed + 1),
                                          seeded_start(spec.n, spec.seed + 2));
        AuditReport report = sector_audit(oracle, constants, config, traj);
        std::ostringstream label;
        label << "instance (" << spec.m << "," << spec.n << ",seed " << spec.seed << ")";
        require(report.pass,
                label.str() + ": violation at step " + std::to_string(report.first_violation_step));
        require(report.max_decomposition_error <= 1e-9,
                label.str() + ": decomposition residual " + fmt(report.max_decomposition_error));
        require(report.max_implication_gap <= 1e-9,
                label.str() + ": implication gap " + fmt(report.max_implication_gap));
        for (const CheckResult& c : report.checks) worst_margin = std::min(worst_margin, c.min_margin);
    }
    std::cout << "    11 runs x 5000 steps, worst margin " << fmt(worst_margin) << "\n";
}

// The congruence transform diagonalizes the quadratic form.
void criterion_transform() {
    std::mt19937 rng(606);
    std::uniform_real_distribution<double> lam(0.5, 2.0);
    std::uniform_real_distribution<double> frac(0.05, 0.9);
    std::uniform_int_distribution<int> dim(1, 4);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        Multipliers mult;
        mult.lambda1 = lam(rng);
        mult.lambda2 = lam(rng);
        mult.lambda3 = lam(rng);
        mult.lambda4 = lam(rng);
        mult.a = frac(rng) * (3.0 * mult.lambda1 * mult.lambda1 / (4.0 * mult.lambda3));
        mult.b = frac(rng) * (mult.lambda2 * mult.lambda2 / (4.0 * mult.lambda4));
        double err = max_entry_error_vs_signature(mult, dim(rng), dim(rng));
        worst = std::max(worst, err);
        if (err > 1e-9)
            throw CriterionFailure("trial " + std::to_string(trial) + ": residual " + fmt(err));
    }
    std::cout << "    100 multiplier sets, worst residual " << fmt(worst) << "\n";
}

// Closed-form H-infinity norm against a dense frequency grid.
void criterion_hinf() {
    std::mt19937 rng(707);
    std::uniform_real_distribution<double> uc(0.01, 2.0);
    std::uniform_real_distribution<double> urho(0.15, 1.0);
    std::uniform_real_distribution<double> usign(-1.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        double rho = urho(rng);
        double p = 0.95 * rho * usign(rng);
        double c = uc(rng) * (usign(rng) < 0.0 ? -1.0 : 1.0);
        double closed = hinf_first_order(c, p, rho);
        double grid = hinf_grid(c, p, rho);
        double rel = std::abs(closed - grid) / std::max(1e-12, closed);
        worst = std::max(worst, rel);
        if (rel > 1e-6)
            throw CriterionFailure("triple (" + fmt(c) + "," + fmt(p) + "," + fmt(rho) +
                                   "): relative gap " + fmt(rel));
    }
    std::cout << "    100 channels, worst relative gap " << fmt(worst) << "\n";
}

// Bisection pins the smallest certifiable rate; faster rates are refused.
void criterion_bisection() {
    ProblemConstants constants = derive_constants(ref1());
    double r = min_certifiable_rho(constants, 0.0007, 0.06, 1e-8);
    require(r <= 0.999479 + 1e-6, "bisected rho " + fmt(r) + " above 0.999479 + 1e-6");
    require(small_gain_verdict(constants, 0.0007, 0.06, r).feasible,
            "verdict infeasible at bisected rho " + fmt(r));
    require(!small_gain_verdict(constants, 0.0007, 0.06, 0.5).feasible,
            "verdict wrongly feasible at rho = 0.5");
    std::cout << "    minimal certifiable rho " << fmt(r) << "\n";
}

// Step-size gate names each violated bound.
void criterion_step_gate() {
    ProblemConstants constants = derive_constants(ref1());

    std::vector<StepBound> alpha_case = violated_bounds(constants, 0.05, 0.06);
    bool has_alpha = false;
    for (StepBound b : alpha_case) has_alpha |= (b == StepBound::Alpha);
    require(has_alpha, "alpha case did not flag the alpha bound");

    std::vector<StepBound> beta_case = violated_bounds(constants, 0.0007, 0.07);
    require(beta_case.size() == 1 && beta_case[0] == StepBound::Beta,
            "beta case flagged the wrong set");

    std::vector<StepBound> ratio_case = violated_bounds(constants, 0.0007, 0.058);
    require(ratio_case.size() == 1 && ratio_case[0] == StepBound::Ratio,
            "ratio case flagged the wrong set");

    bool threw = false;
    try {
        certified_rate(constants, 0.0007, 0.058);
    } catch (const StepSizeInfeasible&) {
        threw = true;
    }
    require(threw, "certified_rate accepted a ratio violation");
    std::cout << "    alpha, beta, ratio violations each named correctly\n";
}

// An oversized upper step is detected rather than silently looping.
void criterion_divergence() {
    BilevelOracle oracle = as_oracle(ref1());
    SolverConfig config{10.0, 0.06, 1000, 0.0, 1};
    try {
        Trajectory traj = single_loop_run(oracle, config, {0.0}, {0.0});
        require(!traj.points.empty(), "no trajectory points");
        double first = traj.points.front().omega_err;
        double last = traj.points.back().omega_err;
        require(last >= first, "run neither diverged nor stalled: error " + fmt(first) + " -> " +
                                   fmt(last));
        std::cout << "    error non-decreasing: " << fmt(first) << " -> " << fmt(last) << "\n";
    } catch (const DivergenceDetected& e) {
        std::cout << "    divergence detected after step " << e.last_finite_k << "\n";
    }
}

// The comparison command completes, favors the single loop, and is
// byte-deterministic.
void criterion_compare() {
    ExperimentConfig cfg;
    cfg.instance = "ref1";
    cfg.target = 1e-6;
    cfg.iters = 200000;
    cfg.out_dir = "acceptance_tmp/compare_a";
    fs::create_directories(cfg.out_dir);
    require(cmd_compare(cfg) == 0, "first comparison run failed");

    nlohmann::json cmp = nlohmann::json::parse(slurp(cfg.out_dir + "/comparison.json"));
    for (const char* key : {"instance", "target", "alpha", "beta", "inner_tol", "budget",
                            "single_loop", "double_loop", "partial"})
        require(cmp.contains(key), std::string("comparison.json lacks key ") + key);
    for (const char* side : {"single_loop", "double_loop"})
        for (const char* key :
             {"converged", "outer_steps", "upper_evals", "lower_evals", "hessian_solves",
              "final_omega_err", "note"})
            require(cmp[side].contains(key), std::string(side) + " lacks key " + key);
    require(cmp["partial"] == false, "comparison marked partial");
    require(cmp["single_loop"]["converged"] == true, "single loop did not converge");
    require(cmp["double_loop"]["converged"] == true, "double loop did not converge");
    long single_lower = cmp["single_loop"]["lower_evals"].get<long>();
    long double_lower = cmp["double_loop"]["lower_evals"].get<long>();
    require(single_lower < double_lower,
            "single loop used " + std::to_string(single_lower) + " lower evals, double loop " +
                std::to_string(double_lower));

    ExperimentConfig again = cfg;
    again.out_dir = "acceptance_tmp/compare_b";
    fs::create_directories(again.out_dir);
    require(cmd_compare(again) == 0, "second comparison run failed");
    require(slurp(cfg.out_dir + "/comparison.json") == slurp(again.out_dir + "/comparison.json"),
            "comparison.json differs between identical runs");
    std::cout << "    single " << single_lower << " vs double " << double_lower
              << " lower evals, byte-identical reruns\n";
}

} // namespace

int main() {
    struct Criterion {
        const char* label;
        std::function<void()> body;
    };
    const std::vector<Criterion> criteria = {
        {"certified rate matches the measured rate on the coupled fixture", criterion_rate_match},
        {"fitted rates never beat certificates across 20 seeded instances", criterion_sweep},
        {"coupled fixture converges to its minimizer within budget", criterion_convergence},
        {"approximate gradient agrees with reduced finite differences", criterion_hypergradient},
        {"six sector margins hold along certified runs", criterion_margins},
        {"congruence transform diagonalizes the quadratic form", criterion_transform},
        {"closed-form H-infinity norm matches a dense grid", criterion_hinf},
        {"bisection finds the smallest certifiable rate", criterion_bisection},
        {"step-size gate names each violated bound", criterion_step_gate},
        {"oversized steps are reported as divergence", criterion_divergence},
        {"single/double loop comparison completes deterministically", criterion_compare},
    };

    int failures = 0;
    for (size_t i = 0; i < criteria.size(); ++i) {
        std::ostringstream tag;
        tag << (i + 1) << "/" << criteria.size();
        try {
            criteria[i].body();
            std::cout << "[PASS] " << tag.str() << " " << criteria[i].label << "\n";
        } catch (const std::exception& e) {
            ++failures;
            std::cout << "[FAIL] " << tag.str() << " " << criteria[i].label << ": " << e.what()
                      << "\n";
        }
    }
    if (failures == 0) {
        std::cout << "acceptance: all " << criteria.size() << " criteria pass\n";
        return 0;
    }
    std::cout << "acceptance: " << failures << " of " << criteria.size() << " criteria FAILED\n";
    return 1;
}
