#include "bicert/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "bicert/io.hpp"

namespace bicert {

namespace {

std::string instance_label(const ExperimentConfig& cfg) {
    if (cfg.has_gen) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "gen(%d,%d,%llu,%.17g)", cfg.gen_m, cfg.gen_n,
                      static_cast<unsigned long long>(cfg.gen_seed), cfg.gen_cond);
        return buf;
    }
    return cfg.instance;
}

QuadraticInstance resolve_instance(const ExperimentConfig& cfg) {
    if (cfg.has_gen) return make_instance(cfg.gen_m, cfg.gen_n, cfg.gen_seed, cfg.gen_cond);
    if (cfg.instance == "ref0") return ref0();
    if (cfg.instance == "ref1") return ref1();
    return read_instance_json(cfg.instance);
}

ProblemConstants resolve_constants(const ExperimentConfig& cfg, const QuadraticInstance& inst) {
    ProblemConstants c = derive_constants(inst);
    if (cfg.mu_f_override > 0.0) c.mu_f = cfg.mu_f_override;
    return c;
}

// auto mode: half of each bound, alpha halved further until the ratio
// constraint holds. Explicit mode: both steps must be positive.
std::pair<double, double> resolve_steps(const ExperimentConfig& cfg,
                                        const ProblemConstants& constants) {
    if (cfg.auto_steps) return auto_step_sizes(constants);
    if (!(cfg.alpha > 0.0) || !(cfg.beta > 0.0))
        throw InputError("explicit step sizes require --alpha and --beta > 0 (or pass --auto)");
    return {cfg.alpha, cfg.beta};
}

void resolve_start(const ExperimentConfig& cfg, int m, int n, Vec& omega0, Vec& v0) {
    omega0.assign(m, 0.0);
    v0.assign(n, 0.0);
    if (!cfg.start_omega.empty() || !cfg.start_v.empty()) {
        if (static_cast<int>(cfg.start_omega.size()) != m ||
            static_cast<int>(cfg.start_v.size()) != n)
            throw InputError("--start-omega needs " + std::to_string(m) + " and --start-v " +
                             std::to_string(n) + " comma-separated values");
        omega0 = cfg.start_omega;
        v0 = cfg.start_v;
    } else if (cfg.has_start_seed) {
        std::mt19937_64 rng(cfg.start_seed);
        std::uniform_real_distribution<double> u(-2.0, 2.0);
        for (double& x : omega0) x = u(rng);
        for (double& x : v0) x = u(rng);
    }
}

std::string output_path(const ExperimentConfig& cfg, const std::string& name) {
    std::filesystem::create_directories(cfg.out_dir);
    return (std::filesystem::path(cfg.out_dir) / name).string();
}

// The verdict at exactly the certified rate sits on the gain = 1 boundary;
// evaluate slightly above it, capped below 1.
double verdict_rho(double rho_certified) {
    return std::min(rho_certified * (1.0 + 1e-9), 0.5 * (1.0 + rho_certified));
}

std::string status_name(RunStatus s) {
    switch (s) {
        case RunStatus::ReachedTolerance: return "reached_tolerance";
        case RunStatus::Diverged: return "diverged";
        default: return "reached_max_iters";
    }
}

std::string fmt6(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", x);
    return buf;
}

nlohmann::json num_or_na(double x, bool available) {
    if (!available) return "n/a";
    return num_or_inf(x);
}

struct CompareResult {
    bool converged = false;
    long steps = 0;
    EvalCounters counters;
    double final_omega_err = 0.0;
    std::string note;
};

// Both comparison drivers stop on the true upper error, checked before any
// evaluation, so a target looser than the starting error costs nothing.
CompareResult run_single_to_target(const BilevelOracle& oracle, double alpha, double beta,
                                   double target, long budget, Vec omega, Vec v) {
    const Vec& omega_opt = *oracle.ground_truth->omega_star;
    CompareResult r;
    for (long k = 0;; ++k) {
        double err = norm2(sub(omega, omega_opt));
        r.final_omega_err = err;
        r.steps = k;
        if (err <= target) {
            r.converged = true;
            return r;
        }
        if (!all_finite(omega) || !all_finite(v)) {
            r.note = "diverged";
            return r;
        }
        if (k == budget) return r;
        Vec u1 = approx_gradient(oracle, omega, v, &r.counters);
        Vec gv = oracle.grad_g_v(omega, v);
        r.counters.lower_grad += 1;
        omega = sub(omega, scale(alpha, u1));
        v = sub(v, scale(beta, gv));
    }
}

CompareResult run_double_to_target(const BilevelOracle& oracle, double alpha, double beta,
                                   double inner_tol, double target, long budget, Vec omega, Vec v,
                                   long inner_cap) {
    const Vec& omega_opt = *oracle.ground_truth->omega_star;
    CompareResult r;
    for (long k = 0;; ++k) {
        double err = norm2(sub(omega, omega_opt));
        r.final_omega_err = err;
        r.steps = k;
        if (err <= target) {
            r.converged = true;
            return r;
        }
        if (!all_finite(omega) || !all_finite(v)) {
            r.note = "diverged";
            return r;
        }
        if (k == budget) return r;
        for (long inner = 0;; ++inner) {
            Vec gv = oracle.grad_g_v(omega, v);
            r.counters.lower_grad += 1;
            if (norm2(gv) <= inner_tol) break;
            if (inner == inner_cap || !all_finite(gv)) {
                r.note = "inner loop stalled at outer step " + std::to_string(k);
                return r;
            }
            v = sub(v, scale(beta, gv));
        }
        Vec u1 = approx_gradient(oracle, omega, v, &r.counters);
        omega = sub(omega, scale(alpha, u1));
    }
}

nlohmann::json compare_result_json(const CompareResult& r) {
    nlohmann::json j;
    j["converged"] = r.converged;
    j["outer_steps"] = r.steps;
    j["upper_evals"] = r.counters.upper_grad;
    j["lower_evals"] = r.counters.lower_grad;
    j["hessian_solves"] = r.counters.hessian_solves;
    j["final_omega_err"] = num_or_inf(r.final_omega_err);
    j["note"] = r.note;
    return j;
}

} // namespace

int cmd_certify(const ExperimentConfig& cfg) {
    QuadraticInstance inst = resolve_instance(cfg);
    ProblemConstants constants = resolve_constants(cfg, inst);
    auto [alpha, beta] = resolve_steps(cfg, constants);

    RateCertificate cert;
    if (violated_bounds(constants, alpha, beta).empty()) {
        double rho = certified_rate(constants, alpha, beta);
        cert = small_gain_verdict(constants, alpha, beta, verdict_rho(rho));
        cert.rho = rho;
    } else {
        cert = small_gain_verdict(constants, alpha, beta, 0.9);
        cert.rho = NAN;
    }

    std::cout << "instance " << instance_label(cfg) << ": m=" << inst.m << " n=" << inst.n << "\n";
    std::cout << "steps: alpha=" << alpha << " beta=" << beta
              << (cfg.auto_steps ? " (auto)" : " (explicit)") << "\n";
    if (cert.feasible) {
        std::cout << "feasible: yes\n";
        std::cout << "certified rho: " << fmt6(cert.rho) << "\n";
    } else {
        std::cout << "feasible: no\n";
        std::cout << "violated:";
        for (const std::string& c : cert.violated_conditions) std::cout << ' ' << c;
        std::cout << "\n";
    }
    std::string path = output_path(cfg, "certificate.json");
    write_json_file(certificate_to_json(cert), path);
    std::cout << "wrote " << path << "\n";
    return cert.feasible ? 0 : 1;
}

int cmd_solve(const ExperimentConfig& cfg) {
    QuadraticInstance inst = resolve_instance(cfg);
    BilevelOracle oracle = as_oracle(inst);
    ProblemConstants constants = resolve_constants(cfg, inst);
    auto [alpha, beta] = resolve_steps(cfg, constants);

    bool certified = violated_bounds(constants, alpha, beta).empty();
    if (!certified && !cfg.force) {
        std::cerr << "refusing to run: step sizes leave the certified region"
                  << " (pass --force to run anyway)\n";
        return 2;
    }
    double rho_certified = certified ? certified_rate(constants, alpha, beta) : NAN;

    SolverConfig scfg;
    scfg.alpha = alpha;
    scfg.beta = beta;
    scfg.max_iters = cfg.iters;
    scfg.log_stride = 1;
    Vec omega0, v0;
    resolve_start(cfg, inst.m, inst.n, omega0, v0);

    Trajectory traj;
    bool diverged = false;
    auto t0 = std::chrono::steady_clock::now();
    try {
        traj = single_loop_run(oracle, scfg, omega0, v0);
    } catch (DivergenceDetected& e) {
        traj = std::move(e.partial);
        diverged = true;
    }
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::string csv_path = output_path(cfg, "trajectory.csv");
    write_trajectory_csv(traj, csv_path);

    bool have_fit = false;
    RateFit fit;
    std::vector<std::string> notes;
    try {
        fit = fit_rate(traj);
        have_fit = true;
    } catch (const Error& e) {
        notes.emplace_back(e.what());
    }

    bool have_pass = have_fit && certified;
    bool rate_pass = have_pass && fit.rho_hat <= rho_certified + 1e-3;

    nlohmann::json report;
    report["instance"] = instance_label(cfg);
    report["alpha"] = alpha;
    report["beta"] = beta;
    report["auto_steps"] = cfg.auto_steps;
    report["iters"] = cfg.iters;
    report["status"] = status_name(traj.status);
    report["diverged"] = diverged;
    report["last_finite_k"] = traj.last_k;
    report["final_omega_err"] = num_or_inf(traj.points.empty() ? NAN : traj.points.back().omega_err);
    report["final_v_err"] = num_or_inf(traj.points.empty() ? NAN : traj.points.back().v_err);
    report["rho_hat"] = num_or_na(have_fit ? fit.rho_hat : NAN, have_fit);
    report["rho_certified"] = num_or_na(rho_certified, certified);
    report["rate_pass"] = have_pass ? nlohmann::json(rate_pass) : nlohmann::json("n/a");
    if (have_fit)
        report["fit_window"] = {{"k_start", fit.k_start},
                                {"k_end", fit.k_end},
                                {"points_used", fit.points_used}};
    report["evals"] = {{"upper", traj.counters.upper_grad},
                       {"lower", traj.counters.lower_grad},
                       {"hessian_solves", traj.counters.hessian_solves}};
    report["wall_time_seconds"] = wall;
    report["notes"] = notes;
    std::string report_path = output_path(cfg, "run_report.json");
    write_json_file(report, report_path);

    std::cout << "instance " << instance_label(cfg) << ": m=" << inst.m << " n=" << inst.n << "\n";
    std::cout << "steps: alpha=" << alpha << " beta=" << beta << "\n";
    std::cout << "status: " << status_name(traj.status) << " (last k=" << traj.last_k << ")\n";
    std::cout << "rho_hat: " << (have_fit ? fmt6(fit.rho_hat) : "n/a")
              << "  certified rho: " << (certified ? fmt6(rho_certified) : "n/a")
              << "  rate check: " << (have_pass ? (rate_pass ? "pass" : "FAIL") : "n/a") << "\n";
    std::cout << "wrote " << csv_path << " and " << report_path << "\n";

    if (diverged) return 1;
    if (have_pass && !rate_pass) return 1;
    return 0;
}

int cmd_compare(const ExperimentConfig& cfg) {
    QuadraticInstance inst = resolve_instance(cfg);
    BilevelOracle oracle = as_oracle(inst);
    ProblemConstants constants = resolve_constants(cfg, inst);
    if (!(cfg.target > 0.0)) throw InputError("--target must be positive");
    auto [alpha, beta] = auto_step_sizes(constants);
    double inner_tol = cfg.target / 10.0;

    Vec omega0, v0;
    resolve_start(cfg, inst.m, inst.n, omega0, v0);
    CompareResult single =
        run_single_to_target(oracle, alpha, beta, cfg.target, cfg.iters, omega0, v0);
    CompareResult baseline = run_double_to_target(oracle, alpha, beta, inner_tol, cfg.target,
                                                  cfg.iters, omega0, v0, 1000000);

    nlohmann::json j;
    j["instance"] = instance_label(cfg);
    j["target"] = cfg.target;
    j["alpha"] = alpha;
    j["beta"] = beta;
    j["inner_tol"] = inner_tol;
    j["budget"] = cfg.iters;
    j["single_loop"] = compare_result_json(single);
    j["double_loop"] = compare_result_json(baseline);
    bool partial = !(single.converged && baseline.converged);
    j["partial"] = partial;
    std::string path = output_path(cfg, "comparison.json");
    write_json_file(j, path);

    std::cout << "single loop: " << (single.converged ? "converged" : "did not converge") << " in "
              << single.steps << " steps, lower evals " << single.counters.lower_grad
              << ", hessian solves " << single.counters.hessian_solves << "\n";
    std::cout << "double loop: " << (baseline.converged ? "converged" : "did not converge")
              << " in " << baseline.steps << " outer steps, lower evals "
              << baseline.counters.lower_grad << ", hessian solves "
              << baseline.counters.hessian_solves << "\n";
    std::cout << "wrote " << path << "\n";
    return partial ? 1 : 0;
}

int cmd_audit(const ExperimentConfig& cfg) {
    QuadraticInstance inst = resolve_instance(cfg);
    BilevelOracle oracle = as_oracle(inst);
    ProblemConstants constants = resolve_constants(cfg, inst);
    auto [alpha, beta] = resolve_steps(cfg, constants);

    if (!violated_bounds(constants, alpha, beta).empty()) {
        std::cerr << "refusing to audit: step sizes leave the certified region\n";
        return 2;
    }
    double rho = certified_rate(constants, alpha, beta);
    RateCertificate cert = small_gain_verdict(constants, alpha, beta, verdict_rho(rho));
    if (!cert.feasible) {
        std::cerr << "refusing to audit: certificate infeasible:";
        for (const std::string& c : cert.violated_conditions) std::cerr << ' ' << c;
        std::cerr << "\n";
        return 2;
    }

    SolverConfig scfg;
    scfg.alpha = alpha;
    scfg.beta = beta;
    scfg.max_iters = std::min(cfg.iters, 5000L);
    scfg.log_stride = 1;
    Vec omega0, v0;
    resolve_start(cfg, inst.m, inst.n, omega0, v0);

    Trajectory traj;
    try {
        traj = single_loop_run(oracle, scfg, omega0, v0);
    } catch (const DivergenceDetected& e) {
        std::cerr << "audit run diverged: " << e.what() << "\n";
        return 1;
    }

    AuditReport report = sector_audit(oracle, constants, scfg, traj);
    std::string path = output_path(cfg, "audit.json");
    write_json_file(audit_to_json(report), path);

    for (const CheckResult& c : report.checks)
        std::cout << (c.pass ? "  [ok]        " : "  [VIOLATED]  ") << c.name
                  << "  min margin " << c.min_margin << " at k=" << c.argmin_step << "\n";
    std::cout << (report.pass ? "all sector checks hold" : "sector check violated") << " over "
              << traj.points.size() << " states\n";
    std::cout << "wrote " << path << "\n";
    return report.pass ? 0 : 1;
}

int cmd_gen(const ExperimentConfig& cfg) {
    if (!cfg.has_gen) throw InputError("gen requires --gen m,n,seed,cond");
    QuadraticInstance inst = resolve_instance(cfg);
    ProblemConstants c = derive_constants(inst);
    std::string path = output_path(cfg, "instance.json");
    write_instance_json(inst, path);
    std::cout << "instance " << instance_label(cfg) << ": m=" << inst.m << " n=" << inst.n << "\n";
    std::cout << "constants: mu_f=" << c.mu_f << " mu_g=" << c.mu_g << " L_g=" << c.L_g
              << " H_omega=" << c.H_omega << " H_v=" << c.H_v << " H=" << c.H << "\n";
    std::cout << "wrote " << path << "\n";
    return 0;
}

namespace {

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream stream(s);
    while (std::getline(stream, field, ',')) out.push_back(field);
    return out;
}

double parse_double(const std::string& s, const std::string& what) {
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) throw InputError(what + ": bad number '" + s + "'");
    return v;
}

long long parse_int(const std::string& s, const std::string& what) {
    char* end = nullptr;
    long long v = std::strtoll(s.c_str(), &end, 10);
    if (s.empty() || end != s.c_str() + s.size())
        throw InputError(what + ": bad integer '" + s + "'");
    return v;
}

Vec parse_vec(const std::string& s, const std::string& what) {
    Vec out;
    for (const std::string& f : split_commas(s)) out.push_back(parse_double(f, what));
    return out;
}

void apply_gen_spec(ExperimentConfig& cfg, const std::string& spec) {
    if (spec.empty()) return;
    std::vector<std::string> f = split_commas(spec);
    if (f.size() != 4) throw InputError("--gen expects m,n,seed,cond");
    cfg.gen_m = static_cast<int>(parse_int(f[0], "--gen m"));
    cfg.gen_n = static_cast<int>(parse_int(f[1], "--gen n"));
    long long seed = parse_int(f[2], "--gen seed");
    cfg.gen_cond = parse_double(f[3], "--gen cond");
    if (cfg.gen_m < 1 || cfg.gen_n < 1) throw InputError("--gen dimensions must be >= 1");
    if (seed < 0) throw InputError("--gen seed must be >= 0");
    if (!(cfg.gen_cond >= 1.0)) throw InputError("--gen cond must be >= 1");
    cfg.gen_seed = static_cast<std::uint64_t>(seed);
    cfg.has_gen = true;
}

} // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"single-loop bilevel solver with a small-gain rate certificate"};
    app.require_subcommand(1);

    ExperimentConfig cfg;
    std::string gen_spec, start_omega_spec, start_v_spec;

    auto add_common = [&](CLI::App* sub) {
        CLI::Option* inst = sub->add_option("--instance", cfg.instance,
                                            "instance: ref0, ref1, or path to an instance JSON");
        CLI::Option* gen = sub->add_option("--gen", gen_spec, "generate an instance: m,n,seed,cond");
        inst->excludes(gen);
        sub->add_option("--out", cfg.out_dir, "output directory (created if missing)");
    };
    auto add_steps = [&](CLI::App* sub) {
        sub->add_option("--alpha", cfg.alpha, "upper-level step size");
        sub->add_option("--beta", cfg.beta, "lower-level step size");
        sub->add_flag("--auto", cfg.auto_steps, "derive step sizes from the certified region");
    };
    auto add_start = [&](CLI::App* sub) {
        CLI::Option* seed = sub->add_option("--seed", cfg.start_seed,
                                            "seed for a random start in [-2, 2]^(m+n)");
        seed->each([&](const std::string&) { cfg.has_start_seed = true; });
        sub->add_option("--start-omega", start_omega_spec, "explicit start, comma-separated");
        sub->add_option("--start-v", start_v_spec, "explicit start, comma-separated");
    };

    CLI::App* certify = app.add_subcommand("certify", "check step sizes and emit a certificate");
    add_common(certify);
    add_steps(certify);

    CLI::App* solve = app.add_subcommand("solve", "run the single-loop solver and fit the rate");
    add_common(solve);
    add_steps(solve);
    add_start(solve);
    solve->add_option("--iters", cfg.iters, "iteration budget")->check(CLI::PositiveNumber);
    solve->add_flag("--force", cfg.force, "run even when steps leave the certified region");

    CLI::App* compare = app.add_subcommand("compare", "single- vs double-loop cost to a target");
    add_common(compare);
    add_start(compare);
    compare->add_option("--iters", cfg.iters, "outer iteration budget")->check(CLI::PositiveNumber);
    compare->add_option("--target", cfg.target, "upper-level error target");

    CLI::App* audit = app.add_subcommand("audit", "verify the sector inequalities along a run");
    add_common(audit);
    add_steps(audit);
    add_start(audit);
    audit->add_option("--iters", cfg.iters, "audited steps, capped at 5000")
        ->check(CLI::PositiveNumber);
    audit->add_option("--mu-f", cfg.mu_f_override, "override the derived mu_f (falsification aid)");

    CLI::App* gen = app.add_subcommand("gen", "generate a seeded instance file");
    add_common(gen);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        apply_gen_spec(cfg, gen_spec);
        if (!start_omega_spec.empty()) cfg.start_omega = parse_vec(start_omega_spec, "--start-omega");
        if (!start_v_spec.empty()) cfg.start_v = parse_vec(start_v_spec, "--start-v");
        if (cfg.auto_steps && (cfg.alpha != 0.0 || cfg.beta != 0.0))
            throw InputError("choose either --auto or explicit --alpha/--beta, not both");

        if (app.got_subcommand(certify)) return cmd_certify(cfg);
        if (app.got_subcommand(solve)) return cmd_solve(cfg);
        if (app.got_subcommand(compare)) return cmd_compare(cfg);
        if (app.got_subcommand(audit)) return cmd_audit(cfg);
        return cmd_gen(cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

} // namespace bicert
