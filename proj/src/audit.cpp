#include "bicert/audit.hpp"

#include <cmath>

namespace bicert {

namespace {

constexpr double kMarginTol = -1e-10;

const GroundTruth& require_truth(const BilevelOracle& oracle, const char* what) {
    if (!oracle.ground_truth.has_value() || !oracle.ground_truth->v_star ||
        !oracle.ground_truth->omega_star.has_value())
        throw CapabilityError(std::string(what) + ": oracle lacks omega_star/v_star ground truth");
    return *oracle.ground_truth;
}

struct MarginTracker {
    const char* name;
    double min_margin = INFINITY;
    long argmin_step = 0;

    void feed(long k, double margin) {
        if (margin < min_margin) {
            min_margin = margin;
            argmin_step = k;
        }
    }

    CheckResult finish() const {
        CheckResult r;
        r.name = name;
        r.min_margin = min_margin;
        r.argmin_step = argmin_step;
        r.pass = min_margin >= kMarginTol;
        return r;
    }
};

} // namespace

SystemState state_transform(const BilevelOracle& oracle, const SolverConfig& config,
                            const Vec& omega_k, const Vec& v_k) {
    const GroundTruth& gt = require_truth(oracle, "state_transform");
    if (!(config.alpha > 0.0) || !(config.beta > 0.0))
        throw InputError("state_transform: config must carry positive step sizes");
    if (static_cast<int>(omega_k.size()) != oracle.m || static_cast<int>(v_k.size()) != oracle.n)
        throw InputError("state_transform: iterate dimensions do not match oracle");

    SystemState s;
    s.x1 = sub(omega_k, *gt.omega_star);
    s.x2 = sub(v_k, gt.v_star(omega_k));
    s.u1 = approx_gradient(oracle, omega_k, v_k);
    Vec lower = oracle.grad_g_v(omega_k, v_k);
    Vec omega_next = sub(omega_k, scale(config.alpha, s.u1));
    Vec solution_shift = sub(gt.v_star(omega_next), gt.v_star(omega_k));
    s.u2 = add(lower, scale(1.0 / config.beta, solution_shift));

    // One simulated solver step must equal x - diag(alpha, beta) u in the
    // shifted coordinates; this catches any mismatch between the transform
    // and the actual update rule.
    Vec v_next = sub(v_k, scale(config.beta, lower));
    Vec x1_next = sub(omega_next, *gt.omega_star);
    Vec x2_next = sub(v_next, gt.v_star(omega_next));
    Vec x1_pred = sub(s.x1, scale(config.alpha, s.u1));
    Vec x2_pred = sub(s.x2, scale(config.beta, s.u2));
    double err = std::max(norm2(sub(x1_next, x1_pred)), norm2(sub(x2_next, x2_pred)));
    double scale_ref = 1.0 + std::max(norm2(x1_next), norm2(x2_next));
    if (err > 1e-10 * scale_ref)
        throw Error("state_transform: compact-dynamics identity residual " + std::to_string(err) +
                    " exceeds tolerance");
    return s;
}

AuditReport sector_audit(const BilevelOracle& oracle, const ProblemConstants& constants,
                         const SolverConfig& config, const Trajectory& traj) {
    require_truth(oracle, "sector_audit");
    if (traj.points.empty()) throw InputError("sector_audit: empty trajectory");
    for (size_t i = 0; i < traj.points.size(); ++i)
        if (traj.points[i].k != traj.points.front().k + static_cast<long>(i))
            throw InputError("sector_audit: trajectory must be logged with stride 1");

    Multipliers mult;
    try {
        mult = construct_multipliers(constants, config.alpha, config.beta);
    } catch (const Error& e) {
        throw CapabilityError(std::string("sector_audit: no feasible multipliers: ") + e.what());
    }
    // Recovery scalars of the block-triangular congruence: xi = x / p,
    // sigma = (u - (q/p) x) / r per channel.
    double gap1 = 3.0 * mult.lambda1 * mult.lambda1 / (4.0 * mult.lambda3) - mult.a;
    double gap2 = mult.lambda2 * mult.lambda2 / (4.0 * mult.lambda4) - mult.b;
    double p1 = 1.0 / std::sqrt(gap1);
    double p2 = 1.0 / std::sqrt(gap2);
    double slope1 = 3.0 * mult.lambda1 / (2.0 * mult.lambda3);
    double slope2 = mult.lambda2 / (2.0 * mult.lambda4);
    double r1 = std::sqrt(3.0 / mult.lambda3);
    double r2 = 1.0 / std::sqrt(mult.lambda4);

    double growth1 = 2.0 * (constants.H_omega * constants.H_omega +
                            2.0 * constants.H_v * constants.H_v * constants.H * constants.H /
                                (constants.mu_g * constants.mu_g));
    double cross_base = 2.0 * config.alpha * config.alpha * constants.H * constants.H /
                        (config.beta * config.beta);
    double cross3 = cross_base / (constants.mu_g * constants.mu_g * constants.mu_g);
    double cross4 = cross_base / (constants.mu_g * constants.mu_g);
    // Residual weight that completes the decomposition of the combined form
    // into the four weighted margins; nonnegative for feasible multipliers.
    double slack3 = 2.0 / 3.0 * mult.lambda3 - cross3 * mult.lambda2 - cross4 * mult.lambda4;

    MarginTracker m1{"upper_gradient_alignment"};
    MarginTracker m2{"upper_gradient_growth"};
    MarginTracker m3{"lower_residual_alignment"};
    MarginTracker m4{"lower_residual_growth"};
    MarginTracker m5{"combined_quadratic_form"};
    MarginTracker m6{"normalized_gain"};

    AuditReport report;
    for (const TrajectoryPoint& pt : traj.points) {
        SystemState s = state_transform(oracle, config, pt.omega, pt.v);
        double x1_sq = dot(s.x1, s.x1);
        double x2_sq = dot(s.x2, s.x2);
        double u1_sq = dot(s.u1, s.u1);
        double u2_sq = dot(s.u2, s.u2);
        double align1 = dot(s.u1, s.x1);
        double align2 = dot(s.u2, s.x2);

        double margin1 = align1 - 3.0 * constants.mu_f / 8.0 * x1_sq +
                         2.0 * constants.H_v * constants.H_v / constants.mu_f * x2_sq;
        double margin2 = growth1 * x1_sq + 4.0 * constants.H_v * constants.H_v * x2_sq - u1_sq;
        double margin3 = align2 - 3.0 * constants.mu_g / 8.0 * x2_sq + cross3 * u1_sq;
        double margin4 = 2.0 * constants.L_g * constants.L_g * x2_sq + cross4 * u1_sq - u2_sq;
        double qform = mult.a * x1_sq + mult.b * x2_sq + mult.lambda3 / 3.0 * u1_sq +
                       mult.lambda4 * u2_sq - mult.lambda1 * align1 - mult.lambda2 * align2;
        double margin5 = -qform;

        Vec sigma1(oracle.m), sigma2(oracle.n);
        double xi_sq = x1_sq / (p1 * p1) + x2_sq / (p2 * p2);
        for (int i = 0; i < oracle.m; ++i) sigma1[i] = (s.u1[i] - slope1 * s.x1[i]) / r1;
        for (int i = 0; i < oracle.n; ++i) sigma2[i] = (s.u2[i] - slope2 * s.x2[i]) / r2;
        double sigma_sq = dot(sigma1, sigma1) + dot(sigma2, sigma2);
        double margin6 = xi_sq - sigma_sq;

        long k = pt.k;
        m1.feed(k, margin1);
        m2.feed(k, margin2);
        m3.feed(k, margin3);
        m4.feed(k, margin4);
        m5.feed(k, margin5);
        m6.feed(k, margin6);

        double recombined = mult.lambda1 * margin1 + mult.lambda3 * margin2 +
                            mult.lambda2 * margin3 + mult.lambda4 * margin4 + slack3 * u1_sq;
        report.max_decomposition_error = std::max(
            report.max_decomposition_error, std::abs(margin5 - recombined) / (1.0 + std::abs(margin5)));
        report.max_implication_gap = std::max(report.max_implication_gap,
                                              std::abs(margin6 - margin5) / (1.0 + std::abs(margin5)));

        bool violated = margin1 < kMarginTol || margin2 < kMarginTol || margin3 < kMarginTol ||
                        margin4 < kMarginTol || margin5 < kMarginTol || margin6 < kMarginTol;
        if (violated && report.first_violation_step < 0) report.first_violation_step = k;
    }

    report.checks = {m1.finish(), m2.finish(), m3.finish(),
                     m4.finish(), m5.finish(), m6.finish()};
    for (const CheckResult& c : report.checks) report.pass = report.pass && c.pass;
    return report;
}

} // namespace bicert
