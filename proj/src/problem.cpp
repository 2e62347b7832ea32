#include "bicert/problem.hpp"

#include <cmath>

namespace bicert {

namespace {

// Tolerances below absorb the rounding of the sampled quantities themselves;
// a genuine constant violation overshoots them by orders of magnitude.
constexpr double kLowerSlack = 1e-9;  // lower bounds pass when ratio >= 1 - kLowerSlack
constexpr double kUpperSlack = 1e-9;  // upper bounds pass when ratio <= 1 + kUpperSlack

struct RatioTracker {
    bool lower_bound;
    double worst;
    int used = 0;

    explicit RatioTracker(bool lower) : lower_bound(lower), worst(lower ? 1e300 : -1e300) {}

    void feed(double observed, double allowed) {
        // observed and allowed are both nonnegative except alignment checks,
        // where observed may be any sign; allowed == 0 with observed == 0 is
        // vacuous and skipped so decoupled instances do not divide by zero.
        if (allowed == 0.0 && observed == 0.0) return;
        double ratio = (allowed == 0.0) ? (observed > 0.0 ? INFINITY : -INFINITY) : observed / allowed;
        worst = lower_bound ? std::min(worst, ratio) : std::max(worst, ratio);
        ++used;
    }

    AssumptionCheck finish(const std::string& name) const {
        AssumptionCheck c;
        c.name = name;
        c.samples_used = used;
        if (used == 0) {
            c.pass = true;
            c.worst_ratio = 0.0;
            return c;
        }
        c.worst_ratio = worst;
        c.pass = lower_bound ? (worst >= 1.0 - kLowerSlack) : (worst <= 1.0 + kUpperSlack);
        return c;
    }
};

void check_sample_dims(const BilevelOracle& oracle, const SamplePair& s) {
    if (static_cast<int>(s.omega.size()) != oracle.m || static_cast<int>(s.omega2.size()) != oracle.m ||
        static_cast<int>(s.v.size()) != oracle.n || static_cast<int>(s.v2.size()) != oracle.n)
        throw InputError("validate_constants: sample dimensions do not match oracle");
}

} // namespace

ValidationReport validate_constants(const BilevelOracle& oracle, const ProblemConstants& constants,
                                    const std::vector<SamplePair>& samples,
                                    const ApproxGradFn& approx_grad) {
    if (!(constants.mu_f > 0.0) || !(constants.mu_g > 0.0) || !(constants.L_g > 0.0))
        throw InputError("validate_constants: mu_f, mu_g, L_g must be positive");
    if (constants.H_omega < 0.0 || constants.H_v < 0.0 || constants.H < 0.0)
        throw InputError("validate_constants: Lipschitz constants must be nonnegative");
    if (!approx_grad) throw InputError("validate_constants: approx_grad callback required");

    RatioTracker lower_sc(true);
    RatioTracker lower_lip(false);
    RatioTracker hyper_omega(false);
    RatioTracker hyper_v(false);
    RatioTracker cross(false);
    RatioTracker reduced_sc(true);

    bool has_truth = oracle.ground_truth.has_value() && oracle.ground_truth->v_star;

    for (const SamplePair& s : samples) {
        check_sample_dims(oracle, s);

        Vec dv = sub(s.v, s.v2);
        double dv_norm = norm2(dv);
        if (dv_norm > 0.0) {
            Vec dg = sub(oracle.grad_g_v(s.omega, s.v), oracle.grad_g_v(s.omega, s.v2));
            lower_sc.feed(dot(dg, dv), constants.mu_g * dv_norm * dv_norm);
            lower_lip.feed(norm2(dg), constants.L_g * dv_norm);
            hyper_v.feed(norm2(sub(approx_grad(oracle, s.omega, s.v), approx_grad(oracle, s.omega, s.v2))),
                         constants.H_v * dv_norm);
        }

        Vec dw = sub(s.omega, s.omega2);
        double dw_norm = norm2(dw);
        if (dw_norm > 0.0) {
            hyper_omega.feed(
                norm2(sub(approx_grad(oracle, s.omega, s.v), approx_grad(oracle, s.omega2, s.v))),
                constants.H_omega * dw_norm);
            if (has_truth) {
                const GroundTruth& gt = *oracle.ground_truth;
                Vec dstar = sub(approx_grad(oracle, s.omega, gt.v_star(s.omega)),
                                approx_grad(oracle, s.omega2, gt.v_star(s.omega2)));
                reduced_sc.feed(dot(dstar, dw), constants.mu_f * dw_norm * dw_norm);
            }
        }

        cross.feed(spectral_norm(oracle.hess_g_omega_v(s.omega, s.v)), constants.H);
    }

    ValidationReport report;
    report.checks.push_back(lower_sc.finish("lower_strong_convexity"));
    report.checks.push_back(lower_lip.finish("lower_gradient_lipschitz"));
    report.checks.push_back(hyper_omega.finish("hypergradient_omega_lipschitz"));
    report.checks.push_back(hyper_v.finish("hypergradient_v_lipschitz"));
    report.checks.push_back(cross.finish("cross_hessian_bound"));
    report.checks.push_back(reduced_sc.finish("reduced_strong_convexity"));
    for (const AssumptionCheck& c : report.checks) report.pass = report.pass && c.pass;
    return report;
}

} // namespace bicert
