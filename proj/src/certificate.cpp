#include "bicert/certificate.hpp"

#include <cmath>
#include <limits>

namespace bicert {

namespace {

constexpr double kInsideMargin = 1.0 - 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

void check_constants(const ProblemConstants& c) {
    if (!(c.mu_f > 0.0) || !(c.mu_g > 0.0) || !(c.L_g > 0.0) || !(c.H_omega > 0.0))
        throw InputError("constants: mu_f, mu_g, L_g, H_omega must be positive");
    if (c.H_v < 0.0 || c.H < 0.0) throw InputError("constants: H_v and H must be nonnegative");
    if (!std::isfinite(c.mu_f) || !std::isfinite(c.mu_g) || !std::isfinite(c.L_g) ||
        !std::isfinite(c.H_omega) || !std::isfinite(c.H_v) || !std::isfinite(c.H))
        throw InputError("constants: values must be finite");
}

// H_omega^2 + 2 H_v^2 H^2 / mu_g^2, the curvature seen by the upper step.
double coupling_curvature(const ProblemConstants& c) {
    return c.H_omega * c.H_omega + 2.0 * c.H_v * c.H_v * c.H * c.H / (c.mu_g * c.mu_g);
}

// Right-hand side of the cross-coupling budget condition
// (2/3) l3 >= (2 a^2 H^2 / b^2 mu_g^3) l2 + (2 a^2 H^2 / b^2 mu_g^2) l4.
double cross_coupling_demand(const ProblemConstants& c, double alpha, double beta, double lambda2,
                             double lambda4) {
    double base = 2.0 * alpha * alpha * c.H * c.H / (beta * beta);
    return base / (c.mu_g * c.mu_g * c.mu_g) * lambda2 + base / (c.mu_g * c.mu_g) * lambda4;
}

std::string violated_message(const std::vector<StepBound>& bounds) {
    std::string msg = "step sizes outside the certified region:";
    for (StepBound b : bounds) msg += " " + to_string(b);
    return msg;
}

} // namespace

std::string to_string(StepBound bound) {
    switch (bound) {
        case StepBound::Alpha: return "alpha_bound";
        case StepBound::Beta: return "beta_bound";
        case StepBound::Ratio: return "ratio_bound";
    }
    return "unknown_bound";
}

StepSizeInfeasible::StepSizeInfeasible(std::vector<StepBound> bounds)
    : Error(violated_message(bounds)), violated(std::move(bounds)) {}

StepSizeBounds max_step_sizes(const ProblemConstants& constants) {
    check_constants(constants);
    StepSizeBounds b;
    b.alpha_max = std::min(constants.mu_f / (8.0 * coupling_curvature(constants)),
                           1.0 / (24.0 * constants.mu_f));
    b.beta_max = std::min(constants.mu_g / (8.0 * constants.L_g * constants.L_g),
                          1.0 / (4.0 * constants.mu_g));
    double coupling = constants.H_v * constants.H;
    b.ratio_max = coupling == 0.0 ? kInf
                                  : 2.0 * constants.mu_f * std::pow(constants.mu_g, 4) /
                                        (81.0 * coupling * coupling);
    return b;
}

std::vector<StepBound> violated_bounds(const ProblemConstants& constants, double alpha, double beta) {
    if (!(alpha > 0.0) || !std::isfinite(alpha) || !(beta > 0.0) || !std::isfinite(beta))
        throw InputError("violated_bounds: step sizes must be positive and finite");
    StepSizeBounds bounds = max_step_sizes(constants);
    std::vector<StepBound> out;
    if (alpha > kInsideMargin * bounds.alpha_max) out.push_back(StepBound::Alpha);
    if (beta > kInsideMargin * bounds.beta_max) out.push_back(StepBound::Beta);
    if (std::isfinite(bounds.ratio_max) && alpha / (beta * beta) > kInsideMargin * bounds.ratio_max)
        out.push_back(StepBound::Ratio);
    return out;
}

double certified_rate(const ProblemConstants& constants, double alpha, double beta) {
    std::vector<StepBound> bad = violated_bounds(constants, alpha, beta);
    if (!bad.empty()) throw StepSizeInfeasible(std::move(bad));
    double rho1_sq =
        1.0 - (3.0 * constants.mu_f * alpha / 4.0) *
                  (1.0 - 8.0 * coupling_curvature(constants) * alpha / constants.mu_f);
    double rho2_sq =
        1.0 - (constants.mu_g * beta / 2.0) * (1.0 - 4.0 * constants.L_g * constants.L_g * beta);
    double rho = std::sqrt(std::max(rho1_sq, rho2_sq));
    if (!(rho > 0.0 && rho < 1.0))
        throw Error("certified_rate: rate " + std::to_string(rho) + " is outside (0, 1)");
    return rho;
}

Multipliers construct_multipliers(const ProblemConstants& constants, double alpha, double beta) {
    std::vector<StepBound> bad = violated_bounds(constants, alpha, beta);
    if (!bad.empty()) throw StepSizeInfeasible(std::move(bad));
    Multipliers mult;
    mult.lambda2 = 1.0;
    mult.lambda4 = beta * mult.lambda2 / 2.0;
    if (constants.H_v > 0.0) {
        mult.lambda1 = (constants.mu_g / 8.0) /
                       (2.0 * constants.H_v * constants.H_v / constants.mu_f +
                        6.0 * constants.H_v * constants.H_v * alpha);
    } else {
        // Decoupled hypergradient: the ratio assignment degenerates. Any
        // lambda1 large enough to cover the cross-coupling budget works;
        // 1 is kept when the budget is slack so the decoupled case stays
        // at the documented unit multiplier.
        double demand = cross_coupling_demand(constants, alpha, beta, mult.lambda2, mult.lambda4);
        mult.lambda1 = std::max(1.0, demand / alpha);
    }
    mult.lambda3 = 3.0 * alpha * mult.lambda1 / 2.0;
    mult.a = (3.0 * constants.mu_f / 8.0) * mult.lambda1 -
             2.0 * coupling_curvature(constants) * mult.lambda3;
    mult.b = -(2.0 * constants.H_v * constants.H_v / constants.mu_f) * mult.lambda1 +
             (3.0 * constants.mu_g / 8.0) * mult.lambda2 -
             4.0 * constants.H_v * constants.H_v * mult.lambda3 -
             2.0 * constants.L_g * constants.L_g * mult.lambda4;
    if (!(mult.a > 0.0)) throw MultiplierInfeasible("a_positive");
    if (!(mult.b > 0.0)) throw MultiplierInfeasible("b_positive");
    if (!(3.0 * mult.lambda1 * mult.lambda1 / (4.0 * mult.lambda3) > mult.a))
        throw MultiplierInfeasible("channel1_sector_gap");
    if (!(mult.lambda2 * mult.lambda2 / (4.0 * mult.lambda4) > mult.b))
        throw MultiplierInfeasible("channel2_sector_gap");
    double demand = cross_coupling_demand(constants, alpha, beta, mult.lambda2, mult.lambda4);
    if (!(2.0 / 3.0 * mult.lambda3 >= demand)) throw MultiplierInfeasible("cross_coupling_budget");
    return mult;
}

std::pair<DenseMatrix, DenseMatrix> build_transform(const Multipliers& mult, int m, int n) {
    if (m < 1 || n < 1) throw InputError("build_transform: dimensions must be positive");
    double gap1 = 3.0 * mult.lambda1 * mult.lambda1 / (4.0 * mult.lambda3) - mult.a;
    double gap2 = mult.lambda2 * mult.lambda2 / (4.0 * mult.lambda4) - mult.b;
    if (!(gap1 > 0.0)) throw TransformInfeasible("build_transform: omega-channel sector gap not positive");
    if (!(gap2 > 0.0)) throw TransformInfeasible("build_transform: v-channel sector gap not positive");

    int dim = 2 * (m + n);
    int x1 = 0, x2 = m, u1 = m + n, u2 = 2 * m + n;  // block offsets
    DenseMatrix n0(dim, dim);
    for (int i = 0; i < m; ++i) {
        n0(x1 + i, x1 + i) = mult.a;
        n0(u1 + i, u1 + i) = mult.lambda3 / 3.0;
        n0(x1 + i, u1 + i) = -mult.lambda1 / 2.0;
        n0(u1 + i, x1 + i) = -mult.lambda1 / 2.0;
    }
    for (int i = 0; i < n; ++i) {
        n0(x2 + i, x2 + i) = mult.b;
        n0(u2 + i, u2 + i) = mult.lambda4;
        n0(x2 + i, u2 + i) = -mult.lambda2 / 2.0;
        n0(u2 + i, x2 + i) = -mult.lambda2 / 2.0;
    }

    double p1 = 1.0 / std::sqrt(gap1);
    double p2 = 1.0 / std::sqrt(gap2);
    double q1 = 3.0 * mult.lambda1 / (2.0 * mult.lambda3) * p1;
    double q2 = mult.lambda2 / (2.0 * mult.lambda4) * p2;
    double r1 = std::sqrt(3.0 / mult.lambda3);
    double r2 = 1.0 / std::sqrt(mult.lambda4);
    DenseMatrix t(dim, dim);
    for (int i = 0; i < m; ++i) {
        t(x1 + i, x1 + i) = p1;
        t(u1 + i, x1 + i) = q1;
        t(u1 + i, u1 + i) = r1;
    }
    for (int i = 0; i < n; ++i) {
        t(x2 + i, x2 + i) = p2;
        t(u2 + i, x2 + i) = q2;
        t(u2 + i, u2 + i) = r2;
    }

    DenseMatrix check = t.transpose() * n0 * t;
    for (int i = 0; i < dim; ++i) check(i, i) -= (i < m + n) ? -1.0 : 1.0;
    if (check.max_abs() > 1e-9)
        throw Error("build_transform: congruence identity residual " +
                    std::to_string(check.max_abs()) + " exceeds 1e-9");
    return {n0, t};
}

double hinf_first_order(double gain_c, double pole_p, double rho) {
    if (!(rho > 0.0 && rho <= 1.0)) throw InputError("hinf_first_order: rho must be in (0, 1]");
    if (!std::isfinite(gain_c) || !std::isfinite(pole_p))
        throw InputError("hinf_first_order: gain and pole must be finite");
    if (std::abs(pole_p) >= rho)
        throw UnstableScaledSystem("hinf_first_order: pole magnitude " +
                                   std::to_string(std::abs(pole_p)) + " not inside radius " +
                                   std::to_string(rho));
    // |c| / |rho z - p| over |z| = 1 peaks where the denominator is
    // smallest, at z = sign(p), giving rho - |p|.
    return std::abs(gain_c) / (rho - std::abs(pole_p));
}

ChannelGains scaled_plant_channels(const Multipliers& mult, double alpha, double beta) {
    double gap1 = 3.0 * mult.lambda1 * mult.lambda1 / (4.0 * mult.lambda3) - mult.a;
    double gap2 = mult.lambda2 * mult.lambda2 / (4.0 * mult.lambda4) - mult.b;
    if (!(gap1 > 0.0) || !(gap2 > 0.0))
        throw TransformInfeasible("scaled_plant_channels: sector gaps must be positive");
    ChannelGains ch;
    ch.pole_omega = 1.0 - 3.0 * mult.lambda1 * alpha / (2.0 * mult.lambda3);
    ch.pole_v = 1.0 - mult.lambda2 * beta / (2.0 * mult.lambda4);
    ch.gain_omega = alpha * std::sqrt(3.0 / mult.lambda3 * gap1);
    ch.gain_v = beta * std::sqrt(gap2 / mult.lambda4);
    return ch;
}

RateCertificate small_gain_verdict(const ProblemConstants& constants, double alpha, double beta,
                                   double rho) {
    if (!(rho > 0.0) || !std::isfinite(rho)) throw InputError("small_gain_verdict: rho must be positive");
    RateCertificate cert;
    cert.alpha = alpha;
    cert.beta = beta;
    cert.rho = rho;
    cert.gain_plant = kNan;
    cert.gain_map_bound = 1.0;
    cert.feasible = false;

    std::vector<StepBound> bad = violated_bounds(constants, alpha, beta);
    if (!bad.empty()) {
        for (StepBound b : bad) cert.violated_conditions.push_back(to_string(b));
        return cert;
    }
    if (rho > 1.0) {
        cert.violated_conditions.push_back("rho_range");
        return cert;
    }
    try {
        cert.multipliers = construct_multipliers(constants, alpha, beta);
    } catch (const MultiplierInfeasible& e) {
        cert.violated_conditions.push_back(e.condition);
        return cert;
    }
    ChannelGains ch;
    try {
        ch = scaled_plant_channels(cert.multipliers, alpha, beta);
    } catch (const TransformInfeasible&) {
        cert.violated_conditions.push_back("channel_sector_gap");
        return cert;
    }
    try {
        double h_omega = hinf_first_order(ch.gain_omega, ch.pole_omega, rho);
        double h_v = hinf_first_order(ch.gain_v, ch.pole_v, rho);
        cert.gain_plant = std::max(h_omega, h_v);
    } catch (const UnstableScaledSystem&) {
        cert.violated_conditions.push_back("scaled_plant_unstable");
        return cert;
    }
    if (cert.gain_plant * cert.gain_map_bound < 1.0) {
        cert.feasible = true;
    } else {
        cert.violated_conditions.push_back("gain_product");
    }
    return cert;
}

double min_certifiable_rho(const ProblemConstants& constants, double alpha, double beta, double tol) {
    if (!(tol > 0.0)) throw InputError("min_certifiable_rho: tol must be positive");
    if (!small_gain_verdict(constants, alpha, beta, 1.0).feasible) {
        std::vector<StepBound> bad = violated_bounds(constants, alpha, beta);
        if (!bad.empty()) throw StepSizeInfeasible(std::move(bad));
        throw Error("min_certifiable_rho: verdict infeasible even at rho = 1");
    }
    double lo = 0.0;
    double hi = 1.0;
    for (int it = 0; it < 60 && hi - lo > tol; ++it) {
        double mid = 0.5 * (lo + hi);
        if (small_gain_verdict(constants, alpha, beta, mid).feasible)
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

std::pair<double, double> auto_step_sizes(const ProblemConstants& constants) {
    StepSizeBounds bounds = max_step_sizes(constants);
    double beta = bounds.beta_max / 2.0;
    double alpha = bounds.alpha_max / 2.0;
    for (int halvings = 0; halvings < 2000; ++halvings) {
        std::vector<StepBound> bad = violated_bounds(constants, alpha, beta);
        if (bad.empty()) return {alpha, beta};
        alpha /= 2.0;
    }
    throw Error("auto_step_sizes: could not satisfy the ratio bound by halving alpha");
}

} // namespace bicert
