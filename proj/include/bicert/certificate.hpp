#pragma once

#include <string>
#include <utility>
#include <vector>

#include "bicert/problem.hpp"

namespace bicert {

enum class StepBound { Alpha, Beta, Ratio };

std::string to_string(StepBound bound);

// One or more step-size bounds are violated; `violated` lists which.
struct StepSizeInfeasible : Error {
    explicit StepSizeInfeasible(std::vector<StepBound> bounds);
    std::vector<StepBound> violated;
};

// The explicit multiplier construction failed one of its inequalities.
// `condition` names it: a_positive, b_positive, channel1_sector_gap,
// channel2_sector_gap, or cross_coupling_budget.
struct MultiplierInfeasible : Error {
    explicit MultiplierInfeasible(std::string name)
        : Error("multiplier construction failed condition: " + name), condition(std::move(name)) {}
    std::string condition;
};

// The congruence transform needs 3*l1^2/(4*l3) > a and l2^2/(4*l4) > b for
// real square roots; one of them failed.
struct TransformInfeasible : Error {
    explicit TransformInfeasible(const std::string& what) : Error(what) {}
};

// A scaled first-order channel has its pole on or outside the circle of
// radius rho, so its H-infinity norm is unbounded.
struct UnstableScaledSystem : Error {
    explicit UnstableScaledSystem(const std::string& what) : Error(what) {}
};

struct StepSizeBounds {
    double alpha_max = 0.0;
    double beta_max = 0.0;
    double ratio_max = 0.0;  // bound on alpha / beta^2; +inf when H_v * H == 0
};

// Step-size region in which the certificate machinery applies:
//   alpha_max = min(mu_f / (8 (H_omega^2 + 2 H_v^2 H^2 / mu_g^2)), 1 / (24 mu_f))
//   beta_max  = min(mu_g / (8 L_g^2), 1 / (4 mu_g))
//   ratio_max = 2 mu_f mu_g^4 / (81 H_v^2 H^2).
StepSizeBounds max_step_sizes(const ProblemConstants& constants);

// Which bounds (alpha, beta, alpha/beta^2) the pair violates; empty means
// strictly inside the region. "Strictly inside" means <= (1 - 1e-12) times
// the bound, so downstream square roots stay away from zero.
std::vector<StepBound> violated_bounds(const ProblemConstants& constants, double alpha, double beta);

// Guaranteed contraction rate for feasible step sizes:
//   max( sqrt(1 - (3 mu_f a/4)(1 - 8 (H_omega^2 + 2 H_v^2 H^2/mu_g^2) a / mu_f)),
//        sqrt(1 - (mu_g b/2)(1 - 4 L_g^2 b)) )  with a = alpha, b = beta.
// Throws StepSizeInfeasible outside the region.
double certified_rate(const ProblemConstants& constants, double alpha, double beta);

// Multipliers of the weighted sector inequalities and the derived
// quadratic-form coefficients
//   a = (3 mu_f/8) l1 - 2 (H_omega^2 + 2 H_v^2 H^2/mu_g^2) l3
//   b = -(2 H_v^2/mu_f) l1 + (3 mu_g/8) l2 - 4 H_v^2 l3 - 2 L_g^2 l4.
struct Multipliers {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double lambda3 = 0.0;
    double lambda4 = 0.0;
    double a = 0.0;
    double b = 0.0;
};

// Explicit construction: lambda2 = 1, lambda4 = beta/2,
// lambda1 = (mu_g/8) / (2 H_v^2/mu_f + 6 H_v^2 alpha) for coupled problems,
// lambda3 = 3 alpha lambda1 / 2. For H_v = 0 the ratio formula degenerates;
// lambda1 is then chosen as max(1, budget/alpha) which keeps the cross
// coupling condition true by construction. All five feasibility conditions
// are checked before returning.
Multipliers construct_multipliers(const ProblemConstants& constants, double alpha, double beta);

// Quadratic form N0 (in the stacked state [x1 x2 u1 u2]) and the congruence
// M with M' N0 M = diag(-I_{m+n}, I_{m+n}); the identity is verified to
// 1e-9 in max norm before returning.
std::pair<DenseMatrix, DenseMatrix> build_transform(const Multipliers& mult, int m, int n);

// H-infinity norm of the rho-scaled scalar channel c / (rho z - p) on the
// unit circle: |c| / (rho - |p|). Requires rho in (0, 1] and |p| < rho.
double hinf_first_order(double gain_c, double pole_p, double rho);

struct ChannelGains {
    double gain_omega = 0.0;
    double pole_omega = 0.0;
    double gain_v = 0.0;
    double pole_v = 0.0;
};

// The two diagonal first-order channels of the transformed error dynamics:
//   omega channel: pole 1 - 3 l1 alpha / (2 l3), gain alpha sqrt(9 l1^2/(4 l3^2) - 3a/l3)
//   v channel:     pole 1 - l2 beta / (2 l4),    gain beta  sqrt(l2^2/(4 l4^2) - b/l4).
ChannelGains scaled_plant_channels(const Multipliers& mult, double alpha, double beta);

struct RateCertificate {
    double alpha = 0.0;
    double beta = 0.0;
    Multipliers multipliers;
    double rho = 0.0;
    double gain_plant = 0.0;          // H-infinity norm of the scaled plant
    double gain_map_bound = 1.0;      // sector bound on the nonlinear map
    bool feasible = false;
    std::vector<std::string> violated_conditions;
};

// Full verdict at a candidate rate rho: constructs multipliers, builds the
// transform, computes both channel norms, and declares feasibility when
// gain_plant * gain_map_bound < 1. Sub-operation failures produce an
// infeasible certificate with violated_conditions filled in, not a throw.
RateCertificate small_gain_verdict(const ProblemConstants& constants, double alpha, double beta,
                                   double rho);

// Smallest rho in (0, 1] at which the verdict is feasible, by bisection to
// the given tolerance (at most 60 halvings).
double min_certifiable_rho(const ProblemConstants& constants, double alpha, double beta,
                           double tol = 1e-6);

// Default step sizes: half of each bound, then halve alpha until the ratio
// constraint holds.
std::pair<double, double> auto_step_sizes(const ProblemConstants& constants);

} // namespace bicert
