#pragma once

#include "bicert/certificate.hpp"
#include "bicert/solver.hpp"

namespace bicert {

// Error-dynamics coordinates of one iterate:
//   x1 = omega_k - omega_star
//   x2 = v_k - v_star(omega_k)
//   u1 = approximate gradient at (omega_k, v_k)
//   u2 = grad_g_v(omega_k, v_k) + (1/beta)(v_star(omega_{k+1}) - v_star(omega_k))
// where omega_{k+1} = omega_k - alpha * u1. In these coordinates the
// single-loop update is exactly x_{k+1} = x_k - diag(alpha I, beta I) u_k.
struct SystemState {
    Vec x1;
    Vec x2;
    Vec u1;
    Vec u2;
};

// Computes the coordinates above and verifies the compact-dynamics identity
// against one simulated solver step, to 1e-10 relative. Needs ground truth.
SystemState state_transform(const BilevelOracle& oracle, const SolverConfig& config,
                            const Vec& omega_k, const Vec& v_k);

struct CheckResult {
    std::string name;
    double min_margin = 0.0;
    long argmin_step = 0;
    bool pass = true;
};

struct AuditReport {
    std::vector<CheckResult> checks;  // six, in fixed order
    bool pass = true;
    long first_violation_step = -1;
    // Residual of reassembling the combined quadratic form from the four
    // weighted sector margins; internal consistency of the assembly.
    double max_decomposition_error = 0.0;
    // Difference between the combined-form margin and the normalized-gain
    // margin, which coincide when the congruence identity holds.
    double max_implication_gap = 0.0;
};

// Evaluates, at every step of a stride-1 trajectory, the margins of the six
// inequalities behind the rate certificate:
//   upper_gradient_alignment   <u1, x1> >= (3 mu_f/8)|x1|^2 - (2 H_v^2/mu_f)|x2|^2
//   upper_gradient_growth      |u1|^2 <= 2 (H_omega^2 + 2 H_v^2 H^2/mu_g^2)|x1|^2 + 4 H_v^2|x2|^2
//   lower_residual_alignment   <u2, x2> >= (3 mu_g/8)|x2|^2 - (2 a^2 H^2/b^2 mu_g^3)|u1|^2
//   lower_residual_growth      |u2|^2 <= 2 L_g^2|x2|^2 + (2 a^2 H^2/b^2 mu_g^2)|u1|^2
//   combined_quadratic_form    [x; u]' N0 [x; u] <= 0
//   normalized_gain            |sigma|^2 <= |xi|^2 for (xi, sigma) = M^{-1} (x, u)
// (a = alpha, b = beta in the coefficient expressions). Margins are
// left-minus-right, so every check passes when its margin >= -1e-10.
// A violation is recorded, not thrown: it falsifies the supplied constants
// or the implementation, and the report says where.
AuditReport sector_audit(const BilevelOracle& oracle, const ProblemConstants& constants,
                         const SolverConfig& config, const Trajectory& traj);

} // namespace bicert
