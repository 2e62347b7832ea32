#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bicert/linalg.hpp"

namespace bicert {

// Closed-form knowledge about an instance: the lower-level solution map,
// the upper minimizer (when known), and the reduced objective.
struct GroundTruth {
    std::function<Vec(const Vec&)> v_star;
    std::optional<Vec> omega_star;
    std::function<double(const Vec&)> f_star;
};

// Black-box bilevel problem. Upper objective f(omega, v), lower objective
// g(omega, v); the solver only ever sees these callbacks.
//   hess_g_vv(omega, v):       n x n, second derivatives of g in v.
//   hess_g_omega_v(omega, v):  m x n, entry (i, j) = d^2 g / d omega_i d v_j.
struct BilevelOracle {
    int m = 0;
    int n = 0;
    std::function<Vec(const Vec&, const Vec&)> grad_f_omega;
    std::function<Vec(const Vec&, const Vec&)> grad_f_v;
    std::function<Vec(const Vec&, const Vec&)> grad_g_v;
    std::function<DenseMatrix(const Vec&, const Vec&)> hess_g_vv;
    std::function<DenseMatrix(const Vec&, const Vec&)> hess_g_omega_v;
    std::optional<GroundTruth> ground_truth;
};

// Regularity constants the certificate machinery consumes.
//   mu_f:    strong convexity of the reduced upper objective.
//   mu_g:    strong convexity of g(omega, .).
//   L_g:     Lipschitz constant of grad_g_v in v.
//   H_omega: Lipschitz constant of the approximate gradient in omega.
//   H_v:     Lipschitz constant of the approximate gradient in v.
//   H:       strict upper bound on |hess_g_omega_v|_2.
struct ProblemConstants {
    double mu_f = 0.0;
    double mu_g = 0.0;
    double L_g = 0.0;
    double H_omega = 0.0;
    double H_v = 0.0;
    double H = 0.0;
};

// Two evaluation points per sample: (omega, v) and (omega2, v2). Each
// assumption check uses the pair along the coordinate it varies.
struct SamplePair {
    Vec omega;
    Vec v;
    Vec omega2;
    Vec v2;
};

struct AssumptionCheck {
    std::string name;
    bool pass = true;
    // Worst observed / claimed ratio: minimum over samples for lower bounds,
    // maximum for upper bounds. 0 when every sample was vacuous.
    double worst_ratio = 0.0;
    int samples_used = 0;
};

struct ValidationReport {
    std::vector<AssumptionCheck> checks;
    bool pass = true;
};

using ApproxGradFn = std::function<Vec(const BilevelOracle&, const Vec&, const Vec&)>;

// Samples each assumption inequality at the given point pairs and reports
// whether the claimed constants survive. A falsification tool, not a proof:
// passing means no sampled counterexample. The reduced strong convexity
// check (mu_f) runs only when ground truth is attached to the oracle.
ValidationReport validate_constants(const BilevelOracle& oracle, const ProblemConstants& constants,
                                    const std::vector<SamplePair>& samples,
                                    const ApproxGradFn& approx_grad);

} // namespace bicert
