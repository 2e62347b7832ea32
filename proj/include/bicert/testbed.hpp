#pragma once

#include <cstdint>

#include "bicert/problem.hpp"

namespace bicert {

// Coupled quadratic bilevel instance:
//   f(omega, v) = 1/2 omega' A omega + 1/2 (v - d)' B (v - d)
//   g(omega, v) = 1/2 (v - C omega)' Q (v - C omega)
// Every regularity constant is an eigenvalue or spectral norm of these
// matrices, the lower solution is v_*(omega) = C omega, and the single-loop
// iteration becomes an affine map whose spectral radius is an independent
// ground-truth convergence rate.
struct QuadraticInstance {
    int m = 0;
    int n = 0;
    DenseMatrix A;  // m x m, SPD
    DenseMatrix B;  // n x n, SPD
    DenseMatrix C;  // n x m
    DenseMatrix Q;  // n x n, SPD
    Vec d;          // n
};

// Fixed fixtures used throughout the tests and the CLI (`--instance ref0|ref1`).
QuadraticInstance ref0();  // decoupled: A=1, B=1, C=0, Q=1, d=0
QuadraticInstance ref1();  // coupled scalar: A=1, B=1, C=1, Q=2, d=4

// Seeded random instance. A, B, Q are rotations of diag(linspace(1, cond))
// so their condition number is cond_target up to rounding; C and d are
// uniform in [-1, 1]. Deterministic per (m, n, seed, cond_target).
QuadraticInstance make_instance(int m, int n, std::uint64_t seed, double cond_target);

// Constants provable for the quadratic family:
//   mu_g = lambda_min(Q), L_g = lambda_max(Q), H = |C'Q|_2 * (1 + 1e-9),
//   H_omega = |A|_2, H_v = |C'B|_2, mu_f = lambda_min(A + C'BC).
// The slack on H keeps the strict bound |hess_g_omega_v|_2 < H true even
// though the mixed Hessian is constant.
ProblemConstants derive_constants(const QuadraticInstance& inst);

// Upper minimizer: omega_star solves (A + C'BC) omega = C'B d.
Vec omega_star(const QuadraticInstance& inst);

// Full ground truth: v_star(omega) = C omega, omega_star above, and the
// reduced objective f_star(omega) = f(omega, C omega).
GroundTruth ground_truth(const QuadraticInstance& inst);

// Wires the closed forms into oracle callbacks and attaches ground truth.
BilevelOracle as_oracle(const QuadraticInstance& inst);

} // namespace bicert
