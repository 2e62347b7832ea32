#pragma once

#include "bicert/problem.hpp"

namespace bicert {

struct SolverConfig {
    double alpha = 0.0;        // upper step size
    double beta = 0.0;         // lower step size
    long max_iters = 0;        // number of updates; states 0..max_iters are visited
    double stop_grad_tol = 0.0;  // stop when both gradient norms fall below; 0 disables
    long log_stride = 1;       // log every log_stride-th state (state 0 and the last always)
};

struct EvalCounters {
    long upper_grad = 0;      // approximate-gradient evaluations
    long lower_grad = 0;      // grad_g_v evaluations
    long hessian_solves = 0;  // linear solves against hess_g_vv
};

struct TrajectoryPoint {
    long k = 0;
    Vec omega;
    Vec v;
    double approx_grad_norm = 0.0;
    double lower_grad_norm = 0.0;
    // Distances to ground truth, NaN when the oracle has none:
    // omega_err = |omega_k - omega_star|, v_err = |v_k - v_star(omega_k)|.
    double omega_err = 0.0;
    double v_err = 0.0;
    // Counter totals after evaluating this state.
    long upper_evals = 0;
    long lower_evals = 0;
};

enum class RunStatus { ReachedMaxIters, ReachedTolerance, Diverged };

struct Trajectory {
    std::vector<TrajectoryPoint> points;
    RunStatus status = RunStatus::ReachedMaxIters;
    long last_k = 0;  // last evaluated state with finite values
    EvalCounters counters;
};

// An iterate overflowed to inf/NaN. Carries the trajectory logged up to the
// last finite state so callers can still report the run.
struct DivergenceDetected : Error {
    DivergenceDetected(long k, Trajectory traj)
        : Error("divergence detected: iterate became non-finite after state " + std::to_string(k)),
          last_finite_k(k),
          partial(std::move(traj)) {}
    long last_finite_k;
    Trajectory partial;
};

// The inner loop of the double-loop baseline hit its iteration cap.
struct InnerStall : Error {
    explicit InnerStall(const std::string& what) : Error(what) {}
};

// The error sequence never left its first decade, so no rate can be fitted.
struct InsufficientDecay : Error {
    explicit InsufficientDecay(const std::string& what) : Error(what) {}
};

// Approximate (hyper)gradient at (omega, v):
//   grad_f_omega - hess_g_omega_v * [hess_g_vv]^{-1} grad_f_v,
// with exactly one SPD solve per call. Increments counters when provided.
Vec approx_gradient(const BilevelOracle& oracle, const Vec& omega, const Vec& v,
                    EvalCounters* counters = nullptr);

// Relative error between approx_gradient at (omega, v_star(omega)) and the
// central finite difference of f_star, measured against 1 + |finite diff|.
double hypergradient_consistency(const BilevelOracle& oracle, const Vec& omega, double h);

// Simultaneous single-loop run: both updates read the same state,
//   omega_{k+1} = omega_k - alpha * approx_gradient(omega_k, v_k)
//   v_{k+1}     = v_k - beta * grad_g_v(omega_k, v_k).
// Throws DivergenceDetected when an iterate stops being finite.
Trajectory single_loop_run(const BilevelOracle& oracle, const SolverConfig& config, Vec omega0,
                           Vec v0);

// Double-loop baseline: each outer step first runs gradient descent on
// g(omega_k, .) with step beta until |grad_g_v| <= inner_tol (at least one
// evaluation per outer step), then takes one upper step. Logged rows hold
// the state after the inner loop, before the upper update.
Trajectory double_loop_run(const BilevelOracle& oracle, const SolverConfig& config, double inner_tol,
                           Vec omega0, Vec v0, long inner_cap = 1000000);

struct RateFit {
    double rho_hat = 0.0;
    long k_start = 0;
    long k_end = 0;
    int points_used = 0;
};

// Least-squares slope of log(e_k) against k with e_k = omega_err + v_err,
// restricted to the window e_k in [1e-10, e_0 / 10] that excludes the
// transient and the arithmetic floor. Returns exp(slope).
RateFit fit_rate(const Trajectory& traj);

} // namespace bicert
