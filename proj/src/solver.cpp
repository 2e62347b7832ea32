#include "bicert/solver.hpp"

#include <cmath>
#include <limits>

namespace bicert {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

void check_config(const SolverConfig& config) {
    if (!(config.alpha > 0.0) || !std::isfinite(config.alpha) || !(config.beta > 0.0) ||
        !std::isfinite(config.beta))
        throw InputError("solver: step sizes must be positive and finite");
    if (config.max_iters < 1) throw InputError("solver: max_iters must be positive");
    if (config.stop_grad_tol < 0.0) throw InputError("solver: stop_grad_tol must be nonnegative");
    if (config.log_stride < 1) throw InputError("solver: log_stride must be positive");
}

void check_start(const BilevelOracle& oracle, const Vec& omega0, const Vec& v0) {
    if (static_cast<int>(omega0.size()) != oracle.m || static_cast<int>(v0.size()) != oracle.n)
        throw InputError("solver: start point dimensions do not match oracle");
    if (!all_finite(omega0) || !all_finite(v0)) throw InputError("solver: start point not finite");
}

// Appends a logged row for state k. Ground-truth errors are NaN for
// black-box oracles.
void log_point(Trajectory& traj, const BilevelOracle& oracle, long k, const Vec& omega, const Vec& v,
               double approx_grad_norm, double lower_grad_norm) {
    TrajectoryPoint pt;
    pt.k = k;
    pt.omega = omega;
    pt.v = v;
    pt.approx_grad_norm = approx_grad_norm;
    pt.lower_grad_norm = lower_grad_norm;
    if (oracle.ground_truth.has_value() && oracle.ground_truth->v_star &&
        oracle.ground_truth->omega_star.has_value()) {
        pt.omega_err = norm2(sub(omega, *oracle.ground_truth->omega_star));
        pt.v_err = norm2(sub(v, oracle.ground_truth->v_star(omega)));
    } else {
        pt.omega_err = kNan;
        pt.v_err = kNan;
    }
    pt.upper_evals = traj.counters.upper_grad;
    pt.lower_evals = traj.counters.lower_grad;
    traj.points.push_back(std::move(pt));
}

} // namespace

Vec approx_gradient(const BilevelOracle& oracle, const Vec& omega, const Vec& v,
                    EvalCounters* counters) {
    if (static_cast<int>(omega.size()) != oracle.m || static_cast<int>(v.size()) != oracle.n)
        throw InputError("approx_gradient: dimensions do not match oracle");
    Vec rhs = oracle.grad_f_v(omega, v);
    Vec solved = spd_solve(oracle.hess_g_vv(omega, v), rhs);
    DenseMatrix mixed = oracle.hess_g_omega_v(omega, v);
    if (mixed.rows() != oracle.m || mixed.cols() != oracle.n)
        throw InputError("approx_gradient: hess_g_omega_v has wrong shape");
    Vec result = sub(oracle.grad_f_omega(omega, v), mixed.matvec(solved));
    if (counters) {
        counters->upper_grad += 1;
        counters->hessian_solves += 1;
    }
    return result;
}

double hypergradient_consistency(const BilevelOracle& oracle, const Vec& omega, double h) {
    if (!oracle.ground_truth.has_value() || !oracle.ground_truth->v_star ||
        !oracle.ground_truth->f_star)
        throw CapabilityError("hypergradient_consistency: oracle lacks v_star/f_star ground truth");
    Vec at_solution = approx_gradient(oracle, omega, oracle.ground_truth->v_star(omega));
    Vec reference = finite_diff_grad(oracle.ground_truth->f_star, omega, h);
    return norm2(sub(at_solution, reference)) / (1.0 + norm2(reference));
}

Trajectory single_loop_run(const BilevelOracle& oracle, const SolverConfig& config, Vec omega0,
                           Vec v0) {
    check_config(config);
    check_start(oracle, omega0, v0);
    Trajectory traj;
    Vec omega = std::move(omega0);
    Vec v = std::move(v0);
    for (long k = 0;; ++k) {
        bool state_finite = all_finite(omega) && all_finite(v);
        Vec upper, lower;
        if (state_finite) {
            upper = approx_gradient(oracle, omega, v, &traj.counters);
            lower = oracle.grad_g_v(omega, v);
            traj.counters.lower_grad += 1;
            state_finite = all_finite(upper) && all_finite(lower);
        }
        if (!state_finite) {
            traj.status = RunStatus::Diverged;
            throw DivergenceDetected(traj.last_k, std::move(traj));
        }
        double upper_norm = norm2(upper);
        double lower_norm = norm2(lower);
        traj.last_k = k;
        bool hit_tol = config.stop_grad_tol > 0.0 && upper_norm < config.stop_grad_tol &&
                       lower_norm < config.stop_grad_tol;
        bool last = hit_tol || k == config.max_iters;
        if (k % config.log_stride == 0 || last)
            log_point(traj, oracle, k, omega, v, upper_norm, lower_norm);
        if (last) {
            traj.status = hit_tol ? RunStatus::ReachedTolerance : RunStatus::ReachedMaxIters;
            return traj;
        }
        // Simultaneous update: both reads above came from the same state.
        for (int i = 0; i < oracle.m; ++i) omega[i] -= config.alpha * upper[i];
        for (int i = 0; i < oracle.n; ++i) v[i] -= config.beta * lower[i];
    }
}

Trajectory double_loop_run(const BilevelOracle& oracle, const SolverConfig& config, double inner_tol,
                           Vec omega0, Vec v0, long inner_cap) {
    check_config(config);
    check_start(oracle, omega0, v0);
    if (!(inner_tol > 0.0)) throw InputError("double_loop_run: inner_tol must be positive");
    if (inner_cap < 1) throw InputError("double_loop_run: inner_cap must be positive");
    Trajectory traj;
    Vec omega = std::move(omega0);
    Vec v = std::move(v0);
    for (long k = 0;; ++k) {
        double lower_norm = kNan;
        bool state_finite = all_finite(omega) && all_finite(v);
        if (state_finite) {
            long inner = 0;
            for (;; ++inner) {
                if (inner == inner_cap)
                    throw InnerStall("double_loop_run: inner loop exceeded " +
                                     std::to_string(inner_cap) + " iterations at outer step " +
                                     std::to_string(k));
                Vec residual = oracle.grad_g_v(omega, v);
                traj.counters.lower_grad += 1;
                if (!all_finite(residual)) {
                    state_finite = false;
                    break;
                }
                lower_norm = norm2(residual);
                if (lower_norm <= inner_tol) break;
                for (int i = 0; i < oracle.n; ++i) v[i] -= config.beta * residual[i];
                if (!all_finite(v)) {
                    state_finite = false;
                    break;
                }
            }
        }
        Vec upper;
        if (state_finite) {
            upper = approx_gradient(oracle, omega, v, &traj.counters);
            state_finite = all_finite(upper);
        }
        if (!state_finite) {
            traj.status = RunStatus::Diverged;
            throw DivergenceDetected(traj.last_k, std::move(traj));
        }
        double upper_norm = norm2(upper);
        traj.last_k = k;
        bool hit_tol = config.stop_grad_tol > 0.0 && upper_norm < config.stop_grad_tol &&
                       lower_norm < config.stop_grad_tol;
        bool last = hit_tol || k == config.max_iters;
        if (k % config.log_stride == 0 || last)
            log_point(traj, oracle, k, omega, v, upper_norm, lower_norm);
        if (last) {
            traj.status = hit_tol ? RunStatus::ReachedTolerance : RunStatus::ReachedMaxIters;
            return traj;
        }
        for (int i = 0; i < oracle.m; ++i) omega[i] -= config.alpha * upper[i];
    }
}

RateFit fit_rate(const Trajectory& traj) {
    if (traj.points.size() < 50)
        throw InputError("fit_rate: need at least 50 logged steps, have " +
                         std::to_string(traj.points.size()));
    for (const TrajectoryPoint& pt : traj.points)
        if (std::isnan(pt.omega_err) || std::isnan(pt.v_err))
            throw CapabilityError("fit_rate: trajectory lacks ground-truth errors");
    double e0 = traj.points.front().omega_err + traj.points.front().v_err;
    double hi = e0 / 10.0;
    std::vector<const TrajectoryPoint*> window;
    for (const TrajectoryPoint& pt : traj.points) {
        double e = pt.omega_err + pt.v_err;
        if (e >= 1e-10 && e <= hi) window.push_back(&pt);
    }
    if (window.size() < 10)
        throw InsufficientDecay("fit_rate: only " + std::to_string(window.size()) +
                                " points inside the fit window");
    // Plain least squares on (k, log e); centering k keeps the normal
    // equations well conditioned for long runs.
    double k_mean = 0.0, y_mean = 0.0;
    for (const TrajectoryPoint* pt : window) {
        k_mean += static_cast<double>(pt->k);
        y_mean += std::log(pt->omega_err + pt->v_err);
    }
    k_mean /= static_cast<double>(window.size());
    y_mean /= static_cast<double>(window.size());
    double skk = 0.0, sky = 0.0;
    for (const TrajectoryPoint* pt : window) {
        double dk = static_cast<double>(pt->k) - k_mean;
        sky += dk * (std::log(pt->omega_err + pt->v_err) - y_mean);
        skk += dk * dk;
    }
    if (skk == 0.0) throw InsufficientDecay("fit_rate: fit window has a single step index");
    RateFit fit;
    fit.rho_hat = std::exp(sky / skk);
    fit.k_start = window.front()->k;
    fit.k_end = window.back()->k;
    fit.points_used = static_cast<int>(window.size());
    return fit;
}

} // namespace bicert
