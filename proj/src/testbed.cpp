#include "bicert/testbed.hpp"

#include <cmath>
#include <random>

namespace bicert {

namespace {

DenseMatrix scalar_matrix(double value) {
    DenseMatrix m(1, 1);
    m(0, 0) = value;
    return m;
}

DenseMatrix symmetrized(const DenseMatrix& m) {
    DenseMatrix s(m.rows(), m.cols());
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) s(i, j) = 0.5 * (m(i, j) + m(j, i));
    return s;
}

// Random orthonormal matrix: Gram-Schmidt on a seeded Gaussian matrix,
// run twice for orthogonality at machine precision.
DenseMatrix random_rotation(int k, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    DenseMatrix r(k, k);
    for (int j = 0; j < k; ++j) {
        Vec col(k);
        bool ok = false;
        while (!ok) {
            for (int i = 0; i < k; ++i) col[i] = gauss(rng);
            for (int pass = 0; pass < 2; ++pass)
                for (int p = 0; p < j; ++p) {
                    double proj = 0.0;
                    for (int i = 0; i < k; ++i) proj += r(i, p) * col[i];
                    for (int i = 0; i < k; ++i) col[i] -= proj * r(i, p);
                }
            double nc = norm2(col);
            if (nc > 1e-8) {
                col = scale(1.0 / nc, col);
                ok = true;
            }
        }
        for (int i = 0; i < k; ++i) r(i, j) = col[i];
    }
    return r;
}

// SPD matrix with eigenvalues evenly spaced in [1, cond].
DenseMatrix random_spd(int k, double cond, std::mt19937_64& rng) {
    DenseMatrix r = random_rotation(k, rng);
    DenseMatrix d(k, k);
    for (int i = 0; i < k; ++i) d(i, i) = (k == 1) ? 1.0 : 1.0 + (cond - 1.0) * i / (k - 1);
    return symmetrized(r.transpose() * d * r);
}

void check_instance(const QuadraticInstance& inst) {
    if (inst.m < 1 || inst.n < 1) throw InputError("instance: dimensions must be positive");
    if (inst.A.rows() != inst.m || inst.A.cols() != inst.m || inst.B.rows() != inst.n ||
        inst.B.cols() != inst.n || inst.Q.rows() != inst.n || inst.Q.cols() != inst.n ||
        inst.C.rows() != inst.n || inst.C.cols() != inst.m || static_cast<int>(inst.d.size()) != inst.n)
        throw InputError("instance: matrix shapes do not match (m, n)");
    if (!inst.A.all_finite() || !inst.B.all_finite() || !inst.C.all_finite() ||
        !inst.Q.all_finite() || !all_finite(inst.d))
        throw InputError("instance: non-finite entries");
}

void require_size(const Vec& x, int want, const char* what) {
    if (static_cast<int>(x.size()) != want) throw InputError(std::string(what) + ": wrong size");
}

} // namespace

QuadraticInstance ref0() {
    QuadraticInstance inst;
    inst.m = 1;
    inst.n = 1;
    inst.A = scalar_matrix(1.0);
    inst.B = scalar_matrix(1.0);
    inst.C = scalar_matrix(0.0);
    inst.Q = scalar_matrix(1.0);
    inst.d = {0.0};
    return inst;
}

QuadraticInstance ref1() {
    QuadraticInstance inst;
    inst.m = 1;
    inst.n = 1;
    inst.A = scalar_matrix(1.0);
    inst.B = scalar_matrix(1.0);
    inst.C = scalar_matrix(1.0);
    inst.Q = scalar_matrix(2.0);
    inst.d = {4.0};
    return inst;
}

QuadraticInstance make_instance(int m, int n, std::uint64_t seed, double cond_target) {
    if (m < 1 || n < 1) throw InputError("make_instance: dimensions must be positive");
    if (!(cond_target >= 1.0)) throw InputError("make_instance: cond_target must be >= 1");
    std::mt19937_64 rng(seed);
    QuadraticInstance inst;
    inst.m = m;
    inst.n = n;
    inst.A = random_spd(m, cond_target, rng);
    inst.B = random_spd(n, cond_target, rng);
    inst.Q = random_spd(n, cond_target, rng);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    inst.C = DenseMatrix(n, m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) inst.C(i, j) = uni(rng);
    inst.d.resize(n);
    for (int i = 0; i < n; ++i) inst.d[i] = uni(rng);
    return inst;
}

ProblemConstants derive_constants(const QuadraticInstance& inst) {
    check_instance(inst);
    EigExtremes q_eigs = sym_eig_extremes(inst.Q);
    if (!(q_eigs.min > 0.0)) throw InputError("derive_constants: Q is not positive definite");
    DenseMatrix ct = inst.C.transpose();
    ProblemConstants c;
    c.mu_g = q_eigs.min;
    c.L_g = q_eigs.max;
    c.H = spectral_norm(ct * inst.Q) * (1.0 + 1e-9);
    c.H_omega = spectral_norm(inst.A);
    c.H_v = spectral_norm(ct * inst.B);
    c.mu_f = sym_eig_extremes(symmetrized(inst.A + ct * inst.B * inst.C)).min;
    return c;
}

Vec omega_star(const QuadraticInstance& inst) {
    check_instance(inst);
    DenseMatrix ct_b = inst.C.transpose() * inst.B;
    DenseMatrix reduced_hessian = symmetrized(inst.A + ct_b * inst.C);
    return spd_solve(reduced_hessian, ct_b.matvec(inst.d));
}

GroundTruth ground_truth(const QuadraticInstance& inst) {
    check_instance(inst);
    GroundTruth gt;
    gt.omega_star = omega_star(inst);
    gt.v_star = [inst](const Vec& omega) {
        require_size(omega, inst.m, "v_star");
        return inst.C.matvec(omega);
    };
    gt.f_star = [inst](const Vec& omega) {
        require_size(omega, inst.m, "f_star");
        Vec residual = sub(inst.C.matvec(omega), inst.d);
        return 0.5 * dot(omega, inst.A.matvec(omega)) + 0.5 * dot(residual, inst.B.matvec(residual));
    };
    return gt;
}

BilevelOracle as_oracle(const QuadraticInstance& inst) {
    check_instance(inst);
    DenseMatrix neg_ct_q = (inst.C.transpose() * inst.Q).scaled(-1.0);
    BilevelOracle oracle;
    oracle.m = inst.m;
    oracle.n = inst.n;
    oracle.grad_f_omega = [inst](const Vec& omega, const Vec& v) {
        require_size(omega, inst.m, "grad_f_omega");
        require_size(v, inst.n, "grad_f_omega");
        return inst.A.matvec(omega);
    };
    oracle.grad_f_v = [inst](const Vec& omega, const Vec& v) {
        require_size(omega, inst.m, "grad_f_v");
        require_size(v, inst.n, "grad_f_v");
        return inst.B.matvec(sub(v, inst.d));
    };
    oracle.grad_g_v = [inst](const Vec& omega, const Vec& v) {
        require_size(omega, inst.m, "grad_g_v");
        require_size(v, inst.n, "grad_g_v");
        return inst.Q.matvec(sub(v, inst.C.matvec(omega)));
    };
    oracle.hess_g_vv = [inst](const Vec& omega, const Vec& v) {
        require_size(omega, inst.m, "hess_g_vv");
        require_size(v, inst.n, "hess_g_vv");
        return inst.Q;
    };
    oracle.hess_g_omega_v = [inst, neg_ct_q](const Vec& omega, const Vec& v) {
        require_size(omega, inst.m, "hess_g_omega_v");
        require_size(v, inst.n, "hess_g_omega_v");
        return neg_ct_q;
    };
    oracle.ground_truth = ground_truth(inst);
    return oracle;
}

} // namespace bicert
