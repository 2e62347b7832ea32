#include "bicert/linalg.hpp"

#include <cmath>
#include <random>

namespace bicert {

namespace {

constexpr int kCholeskyLimit = 512;
constexpr int kPowerIterationCap = 10000;
constexpr unsigned kPowerIterationSeed = 20240901u;

void require_same_size(const Vec& a, const Vec& b, const char* where) {
    if (a.size() != b.size()) throw InputError(std::string(where) + ": vector size mismatch");
}

} // namespace

double dot(const Vec& a, const Vec& b) {
    require_same_size(a, b, "dot");
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

Vec sub(const Vec& a, const Vec& b) {
    require_same_size(a, b, "sub");
    Vec r(a.size());
    for (size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

Vec add(const Vec& a, const Vec& b) {
    require_same_size(a, b, "add");
    Vec r(a.size());
    for (size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
    return r;
}

Vec scale(double s, const Vec& a) {
    Vec r(a.size());
    for (size_t i = 0; i < a.size(); ++i) r[i] = s * a[i];
    return r;
}

bool all_finite(const Vec& a) {
    for (double x : a)
        if (!std::isfinite(x)) return false;
    return true;
}

DenseMatrix::DenseMatrix(int rows, int cols) : rows_(rows), cols_(cols) {
    if (rows < 1 || cols < 1) throw InputError("DenseMatrix: dimensions must be positive");
    data_.assign(static_cast<size_t>(rows) * cols, 0.0);
}

DenseMatrix DenseMatrix::identity(int n) {
    DenseMatrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

DenseMatrix DenseMatrix::transpose() const {
    DenseMatrix t(cols_, rows_);
    for (int i = 0; i < rows_; ++i)
        for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

DenseMatrix DenseMatrix::operator*(const DenseMatrix& rhs) const {
    if (cols_ != rhs.rows_) throw InputError("matmul: inner dimensions differ");
    DenseMatrix r(rows_, rhs.cols_);
    for (int i = 0; i < rows_; ++i)
        for (int k = 0; k < cols_; ++k) {
            double aik = (*this)(i, k);
            if (aik == 0.0) continue;
            for (int j = 0; j < rhs.cols_; ++j) r(i, j) += aik * rhs(k, j);
        }
    return r;
}

DenseMatrix DenseMatrix::operator+(const DenseMatrix& rhs) const {
    if (!same_shape(rhs)) throw InputError("matrix add: shape mismatch");
    DenseMatrix r(rows_, cols_);
    for (size_t i = 0; i < data_.size(); ++i) r.data_[i] = data_[i] + rhs.data_[i];
    return r;
}

DenseMatrix DenseMatrix::operator-(const DenseMatrix& rhs) const {
    if (!same_shape(rhs)) throw InputError("matrix sub: shape mismatch");
    DenseMatrix r(rows_, cols_);
    for (size_t i = 0; i < data_.size(); ++i) r.data_[i] = data_[i] - rhs.data_[i];
    return r;
}

DenseMatrix DenseMatrix::scaled(double s) const {
    DenseMatrix r(rows_, cols_);
    for (size_t i = 0; i < data_.size(); ++i) r.data_[i] = s * data_[i];
    return r;
}

Vec DenseMatrix::matvec(const Vec& x) const {
    if (static_cast<int>(x.size()) != cols_) throw InputError("matvec: size mismatch");
    Vec y(rows_, 0.0);
    for (int i = 0; i < rows_; ++i) {
        double s = 0.0;
        for (int j = 0; j < cols_; ++j) s += (*this)(i, j) * x[j];
        y[i] = s;
    }
    return y;
}

Vec DenseMatrix::matvec_transposed(const Vec& x) const {
    if (static_cast<int>(x.size()) != rows_) throw InputError("matvec_transposed: size mismatch");
    Vec y(cols_, 0.0);
    for (int i = 0; i < rows_; ++i) {
        double xi = x[i];
        if (xi == 0.0) continue;
        for (int j = 0; j < cols_; ++j) y[j] += (*this)(i, j) * xi;
    }
    return y;
}

double DenseMatrix::max_abs() const {
    double m = 0.0;
    for (double x : data_) m = std::max(m, std::abs(x));
    return m;
}

bool DenseMatrix::all_finite() const {
    for (double x : data_)
        if (!std::isfinite(x)) return false;
    return true;
}

namespace {

void check_spd_input(const DenseMatrix& m, const Vec& rhs) {
    if (m.rows() != m.cols()) throw InputError("spd_solve: matrix not square");
    if (static_cast<int>(rhs.size()) != m.rows()) throw InputError("spd_solve: rhs size mismatch");
    if (!m.all_finite() || !all_finite(rhs)) throw InputError("spd_solve: non-finite input");
    double tol = 1e-10 * std::max(1.0, m.max_abs());
    for (int i = 0; i < m.rows(); ++i)
        for (int j = i + 1; j < m.cols(); ++j)
            if (std::abs(m(i, j) - m(j, i)) > tol) throw InputError("spd_solve: matrix not symmetric");
}

Vec cholesky_solve(const DenseMatrix& m, const Vec& rhs) {
    int n = m.rows();
    DenseMatrix l(n, n);
    for (int j = 0; j < n; ++j) {
        double diag = m(j, j);
        for (int k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
        if (!(diag > 0.0) || !std::isfinite(diag))
            throw SingularHessian("spd_solve: non-positive pivot at row " + std::to_string(j));
        l(j, j) = std::sqrt(diag);
        for (int i = j + 1; i < n; ++i) {
            double s = m(i, j);
            for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / l(j, j);
        }
    }
    Vec y(n);
    for (int i = 0; i < n; ++i) {
        double s = rhs[i];
        for (int k = 0; k < i; ++k) s -= l(i, k) * y[k];
        y[i] = s / l(i, i);
    }
    Vec x(n);
    for (int i = n - 1; i >= 0; --i) {
        double s = y[i];
        for (int k = i + 1; k < n; ++k) s -= l(k, i) * x[k];
        x[i] = s / l(i, i);
    }
    return x;
}

Vec conjugate_gradient_solve(const DenseMatrix& m, const Vec& rhs) {
    int n = m.rows();
    double target = 1e-12 * (1.0 + norm2(rhs));
    Vec x(n, 0.0);
    Vec r = rhs;
    Vec p = r;
    double rr = dot(r, r);
    if (std::sqrt(rr) <= target) return x;
    int cap = 20 * n + 200;
    for (int it = 0; it < cap; ++it) {
        Vec mp = m.matvec(p);
        double pmp = dot(p, mp);
        if (!(pmp > 0.0) || !std::isfinite(pmp))
            throw SingularHessian("spd_solve: conjugate gradient found non-positive curvature");
        double alpha = rr / pmp;
        for (int i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * mp[i];
        }
        double rr_next = dot(r, r);
        if (std::sqrt(rr_next) <= target) return x;
        double beta = rr_next / rr;
        for (int i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
        rr = rr_next;
    }
    throw NoConvergence("spd_solve: conjugate gradient did not reach tolerance");
}

Vec seeded_unit_vector(int n) {
    std::mt19937 rng(kPowerIterationSeed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = uni(rng);
    double nv = norm2(v);
    if (nv == 0.0) {
        v.assign(n, 0.0);
        v[0] = 1.0;
        return v;
    }
    return scale(1.0 / nv, v);
}

// Power iteration for the largest eigenvalue of a positive semidefinite
// operator given as a matvec. Convergence is measured by stagnation of the
// Rayleigh quotient relative to `scale_hint` (an upper bound on the result).
double psd_top_eigenvalue(const std::function<Vec(const Vec&)>& apply, int n, double scale_hint,
                          const char* what) {
    Vec v = seeded_unit_vector(n);
    double est = 0.0;
    int stagnant = 0;
    double tol = 1e-13 * std::max(scale_hint, 1e-300);
    for (int it = 0; it < kPowerIterationCap; ++it) {
        Vec w = apply(v);
        double next = dot(v, w);
        double wn = norm2(w);
        if (wn <= 1e-14 * std::max(scale_hint, 1e-300)) return 0.0;
        v = scale(1.0 / wn, w);
        if (std::abs(next - est) <= tol) {
            if (++stagnant >= 3) return next;
        } else {
            stagnant = 0;
        }
        est = next;
    }
    throw NoConvergence(std::string(what) + ": power iteration hit its cap");
}

} // namespace

Vec spd_solve(const DenseMatrix& m, const Vec& rhs) {
    check_spd_input(m, rhs);
    if (m.rows() <= kCholeskyLimit) return cholesky_solve(m, rhs);
    return conjugate_gradient_solve(m, rhs);
}

double spectral_norm(const DenseMatrix& m) {
    if (m.rows() < 1 || m.cols() < 1) throw InputError("spectral_norm: empty matrix");
    if (!m.all_finite()) throw InputError("spectral_norm: non-finite input");
    double s = m.max_abs();
    if (s == 0.0) return 0.0;
    // Normalizing by the largest entry pins the result into [1, sqrt(rows*cols)],
    // which makes the relative stagnation test meaningful at any input scale.
    DenseMatrix hat = m.scaled(1.0 / s);
    auto gram = [&hat](const Vec& v) { return hat.matvec_transposed(hat.matvec(v)); };
    double lambda = psd_top_eigenvalue(gram, m.cols(), static_cast<double>(m.rows()) * m.cols(),
                                       "spectral_norm");
    return s * std::sqrt(lambda);
}

EigExtremes sym_eig_extremes(const DenseMatrix& m) {
    if (m.rows() != m.cols()) throw InputError("sym_eig_extremes: matrix not square");
    if (!m.all_finite()) throw InputError("sym_eig_extremes: non-finite input");
    for (int i = 0; i < m.rows(); ++i)
        for (int j = i + 1; j < m.cols(); ++j)
            if (std::abs(m(i, j) - m(j, i)) > 1e-12)
                throw InputError("sym_eig_extremes: matrix not symmetric");
    double t = spectral_norm(m);
    if (t == 0.0) return {0.0, 0.0};
    int n = m.rows();
    // M + tI and tI - M are positive semidefinite with top eigenvalues
    // t + lambda_max and t - lambda_min; both power iterations run on them.
    auto apply_plus = [&m, t](const Vec& v) {
        Vec w = m.matvec(v);
        for (size_t i = 0; i < w.size(); ++i) w[i] += t * v[i];
        return w;
    };
    auto apply_minus = [&m, t](const Vec& v) {
        Vec w = m.matvec(v);
        for (size_t i = 0; i < w.size(); ++i) w[i] = t * v[i] - w[i];
        return w;
    };
    double top_plus = psd_top_eigenvalue(apply_plus, n, 2.0 * t, "sym_eig_extremes");
    double top_minus = psd_top_eigenvalue(apply_minus, n, 2.0 * t, "sym_eig_extremes");
    return {t - top_minus, top_plus - t};
}

Vec finite_diff_grad(const std::function<double(const Vec&)>& f, const Vec& x, double h) {
    if (!(h > 0.0)) throw InputError("finite_diff_grad: h must be positive");
    Vec g(x.size());
    Vec probe = x;
    for (size_t i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + h;
        double fp = f(probe);
        probe[i] = x[i] - h;
        double fm = f(probe);
        probe[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

} // namespace bicert
