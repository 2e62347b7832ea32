#pragma once

#include <functional>
#include <vector>

#include "bicert/errors.hpp"

namespace bicert {

using Vec = std::vector<double>;

double dot(const Vec& a, const Vec& b);
double norm2(const Vec& a);
Vec sub(const Vec& a, const Vec& b);
Vec add(const Vec& a, const Vec& b);
Vec scale(double s, const Vec& a);
bool all_finite(const Vec& a);

// Row-major dense matrix. The only container the library needs: instances,
// Hessians, and the certificate transforms are all small and dense.
class DenseMatrix {
  public:
    DenseMatrix() = default;
    DenseMatrix(int rows, int cols);
    static DenseMatrix identity(int n);

    int rows() const { return rows_; }
    int cols() const { return cols_; }

    double& operator()(int i, int j) { return data_[static_cast<size_t>(i) * cols_ + j]; }
    const double& operator()(int i, int j) const { return data_[static_cast<size_t>(i) * cols_ + j]; }

    DenseMatrix transpose() const;
    DenseMatrix operator*(const DenseMatrix& rhs) const;
    DenseMatrix operator+(const DenseMatrix& rhs) const;
    DenseMatrix operator-(const DenseMatrix& rhs) const;
    DenseMatrix scaled(double s) const;
    Vec matvec(const Vec& x) const;
    Vec matvec_transposed(const Vec& x) const;

    double max_abs() const;
    bool all_finite() const;
    bool same_shape(const DenseMatrix& rhs) const { return rows_ == rhs.rows_ && cols_ == rhs.cols_; }

  private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

// Solves M x = rhs for symmetric positive definite M. Cholesky up to
// dimension 512, conjugate gradient above. Residual norm of the result is
// at most 1e-10 * (1 + |rhs|).
Vec spd_solve(const DenseMatrix& m, const Vec& rhs);

// Largest singular value via power iteration on the normalized Gram matrix,
// deterministic start vector, relative accuracy 1e-8. Zero matrix gives 0.
double spectral_norm(const DenseMatrix& m);

struct EigExtremes {
    double min = 0.0;
    double max = 0.0;
};

// Extreme eigenvalues of a symmetric matrix via power iteration on the
// two shifted positive semidefinite forms M + tI and tI - M with t = |M|.
EigExtremes sym_eig_extremes(const DenseMatrix& m);

// Central differences (f(x + h e_i) - f(x - h e_i)) / (2h) per coordinate.
Vec finite_diff_grad(const std::function<double(const Vec&)>& f, const Vec& x, double h);

} // namespace bicert
