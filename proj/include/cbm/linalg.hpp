#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "cbm/errors.hpp"

namespace cbm {

/// Council-sized dense symmetric matrix (dimension capped at 64). Symmetry
/// is enforced at construction; the solver additionally verifies positive
/// definiteness through the factorization itself.
class SymMatrix {
 public:
  explicit SymMatrix(int dim, double fill = 0.0)
      : dim_(dim), data_(static_cast<std::size_t>(dim) * dim, fill) {
    if (dim < 1 || dim > 64)
      throw ValidationError("SymMatrix: dimension must lie in [1, 64]");
  }

  static SymMatrix from_rows(const std::vector<std::vector<double>>& rows) {
    SymMatrix m(static_cast<int>(rows.size()));
    for (int i = 0; i < m.dim_; ++i) {
      if (static_cast<int>(rows[i].size()) != m.dim_)
        throw ValidationError("SymMatrix: ragged rows");
      for (int j = 0; j < m.dim_; ++j) m.at(i, j) = rows[i][j];
    }
    m.check_symmetry();
    return m;
  }

  static SymMatrix identity(int dim) {
    SymMatrix m(dim);
    for (int i = 0; i < dim; ++i) m.at(i, i) = 1.0;
    return m;
  }

  int dim() const { return dim_; }
  double& at(int i, int j) { return data_[static_cast<std::size_t>(i) * dim_ + j]; }
  double at(int i, int j) const {
    return data_[static_cast<std::size_t>(i) * dim_ + j];
  }

  /// Symmetrize tiny asymmetries accumulated by the builder, failing loudly
  /// on anything above tolerance.
  void check_symmetry(double tol = 1e-12) {
    for (int i = 0; i < dim_; ++i)
      for (int j = i + 1; j < dim_; ++j) {
        if (std::abs(at(i, j) - at(j, i)) > tol)
          throw ValidationError("SymMatrix: asymmetry at (" + std::to_string(i) +
                                ", " + std::to_string(j) + ")");
        const double v = 0.5 * (at(i, j) + at(j, i));
        at(i, j) = v;
        at(j, i) = v;
      }
  }

  std::vector<double> multiply(std::span<const double> x) const {
    std::vector<double> y(dim_, 0.0);
    for (int i = 0; i < dim_; ++i)
      for (int j = 0; j < dim_; ++j) y[i] += at(i, j) * x[j];
    return y;
  }

 private:
  int dim_;
  std::vector<double> data_;
};

/// Raised when the Cholesky factorization meets a non-positive pivot.
class SingularOrIndefinite : public DegeneracyError {
 public:
  SingularOrIndefinite(int pivot, double value)
      : DegeneracyError("matrix is singular or indefinite: pivot " +
                        std::to_string(pivot) + " = " + std::to_string(value)),
        pivot_index(pivot),
        pivot_value(value) {}
  int pivot_index;
  double pivot_value;
};

namespace detail {

inline std::vector<double> cholesky(const SymMatrix& a) {
  const int n = a.dim();
  std::vector<double> l(static_cast<std::size_t>(n) * n, 0.0);
  auto L = [&](int i, int j) -> double& {
    return l[static_cast<std::size_t>(i) * n + j];
  };
  for (int j = 0; j < n; ++j) {
    double diag = a.at(j, j);
    for (int k = 0; k < j; ++k) diag -= L(j, k) * L(j, k);
    if (!(diag > 0.0) || !std::isfinite(diag))
      throw SingularOrIndefinite(j, diag);
    L(j, j) = std::sqrt(diag);
    for (int i = j + 1; i < n; ++i) {
      double v = a.at(i, j);
      for (int k = 0; k < j; ++k) v -= L(i, k) * L(j, k);
      L(i, j) = v / L(j, j);
    }
  }
  return l;
}

inline std::vector<double> solve_with_factor(const std::vector<double>& l,
                                             int n, std::span<const double> b) {
  std::vector<double> y(b.begin(), b.end());
  auto L = [&](int i, int j) { return l[static_cast<std::size_t>(i) * n + j]; };
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < i; ++k) y[i] -= L(i, k) * y[k];
    y[i] /= L(i, i);
  }
  for (int i = n - 1; i >= 0; --i) {
    for (int k = i + 1; k < n; ++k) y[i] -= L(k, i) * y[k];
    y[i] /= L(i, i);
  }
  return y;
}

}  // namespace detail

/// Solve A w = b for symmetric positive definite A by Cholesky, with one
/// step of iterative refinement to push the residual toward machine level.
inline std::vector<double> spd_solve(const SymMatrix& a,
                                     std::span<const double> b) {
  if (static_cast<int>(b.size()) != a.dim())
    throw ValidationError("spd_solve: dimension mismatch");
  const auto l = detail::cholesky(a);
  auto w = detail::solve_with_factor(l, a.dim(), b);
  const auto aw = a.multiply(w);
  std::vector<double> r(a.dim());
  for (int i = 0; i < a.dim(); ++i) r[i] = b[i] - aw[i];
  const auto corr = detail::solve_with_factor(l, a.dim(), r);
  for (int i = 0; i < a.dim(); ++i) w[i] += corr[i];
  return w;
}

/// Smallest eigenvalue via the cyclic Jacobi iteration; for the dimensions
/// allowed here this is exact to well below 1e-8.
inline double min_eigen_estimate(SymMatrix a) {
  const int n = a.dim();
  if (n == 1) return a.at(0, 0);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) off += a.at(i, j) * a.at(i, j);
    if (off < 1e-28) break;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) {
        const double apq = a.at(p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (a.at(q, q) - a.at(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a.at(k, p), akq = a.at(k, q);
          a.at(k, p) = c * akp - s * akq;
          a.at(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a.at(p, k), aqk = a.at(q, k);
          a.at(p, k) = c * apk - s * aqk;
          a.at(q, k) = s * apk + c * aqk;
        }
      }
  }
  double min = a.at(0, 0);
  for (int i = 1; i < n; ++i) min = std::min(min, a.at(i, i));
  return min;
}

}  // namespace cbm
