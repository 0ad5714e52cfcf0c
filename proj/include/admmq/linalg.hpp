// Copyright 2026 The admmq Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Dense symmetric linear algebra: cyclic Jacobi eigendecomposition, shifted
// solves through a cached factorization, and Cholesky helpers.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "admmq/error.hpp"
#include "admmq/matrix.hpp"

namespace admmq {

inline constexpr double kSymmetryTolerance = 1e-10;

/// Square matrix that passed the symmetry check on construction.
class SymmetricMatrix {
 public:
  SymmetricMatrix() = default;
  explicit SymmetricMatrix(Matrix m) : m_(std::move(m)) { validate(m_); }

  /// Averages A and Aᵀ first; for results of products that are symmetric in
  /// exact arithmetic.
  static SymmetricMatrix symmetrized(Matrix m) {
    if (m.rows() != m.cols()) throw InvalidArgument("matrix is not square");
    for (std::size_t i = 0; i < m.rows(); ++i)
      for (std::size_t j = i + 1; j < m.cols(); ++j) {
        const double avg = 0.5 * (m(i, j) + m(j, i));
        m(i, j) = avg;
        m(j, i) = avg;
      }
    return SymmetricMatrix(std::move(m));
  }

  static SymmetricMatrix identity(std::size_t n) {
    return SymmetricMatrix(Matrix::identity(n));
  }

  static void validate(const Matrix& m) {
    if (m.rows() != m.cols()) {
      throw InvalidArgument("symmetric matrix must be square, got " +
                            m.shape_string());
    }
    const double tol = kSymmetryTolerance * std::max(1.0, max_abs(m));
    double worst = -1.0;
    std::size_t wi = 0;
    std::size_t wj = 0;
    for (std::size_t i = 0; i < m.rows(); ++i)
      for (std::size_t j = i + 1; j < m.cols(); ++j) {
        const double gap = std::abs(m(i, j) - m(j, i));
        if (std::isnan(gap) || gap > worst) {
          worst = gap;
          wi = i;
          wj = j;
        }
      }
    if (worst > tol || std::isnan(worst)) throw NotSymmetric(wi, wj, worst);
  }

  std::size_t order() const { return m_.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }
  const Matrix& matrix() const { return m_; }

  friend bool operator==(const SymmetricMatrix&,
                         const SymmetricMatrix&) = default;

 private:
  Matrix m_;
};

struct EigenFactorization {
  std::vector<double> eigenvalues;  // ascending
  Matrix eigenvectors;              // column k pairs with eigenvalues[k]

  std::size_t order() const { return eigenvalues.size(); }
};

struct JacobiOptions {
  int max_sweeps = 100;
  double relative_tolerance = 1e-12;
};

namespace detail {

inline double off_diagonal_norm(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

}  // namespace detail

/// Cyclic Jacobi eigendecomposition. Stops once the off-diagonal Frobenius
/// norm drops to relative_tolerance * ‖A‖_F; throws ConvergenceError if the
/// sweep cap is reached first.
inline EigenFactorization sym_eig(const SymmetricMatrix& sym,
                                  const JacobiOptions& opts = {}) {
  const std::size_t n = sym.order();
  if (n == 0) throw InvalidArgument("sym_eig requires n >= 1");
  Matrix a = sym.matrix();
  Matrix v = Matrix::identity(n);
  const double threshold = opts.relative_tolerance * frobenius_norm(a);

  double off = detail::off_diagonal_norm(a);
  int sweep = 0;
  while (off > threshold) {
    if (sweep == opts.max_sweeps) {
      throw ConvergenceError("Jacobi eigendecomposition did not converge in " +
                                 std::to_string(opts.max_sweeps) + " sweeps",
                             off);
    }
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
    ++sweep;
    off = detail::off_diagonal_norm(a);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return a(x, x) < a(y, y);
  });
  EigenFactorization out;
  out.eigenvalues.resize(n);
  out.eigenvectors = Matrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    out.eigenvalues[k] = a(order[k], order[k]);
    for (std::size_t i = 0; i < n; ++i)
      out.eigenvectors(i, k) = v(i, order[k]);
  }
  return out;
}

/// X = U (Λ + ρI)⁻¹ Uᵀ B, i.e. the solution of (A + ρI) X = B.
inline Matrix solve_shifted(const EigenFactorization& eig, double rho,
                            const Matrix& b) {
  if (!(rho > 0.0)) throw InvalidArgument("solve_shifted requires rho > 0");
  const std::size_t n = eig.order();
  if (b.rows() != n) {
    throw InvalidArgument("solve_shifted: right-hand side has " +
                          std::to_string(b.rows()) + " rows, expected " +
                          std::to_string(n));
  }
  Matrix y = matmul_tn(eig.eigenvectors, b);
  for (std::size_t k = 0; k < n; ++k) {
    const double shifted = eig.eigenvalues[k] + rho;
    if (!(shifted > 0.0)) {
      throw InvalidArgument("solve_shifted: A + rho I is singular");
    }
    for (double& val : y.row(k)) val /= shifted;
  }
  return matmul(eig.eigenvectors, y);
}

/// Lower Cholesky factor L with A = L Lᵀ, or an empty matrix if A is not
/// numerically positive definite.
inline Matrix try_cholesky_lower(const Matrix& a) {
  const std::size_t n = a.rows();
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0)) return {};
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

inline double min_eigenvalue(const SymmetricMatrix& a) {
  return sym_eig(a).eigenvalues.front();
}

/// Inverse of a symmetric positive definite matrix via its Cholesky factor.
inline Matrix spd_inverse(const SymmetricMatrix& a) {
  const std::size_t n = a.order();
  Matrix l = try_cholesky_lower(a.matrix());
  if (l.empty() && n > 0) {
    throw NotPositiveDefinite("Cholesky factorization failed",
                              min_eigenvalue(a));
  }
  // Solve L Y = I, then Lᵀ X = Y.
  Matrix inv(n, n);
  std::vector<double> y(n);
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = (i == c) ? 1.0 : 0.0;
      for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * y[k];
      y[i] = s / l(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {
      double s = y[ii];
      for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * inv(k, c);
      inv(ii, c) = s / l(ii, ii);
    }
  }
  return SymmetricMatrix::symmetrized(std::move(inv)).matrix();
}

}  // namespace admmq
