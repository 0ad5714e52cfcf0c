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

// Reference computations for the tests. None of these call into the
// library's numerical kernels, so they can serve as independent checks.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "admmq/grid.hpp"
#include "admmq/matrix.hpp"
#include "admmq/problem.hpp"

namespace admmq::testing {

inline Matrix gaussian(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                       double stddev = 1.0) {
  std::normal_distribution<double> g(0.0, stddev);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = g(rng);
  return m;
}

/// AᵀA by explicit triple loop.
inline Matrix naive_gram(const Matrix& x) {
  const std::size_t n = x.cols();
  Matrix g(n, n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) {
      double s = 0.0;
      for (std::size_t r = 0; r < x.rows(); ++r) s += x(r, a) * x(r, b);
      g(a, b) = s;
    }
  return g;
}

inline Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

/// Solves A X = B by Gaussian elimination with partial pivoting.
inline Matrix dense_solve(Matrix a, Matrix b) {
  const std::size_t n = a.rows();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a(r, c)) > std::abs(a(piv, c))) piv = r;
    if (a(piv, c) == 0.0) throw std::runtime_error("singular system");
    for (std::size_t k = 0; k < n; ++k) std::swap(a(c, k), a(piv, k));
    for (std::size_t k = 0; k < b.cols(); ++k) std::swap(b(c, k), b(piv, k));
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a(r, c) / a(c, c);
      for (std::size_t k = c; k < n; ++k) a(r, k) -= f * a(c, k);
      for (std::size_t k = 0; k < b.cols(); ++k) b(r, k) -= f * b(c, k);
    }
  }
  Matrix x(n, b.cols());
  for (std::size_t k = 0; k < b.cols(); ++k) {
    for (std::size_t r = n; r-- > 0;) {
      double s = b(r, k);
      for (std::size_t c = r + 1; c < n; ++c) s -= a(r, c) * x(c, k);
      x(r, k) = s / a(r, r);
    }
  }
  return x;
}

/// ½ Σ_j Σ_{i,k} e_ij H_ik e_kj with E = W - Ŵ.
inline double naive_objective(const Matrix& w_hat, const Matrix& h,
                              const Matrix& w) {
  double s = 0.0;
  for (std::size_t j = 0; j < w.cols(); ++j)
    for (std::size_t i = 0; i < w.rows(); ++i)
      for (std::size_t k = 0; k < w.rows(); ++k)
        s += (w(i, j) - w_hat(i, j)) * h(i, k) * (w(k, j) - w_hat(k, j));
  return 0.5 * s;
}

/// Nearest code by scanning every level; exact ties take the larger code.
inline std::uint32_t exhaustive_nearest(const QuantGrid& grid, std::size_t i,
                                        std::size_t j, double v) {
  std::uint32_t best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::uint32_t k = 0; k < grid.spec().levels(); ++k) {
    const double d = std::abs(v - grid.value(i, j, k));
    if (d <= best_dist) {
      best_dist = d;
      best = k;
    }
  }
  return best;
}

inline double rel_diff(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / scale;
}

inline double frob_rel(const Matrix& a, const Matrix& b) {
  return std::sqrt(squared_distance(a, b)) /
         std::max(frobenius_norm(b), 1e-300);
}

/// Layer problem with H = XᵀX + damping from N Gaussian samples.
inline LayerProblem gaussian_problem(std::size_t n, std::size_t p,
                                     std::size_t samples, std::uint64_t seed,
                                     double damp = kDefaultDampFactor) {
  std::mt19937_64 rng(seed);
  Matrix w_hat = gaussian(n, p, rng);
  Matrix x = gaussian(samples, n, rng);
  return make_problem(std::move(w_hat), build_hessian({x}, 0.0, damp), 0.0);
}

inline LayerProblem identity_problem(std::size_t n, std::size_t p,
                                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  LayerProblem pr;
  pr.w_hat = gaussian(n, p, rng);
  pr.hessian = SymmetricMatrix::identity(n);
  return pr;
}

}  // namespace admmq::testing
