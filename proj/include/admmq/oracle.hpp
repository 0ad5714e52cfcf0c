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

// Exhaustive reference solver for tiny instances. The objective splits into
// independent per-column quadratics, so the search is p·(2^b)^n rather than
// (2^b)^(n·p).

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "admmq/error.hpp"
#include "admmq/grid.hpp"
#include "admmq/matrix.hpp"
#include "admmq/problem.hpp"
#include "admmq/solution.hpp"

namespace admmq {

struct OracleBudget {
  std::uint64_t max_assignments = std::uint64_t{1} << 24;
};

/// p · L^n, saturating at uint64 max.
inline std::uint64_t oracle_assignments(std::size_t n, std::size_t p,
                                        std::uint32_t levels) {
  constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t count = p;
  for (std::size_t i = 0; i < n; ++i) {
    if (count > kMax / levels) return kMax;
    count *= levels;
  }
  return count;
}

/// Global minimizer over codes on a fixed grid. Ties resolve to the
/// lexicographically smallest code vector of each column.
inline QuantizedSolution brute_force_optimal(const LayerProblem& problem,
                                             const QuantGrid& grid,
                                             const OracleBudget& budget = {}) {
  problem.validate();
  const std::size_t n = problem.n();
  const std::size_t p = problem.p();
  if (grid.rows() != n || grid.cols() != p) {
    throw InvalidArgument("oracle grid layout does not match the problem");
  }
  const std::uint32_t levels = grid.spec().levels();
  const std::uint64_t required = oracle_assignments(n, p, levels);
  if (required > budget.max_assignments) {
    throw BudgetExceeded(required, budget.max_assignments);
  }

  const Matrix& h = problem.hessian.matrix();
  CodedMatrix coded{n, p, std::vector<std::uint8_t>(n * p), grid};
  std::vector<std::uint32_t> code(n);
  std::vector<double> err(n);
  std::vector<double> herr(n);

  // e_i = value(code_i) - ŵ_i; tracks q = eᵀHe and He incrementally as the
  // odometer turns, recomputing from scratch whenever a digit other than the
  // two fastest moves so rounding drift stays bounded.
  auto rebuild = [&](std::size_t j) {
    for (std::size_t i = 0; i < n; ++i) {
      err[i] = grid.value(i, j, code[i]) - problem.w_hat(i, j);
    }
    double q = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += h(i, k) * err[k];
      herr[i] = s;
      q += err[i] * s;
    }
    return q;
  };

  for (std::size_t j = 0; j < p; ++j) {
    std::fill(code.begin(), code.end(), 0);
    double q = rebuild(j);
    double best = q;
    std::vector<std::uint32_t> best_code = code;
    while (true) {
      // Advance the odometer; row n-1 is the fastest digit.
      std::size_t pos = n;
      while (pos > 0 && code[pos - 1] + 1 == levels) {
        code[pos - 1] = 0;
        --pos;
      }
      if (pos == 0) break;
      ++code[pos - 1];
      if (n >= 3 && pos - 1 < n - 2) {
        q = rebuild(j);
      } else {
        for (std::size_t i = pos - 1; i < n; ++i) {
          const double e_new = grid.value(i, j, code[i]) - problem.w_hat(i, j);
          const double delta = e_new - err[i];
          if (delta == 0.0) continue;
          q += 2.0 * delta * herr[i] + delta * delta * h(i, i);
          for (std::size_t k = 0; k < n; ++k) herr[k] += delta * h(k, i);
          err[i] = e_new;
        }
      }
      const double slack = 1e-12 * std::max(1.0, std::abs(best));
      if (q < best - slack) {
        best = q;
        best_code = code;
      }
    }
    for (std::size_t i = 0; i < n; ++i) coded.set_code(i, j, best_code[i]);
  }
  return make_solution(problem, std::move(coded), "oracle");
}

/// objective(W_q + perturbation) - objective(W_q) by two full evaluations.
inline double direct_objective_delta(const LayerProblem& problem,
                                     const Matrix& w_q,
                                     const Matrix& perturbation) {
  return objective(problem, w_q + perturbation) - objective(problem, w_q);
}

}  // namespace admmq
