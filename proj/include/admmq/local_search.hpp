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

// Pair-swap local search. A move picks two rows (i1, i2) and, per column j,
// shifts both entries by one grid step in either direction, or leaves the
// column alone. With G = H(Ŵ - W_q) the change in the objective is
//
//   1/2 (-2 d1 G[i1,j] + d1² H[i1,i1] - 2 d2 G[i2,j] + d2² H[i2,i2]
//        + 2 d1 d2 H[i1,i2])
//
// which needs only two gradient entries and three Hessian entries. G is
// kept current with a rank-2 correction after each applied move.

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "admmq/error.hpp"
#include "admmq/grid.hpp"
#include "admmq/linalg.hpp"
#include "admmq/matrix.hpp"
#include "admmq/problem.hpp"
#include "admmq/solution.hpp"

namespace admmq {

/// G = H(Ŵ - W_q), the negative objective gradient at W_q.
struct SwapGradient {
  Matrix g;
};

inline SwapGradient compute_gradient(const LayerProblem& problem,
                                     const Matrix& w_q) {
  problem.w_hat.require_same_shape(w_q, "compute_gradient");
  return {matmul(problem.hessian.matrix(), problem.w_hat - w_q)};
}

/// Objective change for one column when rows i1, i2 move by d1, d2.
inline double column_swap_delta(const SwapGradient& grad,
                                const SymmetricMatrix& h, std::size_t i1,
                                std::size_t i2, std::size_t j, double d1,
                                double d2) {
  const Matrix& g = grad.g;
  return 0.5 * (-2.0 * d1 * g(i1, j) + d1 * d1 * h(i1, i1) -
                2.0 * d2 * g(i2, j) + d2 * d2 * h(i2, i2) +
                2.0 * d1 * d2 * h(i1, i2));
}

struct SwapMove {
  std::size_t i1 = 0;
  std::size_t i2 = 0;
  // Per column: -1, 0 or +1 grid steps for each row. 0 in both means the
  // column opted out.
  std::vector<int> step1;
  std::vector<int> step2;
  double delta_loss = 0.0;

  bool improves() const { return delta_loss < 0.0; }
};

/// Best sign pair per column for rows (i1, i2). Columns whose best pair
/// does not lower the objective, or whose every pair leaves the grid, opt
/// out.
inline SwapMove pair_swap_delta(const SwapGradient& grad,
                                const SymmetricMatrix& h,
                                const CodedMatrix& codes, std::size_t i1,
                                std::size_t i2) {
  if (i1 == i2) throw InvalidArgument("pair_swap_delta requires i1 != i2");
  const std::size_t p = codes.cols;
  const std::int64_t top = codes.grid.spec().max_code();
  SwapMove move;
  move.i1 = i1;
  move.i2 = i2;
  move.step1.assign(p, 0);
  move.step2.assign(p, 0);
  static constexpr int kSigns[2] = {1, -1};
  for (std::size_t j = 0; j < p; ++j) {
    const std::int64_t k1 = codes.code(i1, j);
    const std::int64_t k2 = codes.code(i2, j);
    const double s1 = codes.grid.scale_at(i1, j);
    const double s2 = codes.grid.scale_at(i2, j);
    double best = 0.0;
    for (int a : kSigns) {
      if (k1 + a < 0 || k1 + a > top) continue;
      for (int b : kSigns) {
        if (k2 + b < 0 || k2 + b > top) continue;
        const double d = column_swap_delta(grad, h, i1, i2, j, a * s1, b * s2);
        if (d < best) {
          best = d;
          move.step1[j] = a;
          move.step2[j] = b;
        }
      }
    }
    move.delta_loss += best;
  }
  return move;
}

/// Dense perturbation a move would add to W_q, using ±scale steps.
inline Matrix move_perturbation(const SwapMove& move, const QuantGrid& grid) {
  Matrix pert(grid.rows(), grid.cols());
  for (std::size_t j = 0; j < grid.cols(); ++j) {
    pert(move.i1, j) = move.step1[j] * grid.scale_at(move.i1, j);
    pert(move.i2, j) = move.step2[j] * grid.scale_at(move.i2, j);
  }
  return pert;
}

struct LocalSearchOptions {
  int rounds = 5;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
};

inline constexpr int kMaxLocalSearchRounds = 5;

struct RoundEvent {
  int round = 0;
  std::optional<SwapMove> applied;
  const SwapGradient* gradient = nullptr;    // rank-2 maintained
  const QuantizedSolution* current = nullptr;  // objective not refreshed
};

struct RefineResult {
  QuantizedSolution solution;
  std::vector<SwapMove> moves;
  SwapGradient gradient;
  int rounds_run = 0;
};

/// Distinct unordered row pairs for one round. All pairs when there are at
/// most batch_size of them.
inline std::vector<std::pair<std::size_t, std::size_t>> sample_row_pairs(
    std::size_t n, std::size_t batch_size, std::mt19937_64& rng) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  if (n < 2 || batch_size == 0) return pairs;
  const std::size_t total = n * (n - 1) / 2;
  if (total <= batch_size) {
    pairs.reserve(total);
    for (std::size_t a = 0; a + 1 < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b) pairs.emplace_back(a, b);
    return pairs;
  }
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::set<std::pair<std::size_t, std::size_t>> seen;
  while (pairs.size() < batch_size) {
    std::size_t a = pick(rng);
    std::size_t b = pick(rng);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    if (seen.insert({a, b}).second) pairs.emplace_back(a, b);
  }
  return pairs;
}

/// Applies a move to codes and weights and folds the realized change into
/// G with a rank-2 correction.
inline void apply_move(const SwapMove& move, const SymmetricMatrix& h,
                       QuantizedSolution& sol, SwapGradient& grad) {
  const std::size_t n = sol.w_q.rows();
  for (std::size_t j = 0; j < sol.w_q.cols(); ++j) {
    double change[2] = {0.0, 0.0};
    const std::size_t rows[2] = {move.i1, move.i2};
    const int steps[2] = {move.step1[j], move.step2[j]};
    for (int r = 0; r < 2; ++r) {
      if (steps[r] == 0) continue;
      const std::size_t i = rows[r];
      const auto k = static_cast<std::uint32_t>(
          static_cast<std::int64_t>(sol.codes.code(i, j)) + steps[r]);
      sol.codes.set_code(i, j, k);
      const double updated = sol.codes.grid.value(i, j, k);
      change[r] = updated - sol.w_q(i, j);
      sol.w_q(i, j) = updated;
    }
    if (change[0] == 0.0 && change[1] == 0.0) continue;
    for (std::size_t i = 0; i < n; ++i) {
      grad.g(i, j) -= h(i, move.i1) * change[0] + h(i, move.i2) * change[1];
    }
  }
}

/// Pair-swap refinement of a grid-feasible solution, in the coordinates of
/// `problem`. Each round samples a batch of row pairs, applies the single
/// best improving pair, and stops early when none improves.
inline RefineResult pair_swap_refine(
    const LayerProblem& problem, QuantizedSolution solution,
    const LocalSearchOptions& opts,
    const std::function<void(const RoundEvent&)>& observer = {}) {
  if (opts.rounds < 0 || opts.rounds > kMaxLocalSearchRounds) {
    throw InvalidArgument("local search rounds must lie in [0, 5]");
  }
  problem.w_hat.require_same_shape(solution.w_q, "pair_swap_refine");
  RefineResult out;
  out.gradient = compute_gradient(problem, solution.w_q);
  std::mt19937_64 rng(opts.seed);
  const std::size_t n = problem.n();
  for (int round = 0; round < opts.rounds && n >= 2; ++round) {
    const auto pairs = sample_row_pairs(n, opts.batch_size, rng);
    std::optional<SwapMove> best;
    for (const auto& [a, b] : pairs) {
      SwapMove m =
          pair_swap_delta(out.gradient, problem.hessian, solution.codes, a, b);
      if (m.improves() && (!best || m.delta_loss < best->delta_loss)) {
        best = std::move(m);
      }
    }
    out.rounds_run = round + 1;
    if (best) {
      apply_move(*best, problem.hessian, solution, out.gradient);
      out.moves.push_back(*best);
    }
    if (observer) observer({round, best, &out.gradient, &solution});
    if (!best) break;
  }
  solution.objective = objective(problem, solution.w_q);
  out.solution = std::move(solution);
  return out;
}

}  // namespace admmq
