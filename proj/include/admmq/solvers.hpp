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

// Layer quantizers: round-to-nearest, greedy inverse-Hessian compensation
// (GPTQ-style), and the ADMM operator-splitting solver.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "admmq/error.hpp"
#include "admmq/grid.hpp"
#include "admmq/linalg.hpp"
#include "admmq/local_search.hpp"
#include "admmq/matrix.hpp"
#include "admmq/problem.hpp"
#include "admmq/solution.hpp"

namespace admmq {

// ---------------------------------------------------------------------------
// Round-to-nearest

inline QuantizedSolution solve_rtn(const LayerProblem& problem,
                                   const GridSpec& spec, FitMode fitting) {
  problem.validate();
  const QuantGrid grid = fit_grid(problem.w_hat, spec, fitting);
  auto proj = project(problem.w_hat, grid);
  return make_solution(problem, std::move(proj.coded), "rtn");
}

// ---------------------------------------------------------------------------
// Greedy compensation

/// Rows are quantized in index order on a grid fitted once to Ŵ. After row
/// i is rounded, every later row absorbs the error through the upper
/// Cholesky factor U of H⁻¹ (H⁻¹ = UᵀU):
///   w_k -= U[i][k] / U[i][i] * (w_i - q_i)   for k > i.
inline QuantizedSolution solve_gptq(const LayerProblem& problem,
                                    const GridSpec& spec, FitMode fitting) {
  problem.validate();
  const QuantGrid grid = fit_grid(problem.w_hat, spec, fitting);
  const std::size_t n = problem.n();
  const std::size_t p = problem.p();

  const Matrix h_inv = spd_inverse(problem.hessian);
  const Matrix lower = try_cholesky_lower(h_inv);
  if (lower.empty()) {
    throw NotPositiveDefinite("inverse Hessian factorization failed",
                              min_eigenvalue(problem.hessian));
  }
  const Matrix upper = transpose(lower);

  Matrix work = problem.w_hat;
  CodedMatrix coded{n, p, std::vector<std::uint8_t>(n * p), grid};
  std::vector<double> err(p);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      const std::uint32_t k = grid.nearest_code(i, j, work(i, j));
      coded.set_code(i, j, k);
      err[j] = (work(i, j) - grid.value(i, j, k)) / upper(i, i);
    }
    for (std::size_t r = i + 1; r < n; ++r) {
      const double u = upper(i, r);
      if (u == 0.0) continue;
      for (std::size_t j = 0; j < p; ++j) work(r, j) -= u * err[j];
    }
  }
  return make_solution(problem, std::move(coded), "gptq");
}

// ---------------------------------------------------------------------------
// ADMM

struct AdmmConfig {
  int iterations = 300;
  double rho0 = 0.1;
  double gamma = 1.1;
  bool refresh = true;
  std::optional<int> refresh_iteration;  // default: iterations / 2
  FitMode fitting = FitMode::kMseClip;
  GridSpec grid;
  double primal_tolerance = 1e-7;
  bool precondition = true;
  LocalSearchOptions local_search;  // rounds = 0 skips the refinement

  void validate() const {
    if (iterations < 1) throw InvalidArgument("ADMM needs T >= 1");
    if (!(rho0 > 0.0)) throw InvalidArgument("ADMM needs rho0 > 0");
    if (!(gamma > 1.0)) throw InvalidArgument("ADMM needs gamma > 1");
    if (!(primal_tolerance >= 0.0)) {
      throw InvalidArgument("primal tolerance must be >= 0");
    }
    grid.validate();
  }

  int refresh_at() const {
    return refresh_iteration.value_or(iterations / 2);
  }
};

/// ρ_t = ρ₀ γᵗ.
inline double rho_schedule(int t, const AdmmConfig& config) {
  return config.rho0 * std::pow(config.gamma, t);
}

/// One trace row per executed iteration.
struct IterationRecord {
  int t = 0;
  double rho = 0.0;
  double primal = 0.0;    // ‖W⁽ᵗ⁺¹⁾ - D⁽ᵗ⁺¹⁾‖_F (scaled coordinates)
  double d_change = 0.0;  // ‖D⁽ᵗ⁺¹⁾ - D⁽ᵗ⁾‖_F
  double objective = 0.0; // original objective at Σ·D⁽ᵗ⁺¹⁾
  bool refresh_attempted = false;
  bool refresh_accepted = false;
  // Squared D-update distances ‖D - (W + V/ρ)‖² for the stale and refreshed
  // grids; NaN when no refresh was attempted.
  double refresh_old_distance = std::numeric_limits<double>::quiet_NaN();
  double refresh_new_distance = std::numeric_limits<double>::quiet_NaN();
};

struct ConvergenceTrace {
  std::vector<IterationRecord> records;
};

/// ADMM iterates in scaled coordinates. `codes` always indexes Σ·D on
/// `grid`; D itself is Σ⁻¹ applied to the decoded codes.
struct SolverState {
  Matrix w;
  Matrix d;
  Matrix v;
  Matrix target;  // W⁽ᵗ⁺¹⁾ + V⁽ᵗ⁾/ρ_t from the last D-update
  double rho = 0.0;
  int t = 0;
  QuantGrid grid;
  CodedMatrix codes;
  bool refresh_accepted = false;
};

struct Residuals {
  double primal = 0.0;
  double d_change = 0.0;
};

inline Residuals residuals(const SolverState& state,
                           const Matrix& previous_d) {
  return {std::sqrt(squared_distance(state.w, state.d)),
          std::sqrt(squared_distance(state.d, previous_d))};
}

/// W = (H + ρI)⁻¹(HŴ + ρD - V) through the cached eigendecomposition.
inline Matrix admm_w_update(const EigenFactorization& eig,
                            const Matrix& h_w_hat, const Matrix& d,
                            const Matrix& v, double rho) {
  Matrix rhs = h_w_hat;
  auto rv = rhs.values();
  auto dv = d.values();
  auto vv = v.values();
  for (std::size_t k = 0; k < rv.size(); ++k) rv[k] += rho * dv[k] - vv[k];
  return solve_shifted(eig, rho, rhs);
}

/// D = Σ⁻¹ Proj(Σ·target) on `grid`.
inline Projection admm_d_projection(const Matrix& target,
                                    const Preconditioner& pc,
                                    const QuantGrid& grid) {
  return project(pc.to_original(target), grid);
}

struct RefreshOutcome {
  SolverState state;
  bool accepted = false;
  double old_distance = 0.0;  // squared, scaled coordinates
  double new_distance = 0.0;
};

/// Refits the grid on Σ·target, re-projects the same target, and keeps the
/// new grid only if the D-update distance does not grow. On acceptance the
/// dual absorbs the jump: V += ρ(D_old - D_new).
inline RefreshOutcome maybe_refresh_grid(const SolverState& state,
                                         const Preconditioner& pc,
                                         const GridSpec& spec,
                                         FitMode fitting) {
  RefreshOutcome out{state};
  const Matrix original_target = pc.to_original(state.target);
  const QuantGrid fresh = fit_grid(original_target, spec, fitting);
  Projection proj = project(original_target, fresh);
  Matrix d_new = pc.to_scaled(proj.quantized);
  out.old_distance = squared_distance(state.d, state.target);
  out.new_distance = squared_distance(d_new, state.target);
  if (!(out.new_distance <= out.old_distance)) return out;

  out.accepted = true;
  SolverState& s = out.state;
  auto vv = s.v.values();
  auto dold = state.d.values();
  auto dnew = d_new.values();
  for (std::size_t k = 0; k < vv.size(); ++k) {
    vv[k] += s.rho * (dold[k] - dnew[k]);
  }
  s.d = std::move(d_new);
  s.grid = fresh;
  s.codes = std::move(proj.coded);
  s.refresh_accepted = true;
  return out;
}

/// Step-by-step ADMM driver. solve_admmq runs it to completion; tests drive
/// it directly to inspect intermediate state.
class AdmmRun {
 public:
  AdmmRun(const LayerProblem& problem, const AdmmConfig& config)
      : original_(problem), config_(config) {
    config_.validate();
    original_.validate();
    if (config_.precondition) {
      auto pre = precondition(original_);
      scaled_ = std::move(pre.scaled);
      pc_ = std::move(pre.preconditioner);
    } else {
      scaled_ = original_;
      pc_ = Preconditioner::identity(original_.n());
    }
    eig_ = sym_eig(scaled_.hessian);
    if (!(eig_.eigenvalues.front() > 0.0)) {
      throw NotPositiveDefinite("ADMM requires a positive definite Hessian",
                                eig_.eigenvalues.front());
    }
    h_w_hat_ = matmul(scaled_.hessian.matrix(), scaled_.w_hat);

    state_.grid = fit_grid(original_.w_hat, config_.grid, config_.fitting);
    state_.d = scaled_.w_hat;
    state_.w = scaled_.w_hat;
    state_.v = Matrix(original_.n(), original_.p());
    state_.target = scaled_.w_hat;
    // D⁽⁰⁾ = Ŵ is generally off-grid; the codes are only meaningful after
    // the first projection.
    state_.codes = project(original_.w_hat, state_.grid).coded;
    state_.rho = rho_schedule(0, config_);
  }

  const SolverState& state() const { return state_; }
  const ConvergenceTrace& trace() const { return trace_; }
  const Preconditioner& preconditioner() const { return pc_; }
  const LayerProblem& scaled_problem() const { return scaled_; }
  const EigenFactorization& eigen() const { return eig_; }
  const Matrix& scaled_hessian_times_w_hat() const { return h_w_hat_; }
  bool finished() const { return done_; }

  /// One ADMM iteration (plus the refresh attempt when scheduled).
  const IterationRecord& step() {
    if (done_) throw Error("ADMM run already finished");
    SolverState& s = state_;
    const int t = s.t;
    const double rho = rho_schedule(t, config_);
    s.rho = rho;

    s.w = admm_w_update(eig_, h_w_hat_, s.d, s.v, rho);
    if (!all_finite(s.w)) throw DivergenceError(t);

    s.target = s.w;
    {
      auto tv = s.target.values();
      auto vv = s.v.values();
      for (std::size_t k = 0; k < tv.size(); ++k) tv[k] += vv[k] / rho;
    }
    if (!all_finite(s.target)) throw DivergenceError(t);

    const Matrix previous_d = s.d;
    Projection proj = admm_d_projection(s.target, pc_, s.grid);
    s.d = pc_.to_scaled(proj.quantized);
    s.codes = std::move(proj.coded);

    {
      auto vv = s.v.values();
      auto wv = s.w.values();
      auto dv = s.d.values();
      for (std::size_t k = 0; k < vv.size(); ++k) {
        vv[k] += rho * (wv[k] - dv[k]);
      }
    }

    IterationRecord rec;
    rec.t = t;
    rec.rho = rho;
    const double scale = std::sqrt(static_cast<double>(original_.n() *
                                                       original_.p()));
    const bool converged =
        std::sqrt(squared_distance(s.w, s.d)) / scale <
        config_.primal_tolerance;
    if (config_.refresh && !refresh_attempted_ &&
        (t == config_.refresh_at() || converged)) {
      refresh_attempted_ = true;
      RefreshOutcome r =
          maybe_refresh_grid(s, pc_, config_.grid, config_.fitting);
      rec.refresh_attempted = true;
      rec.refresh_accepted = r.accepted;
      rec.refresh_old_distance = r.old_distance;
      rec.refresh_new_distance = r.new_distance;
      if (r.accepted) s = std::move(r.state);
    }
    if (!all_finite(s.v)) throw DivergenceError(t);

    const Residuals res = residuals(s, previous_d);
    rec.primal = res.primal;
    rec.d_change = res.d_change;
    rec.objective = objective(original_, s.codes.decode());
    trace_.records.push_back(rec);

    s.t = t + 1;
    if (s.t >= config_.iterations ||
        res.primal / scale < config_.primal_tolerance) {
      done_ = true;
    }
    return trace_.records.back();
  }

  void run() {
    while (!done_) step();
  }

  /// Σ·D decoded from the codes, before local search.
  QuantizedSolution admm_solution() const {
    QuantizedSolution sol = make_solution(original_, state_.codes, "admmq");
    sol.iterations = static_cast<int>(trace_.records.size());
    sol.refresh_accepted = state_.refresh_accepted;
    return sol;
  }

  /// ADMM result followed by pair-swap refinement in original coordinates.
  QuantizedSolution finish() const {
    QuantizedSolution sol = admm_solution();
    if (config_.local_search.rounds > 0) {
      sol = pair_swap_refine(original_, std::move(sol), config_.local_search)
                .solution;
    }
    return sol;
  }

 private:
  LayerProblem original_;
  LayerProblem scaled_;
  AdmmConfig config_;
  Preconditioner pc_;
  EigenFactorization eig_;
  Matrix h_w_hat_;
  SolverState state_;
  ConvergenceTrace trace_;
  bool refresh_attempted_ = false;
  bool done_ = false;
};

struct AdmmResult {
  QuantizedSolution solution;
  ConvergenceTrace trace;
};

inline AdmmResult solve_admmq(const LayerProblem& problem,
                              const AdmmConfig& config) {
  AdmmRun run(problem, config);
  run.run();
  return {run.finish(), run.trace()};
}

}  // namespace admmq
