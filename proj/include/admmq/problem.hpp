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

// The layer-wise reconstruction problem
//
//   min_W  1/2 Tr((W - Ŵ)ᵀ H (W - Ŵ))   s.t. W on the quantization grid,
//
// with H = XᵀX + λI + damping·I, together with the diagonal preconditioner
// and the equivalent scaling / rotation rewrites of the same problem.

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "admmq/error.hpp"
#include "admmq/linalg.hpp"
#include "admmq/matrix.hpp"

namespace admmq {

/// N x n calibration activations.
struct CalibrationBatch {
  Matrix activations;

  void validate() const {
    if (activations.rows() == 0) {
      throw InvalidArgument("calibration batch needs at least one sample");
    }
    if (activations.cols() == 0) {
      throw InvalidArgument("calibration batch has no input channels");
    }
    if (!all_finite(activations)) {
      throw InvalidArgument("calibration batch contains non-finite values");
    }
  }
};

enum class DampingConvention {
  kTrace,         // damp · Tr(XᵀX)
  kMeanDiagonal,  // damp · Tr(XᵀX) / n
};

inline constexpr double kDefaultDampFactor = 0.01;

struct HessianBuild {
  SymmetricMatrix hessian;
  double damping = 0.0;  // the constant added to the diagonal by damping
};

/// Streaming XᵀX accumulation over calibration batches.
class HessianAccumulator {
 public:
  explicit HessianAccumulator(std::size_t n) : gram_(n, n) {
    if (n == 0) throw InvalidArgument("Hessian order must be >= 1");
  }

  void add(const CalibrationBatch& batch) {
    batch.validate();
    if (batch.activations.cols() != gram_.rows()) {
      throw InvalidArgument("batch has " +
                            std::to_string(batch.activations.cols()) +
                            " channels, expected " +
                            std::to_string(gram_.rows()));
    }
    gram_ += matmul_tn(batch.activations, batch.activations);
    samples_ += batch.activations.rows();
  }

  std::size_t samples() const { return samples_; }
  const Matrix& gram() const { return gram_; }

  HessianBuild finish(double lambda, double damp_factor,
                      DampingConvention convention =
                          DampingConvention::kTrace) const {
    return shifted_gram(gram_, lambda, damp_factor, convention);
  }

  /// H = G + λI + damping·I for a given Gram matrix G.
  static HessianBuild shifted_gram(const Matrix& gram, double lambda,
                                   double damp_factor,
                                   DampingConvention convention) {
    if (!(lambda >= 0.0) || !(damp_factor >= 0.0)) {
      throw InvalidArgument("lambda and damping factor must be >= 0");
    }
    double damping = damp_factor * trace(gram);
    if (convention == DampingConvention::kMeanDiagonal) {
      damping /= static_cast<double>(gram.rows());
    }
    Matrix h = gram;
    for (std::size_t i = 0; i < h.rows(); ++i) h(i, i) += lambda + damping;
    return {SymmetricMatrix::symmetrized(std::move(h)), damping};
  }

 private:
  Matrix gram_;
  std::size_t samples_ = 0;
};

inline HessianBuild build_hessian(
    const CalibrationBatch& batch, double lambda, double damp_factor,
    DampingConvention convention = DampingConvention::kTrace) {
  batch.validate();
  HessianAccumulator acc(batch.activations.cols());
  acc.add(batch);
  return acc.finish(lambda, damp_factor, convention);
}

/// One layer's quantization problem.
struct LayerProblem {
  Matrix w_hat;             // n x p pre-trained weights
  SymmetricMatrix hessian;  // n x n
  double lambda = 0.0;
  double damping = 0.0;

  std::size_t n() const { return w_hat.rows(); }
  std::size_t p() const { return w_hat.cols(); }

  void validate() const {
    if (w_hat.rows() == 0 || w_hat.cols() == 0) {
      throw InvalidArgument("layer weights must be non-empty");
    }
    if (hessian.order() != w_hat.rows()) {
      throw InvalidArgument("Hessian order " +
                            std::to_string(hessian.order()) +
                            " does not match weight rows " +
                            std::to_string(w_hat.rows()));
    }
    if (!all_finite(w_hat) || !all_finite(hessian.matrix())) {
      throw InvalidArgument("layer problem contains non-finite values");
    }
  }
};

inline LayerProblem make_problem(Matrix w_hat, const HessianBuild& h,
                                 double lambda) {
  LayerProblem p{std::move(w_hat), h.hessian, lambda, h.damping};
  p.validate();
  return p;
}

/// 1/2 Σ_j e_jᵀ H e_j with E = W - Ŵ, clamped at 0.
inline double objective(const LayerProblem& problem, const Matrix& w) {
  problem.w_hat.require_same_shape(w, "objective");
  const Matrix e = w - problem.w_hat;
  const Matrix he = matmul(problem.hessian.matrix(), e);
  double s = 0.0;
  auto ev = e.values();
  auto hv = he.values();
  for (std::size_t k = 0; k < ev.size(); ++k) s += ev[k] * hv[k];
  return std::max(0.0, 0.5 * s);
}

/// Σ = Diag(H)^(-1/2) and its inverse.
struct Preconditioner {
  std::vector<double> sigma;
  std::vector<double> inverse;

  static Preconditioner identity(std::size_t n) {
    return {std::vector<double>(n, 1.0), std::vector<double>(n, 1.0)};
  }

  Matrix to_original(const Matrix& scaled) const {
    return scale_rows(sigma, scaled);
  }
  Matrix to_scaled(const Matrix& original) const {
    return scale_rows(inverse, original);
  }
};

struct PreconditionedProblem {
  LayerProblem scaled;
  Preconditioner preconditioner;
};

/// Ŵ' = Σ⁻¹Ŵ, H' = ΣHΣ (unit diagonal). objective(scaled, Σ⁻¹W) equals
/// objective(original, W).
inline PreconditionedProblem precondition(const LayerProblem& problem) {
  problem.validate();
  const std::size_t n = problem.n();
  Preconditioner pc;
  pc.sigma.resize(n);
  pc.inverse.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = problem.hessian(i, i);
    if (!(d > 0.0)) {
      throw InvalidArgument("cannot precondition: Hessian diagonal entry " +
                            std::to_string(i) + " is " + std::to_string(d));
    }
    const double root = std::sqrt(d);
    pc.sigma[i] = 1.0 / root;
    pc.inverse[i] = root;
  }
  Matrix h = scale_symmetric(pc.sigma, problem.hessian.matrix());
  LayerProblem scaled{pc.to_scaled(problem.w_hat),
                      SymmetricMatrix::symmetrized(std::move(h)),
                      problem.lambda, problem.damping};
  return {std::move(scaled), std::move(pc)};
}

/// Per-channel scaling rewrite: Û = SŴ, H_sc = S⁻¹HS⁻¹.
inline LayerProblem apply_scaling_transform(const LayerProblem& problem,
                                            std::span<const double> s_diag) {
  problem.validate();
  if (s_diag.size() != problem.n()) {
    throw InvalidArgument("scaling vector has " +
                          std::to_string(s_diag.size()) + " entries, expected " +
                          std::to_string(problem.n()));
  }
  std::vector<double> inv(s_diag.size());
  for (std::size_t i = 0; i < s_diag.size(); ++i) {
    if (s_diag[i] == 0.0 || !std::isfinite(s_diag[i])) {
      throw InvalidArgument("scaling entry " + std::to_string(i) +
                            " is zero or non-finite");
    }
    inv[i] = 1.0 / s_diag[i];
  }
  return {scale_rows(s_diag, problem.w_hat),
          SymmetricMatrix::symmetrized(
              scale_symmetric(inv, problem.hessian.matrix())),
          problem.lambda, problem.damping};
}

inline constexpr double kOrthogonalityTolerance = 1e-8;

inline void require_orthogonal(const Matrix& r, const char* name) {
  if (r.rows() != r.cols()) {
    throw InvalidArgument(std::string(name) + " must be square");
  }
  const double resid = orthogonality_residual(r);
  const double tol =
      kOrthogonalityTolerance * std::sqrt(static_cast<double>(r.rows()));
  if (!(resid <= tol)) {
    throw InvalidArgument(std::string(name) +
                          " is not orthogonal: residual " +
                          std::to_string(resid));
  }
}

/// Rotation rewrite: Û = R1ᵀŴR2, H_rot = R1ᵀHR1.
inline LayerProblem apply_rotation_transform(const LayerProblem& problem,
                                             const Matrix& r1,
                                             const Matrix& r2) {
  problem.validate();
  require_orthogonal(r1, "R1");
  require_orthogonal(r2, "R2");
  if (r1.rows() != problem.n() || r2.rows() != problem.p()) {
    throw InvalidArgument("rotation sizes do not match the layer shape");
  }
  Matrix u = matmul(matmul_tn(r1, problem.w_hat), r2);
  Matrix h = matmul(matmul_tn(r1, problem.hessian.matrix()), r1);
  return {std::move(u), SymmetricMatrix::symmetrized(std::move(h)),
          problem.lambda, problem.damping};
}

/// Maps rotated-coordinate weights U back to the original W = R1 U R2ᵀ.
inline Matrix rotate_back(const Matrix& u, const Matrix& r1,
                          const Matrix& r2) {
  return matmul(matmul(r1, u), transpose(r2));
}

enum class OrthogonalKind { kGaussian, kHadamard };

inline bool is_power_of_two(std::size_t n) { return n && !(n & (n - 1)); }

/// Seeded random orthogonal matrix. kGaussian orthonormalizes a Gaussian
/// matrix; kHadamard returns the normalized Sylvester-Hadamard matrix with
/// random column sign flips (n must be a power of two).
inline Matrix random_orthogonal(std::size_t n, std::uint64_t seed,
                                OrthogonalKind kind = OrthogonalKind::kGaussian) {
  if (n == 0) throw InvalidArgument("random_orthogonal requires n >= 1");
  std::mt19937_64 rng(seed);
  if (kind == OrthogonalKind::kHadamard) {
    if (!is_power_of_two(n)) {
      throw InvalidArgument("Hadamard rotation requires a power-of-two size");
    }
    const double norm = 1.0 / std::sqrt(static_cast<double>(n));
    std::bernoulli_distribution flip(0.5);
    std::vector<double> sign(n);
    for (double& s : sign) s = flip(rng) ? -1.0 : 1.0;
    Matrix h(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const bool odd = std::popcount(i & j) & 1;
        h(i, j) = (odd ? -norm : norm) * sign[j];
      }
    return h;
  }

  std::normal_distribution<double> gauss;
  Matrix q(n, n);
  for (double& v : q.values()) v = gauss(rng);
  // Modified Gram-Schmidt over columns, applied twice for orthogonality to
  // working precision.
  for (std::size_t j = 0; j < n; ++j) {
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < j; ++k) {
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += q(i, k) * q(i, j);
        for (std::size_t i = 0; i < n; ++i) q(i, j) -= dot * q(i, k);
      }
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) norm += q(i, j) * q(i, j);
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < n; ++i) q(i, j) /= norm;
  }
  return q;
}

/// Seeded SPD matrix Q diag(d) Qᵀ with eigenvalues log-spaced in
/// [1, condition].
inline SymmetricMatrix random_spd(std::size_t n, double condition,
                                  std::uint64_t seed) {
  if (!(condition >= 1.0)) throw InvalidArgument("condition must be >= 1");
  const Matrix q = random_orthogonal(n, seed);
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
    d[i] = std::pow(condition, t);
  }
  Matrix qd = q;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) qd(i, j) *= d[j];
  return SymmetricMatrix::symmetrized(matmul(qd, transpose(q)));
}

struct SyntheticOptions {
  std::size_t n = 32;
  std::size_t p = 8;
  std::size_t samples = 128;
  double outlier_fraction = 1.0 / 16.0;
  double outlier_factor = 100.0;
  double condition_target = 0.0;  // <= 1 disables the correlation mixing
  std::uint64_t seed = 0;
};

struct SyntheticLayer {
  Matrix w_hat;        // n x p
  Matrix activations;  // N x n
  std::vector<std::size_t> outlier_channels;
};

/// Gaussian weights and activations. With condition_target > 1 the
/// activations are mixed as Z diag(s) Qᵀ so that E[XᵀX] has that condition
/// number. A fraction of input channels is then scaled by outlier_factor.
inline SyntheticLayer generate_layer(const SyntheticOptions& opt) {
  if (opt.n == 0 || opt.p == 0 || opt.samples == 0) {
    throw InvalidArgument("synthetic layer dimensions must be positive");
  }
  if (!(opt.outlier_fraction >= 0.0 && opt.outlier_fraction <= 1.0)) {
    throw InvalidArgument("outlier fraction must lie in [0, 1]");
  }
  if (!(opt.outlier_factor > 0.0)) {
    throw InvalidArgument("outlier factor must be positive");
  }
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> gauss;
  SyntheticLayer out;
  out.w_hat = Matrix(opt.n, opt.p);
  for (double& v : out.w_hat.values()) v = gauss(rng);
  out.activations = Matrix(opt.samples, opt.n);
  for (double& v : out.activations.values()) v = gauss(rng);

  if (opt.condition_target > 1.0) {
    const Matrix q = random_orthogonal(opt.n, rng());
    std::vector<double> s(opt.n);
    for (std::size_t i = 0; i < opt.n; ++i) {
      const double t =
          opt.n == 1 ? 0.0 : static_cast<double>(i) / (opt.n - 1);
      s[i] = std::pow(opt.condition_target, 0.5 * t);
    }
    Matrix z = out.activations;
    for (std::size_t r = 0; r < z.rows(); ++r)
      for (std::size_t c = 0; c < z.cols(); ++c) z(r, c) *= s[c];
    out.activations = matmul(z, transpose(q));
  }

  const auto count = static_cast<std::size_t>(
      std::llround(opt.outlier_fraction * static_cast<double>(opt.n)));
  std::vector<std::size_t> channels(opt.n);
  std::iota(channels.begin(), channels.end(), 0);
  std::shuffle(channels.begin(), channels.end(), rng);
  channels.resize(std::max<std::size_t>(
      opt.outlier_fraction > 0.0 ? 1 : 0, count));
  std::sort(channels.begin(), channels.end());
  for (std::size_t c : channels)
    for (std::size_t r = 0; r < out.activations.rows(); ++r)
      out.activations(r, c) *= opt.outlier_factor;
  out.outlier_channels = std::move(channels);
  return out;
}

/// Spectral condition number λ_max / λ_min (infinite if λ_min <= 0).
inline double condition_number(const SymmetricMatrix& h) {
  const auto eig = sym_eig(h);
  const double lo = eig.eigenvalues.front();
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return eig.eigenvalues.back() / lo;
}

}  // namespace admmq
