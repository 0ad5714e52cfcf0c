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

// Uniform quantization grids: fitting (min-max and MSE clipping search),
// nearest-point projection, and integer code storage.
//
// Weights are n x p (input dims by output channels). Per-channel grids hold
// one (scale, zero) per column; group(g) grids split each column into
// contiguous blocks of g rows.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "admmq/error.hpp"
#include "admmq/matrix.hpp"

namespace admmq {

/// Smallest scale ever used; constant groups get exactly this.
inline constexpr double kScaleFloor = 1e-12;

enum class Granularity { kPerTensor, kPerChannel, kGroup };

inline std::string to_string(Granularity g) {
  switch (g) {
    case Granularity::kPerTensor: return "per-tensor";
    case Granularity::kPerChannel: return "per-channel";
    case Granularity::kGroup: return "group";
  }
  return "unknown";
}

struct GridSpec {
  int bits = 4;
  bool symmetric = false;
  Granularity granularity = Granularity::kPerChannel;
  std::size_t group_size = 0;  // only for kGroup

  void validate() const {
    if (bits < 2 || bits > 8) {
      throw InvalidArgument("bit-width must be in [2, 8], got " +
                            std::to_string(bits));
    }
    if (granularity == Granularity::kGroup && group_size == 0) {
      throw InvalidArgument("group granularity requires group size >= 1");
    }
  }

  std::uint32_t levels() const { return std::uint32_t{1} << bits; }
  std::uint32_t max_code() const { return levels() - 1; }

  /// "per-channel", "per-tensor" or "g128".
  std::string label() const {
    if (granularity == Granularity::kGroup) {
      return "g" + std::to_string(group_size);
    }
    return to_string(granularity);
  }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// The value of level k on a grid with the given zero-point and scale.
/// Every decode in the library goes through here so results are bit-exact.
inline double level_value(double zero, double scale, std::uint32_t k) {
  return zero + static_cast<double>(k) * scale;
}

class QuantGrid {
 public:
  QuantGrid() = default;
  QuantGrid(GridSpec spec, std::size_t rows, std::size_t cols,
            std::vector<double> scales, std::vector<double> zeros)
      : spec_(spec),
        rows_(rows),
        cols_(cols),
        scales_(std::move(scales)),
        zeros_(std::move(zeros)) {
    spec_.validate();
    check_layout(spec_, rows_, cols_);
    if (scales_.size() != group_count() || zeros_.size() != group_count()) {
      throw InvalidArgument("grid parameter count does not match layout");
    }
    for (std::size_t g = 0; g < scales_.size(); ++g) {
      if (!(scales_[g] > 0.0) || !std::isfinite(scales_[g]) ||
          !std::isfinite(zeros_[g])) {
        throw InvalidArgument("grid group " + std::to_string(g) +
                              " has an invalid scale or zero-point");
      }
    }
  }

  static void check_layout(const GridSpec& spec, std::size_t rows,
                           std::size_t cols) {
    if (rows == 0 || cols == 0) {
      throw InvalidArgument("grid groups must be non-empty");
    }
    if (spec.granularity == Granularity::kGroup &&
        rows % spec.group_size != 0) {
      throw InvalidArgument("group size " + std::to_string(spec.group_size) +
                            " does not divide " + std::to_string(rows) +
                            " rows");
    }
  }

  static std::size_t group_count_for(const GridSpec& spec, std::size_t rows,
                                     std::size_t cols) {
    switch (spec.granularity) {
      case Granularity::kPerTensor: return 1;
      case Granularity::kPerChannel: return cols;
      case Granularity::kGroup: return cols * (rows / spec.group_size);
    }
    return 0;
  }

  const GridSpec& spec() const { return spec_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t group_count() const {
    return group_count_for(spec_, rows_, cols_);
  }

  std::size_t group_of(std::size_t i, std::size_t j) const {
    switch (spec_.granularity) {
      case Granularity::kPerTensor: return 0;
      case Granularity::kPerChannel: return j;
      case Granularity::kGroup:
        return j * (rows_ / spec_.group_size) + i / spec_.group_size;
    }
    return 0;
  }

  double scale(std::size_t group) const { return scales_[group]; }
  double zero(std::size_t group) const { return zeros_[group]; }
  double scale_at(std::size_t i, std::size_t j) const {
    return scales_[group_of(i, j)];
  }
  const std::vector<double>& scales() const { return scales_; }
  const std::vector<double>& zeros() const { return zeros_; }

  double value(std::size_t i, std::size_t j, std::uint32_t k) const {
    const std::size_t g = group_of(i, j);
    return level_value(zeros_[g], scales_[g], k);
  }

  /// Nearest code for v in the group at (i, j): round half away from zero,
  /// then clamp to [0, 2^b - 1].
  std::uint32_t nearest_code(std::size_t i, std::size_t j, double v) const {
    const std::size_t g = group_of(i, j);
    const double pos = std::round((v - zeros_[g]) / scales_[g]);
    if (!(pos > 0.0)) return 0;
    const double top = static_cast<double>(spec_.max_code());
    if (pos >= top) return spec_.max_code();
    return static_cast<std::uint32_t>(pos);
  }

  friend bool operator==(const QuantGrid&, const QuantGrid&) = default;

 private:
  GridSpec spec_;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> scales_;
  std::vector<double> zeros_;
};

/// Integer codes plus the grid they index. Codes fit in 8 bits for b <= 8.
struct CodedMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> codes;
  QuantGrid grid;

  std::uint32_t code(std::size_t i, std::size_t j) const {
    return codes[i * cols + j];
  }
  void set_code(std::size_t i, std::size_t j, std::uint32_t k) {
    codes[i * cols + j] = static_cast<std::uint8_t>(k);
  }

  Matrix decode() const {
    Matrix out(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j)
        out(i, j) = grid.value(i, j, code(i, j));
    return out;
  }

  friend bool operator==(const CodedMatrix&, const CodedMatrix&) = default;
};

struct Projection {
  Matrix quantized;
  CodedMatrix coded;
};

inline Projection project(const Matrix& values, const QuantGrid& grid) {
  if (values.rows() != grid.rows() || values.cols() != grid.cols()) {
    throw InvalidArgument("projection shape " + values.shape_string() +
                          " does not match grid layout " +
                          std::to_string(grid.rows()) + "x" +
                          std::to_string(grid.cols()));
  }
  Projection out;
  out.coded.rows = values.rows();
  out.coded.cols = values.cols();
  out.coded.codes.resize(values.size());
  out.coded.grid = grid;
  out.quantized = Matrix(values.rows(), values.cols());
  for (std::size_t i = 0; i < values.rows(); ++i) {
    for (std::size_t j = 0; j < values.cols(); ++j) {
      const double v = values(i, j);
      if (!std::isfinite(v)) {
        throw InvalidArgument("cannot project a non-finite value");
      }
      const std::uint32_t k = grid.nearest_code(i, j, v);
      out.coded.set_code(i, j, k);
      out.quantized(i, j) = grid.value(i, j, k);
    }
  }
  return out;
}

enum class FitMode { kMinMax, kMseClip };

inline std::string to_string(FitMode m) {
  return m == FitMode::kMinMax ? "minmax" : "mse_clip";
}

namespace detail {

struct GroupRange {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  double max_abs = 0.0;
  std::size_t count = 0;
};

inline std::vector<GroupRange> group_ranges(const Matrix& values,
                                            const GridSpec& spec) {
  spec.validate();
  QuantGrid::check_layout(spec, values.rows(), values.cols());
  std::vector<GroupRange> ranges(
      QuantGrid::group_count_for(spec, values.rows(), values.cols()));
  // A throwaway grid gives the shared group_of mapping.
  const QuantGrid layout(spec, values.rows(), values.cols(),
                         std::vector<double>(ranges.size(), 1.0),
                         std::vector<double>(ranges.size(), 0.0));
  for (std::size_t i = 0; i < values.rows(); ++i) {
    for (std::size_t j = 0; j < values.cols(); ++j) {
      const double v = values(i, j);
      if (!std::isfinite(v)) {
        throw InvalidArgument("grid fitting requires finite values");
      }
      GroupRange& r = ranges[layout.group_of(i, j)];
      r.lo = std::min(r.lo, v);
      r.hi = std::max(r.hi, v);
      r.max_abs = std::max(r.max_abs, std::abs(v));
      ++r.count;
    }
  }
  for (std::size_t g = 0; g < ranges.size(); ++g) {
    if (ranges[g].count == 0) {
      throw InvalidArgument("grid group " + std::to_string(g) + " is empty");
    }
  }
  return ranges;
}

/// (scale, zero) for one group with its range shrunk by `ratio`.
/// Asymmetric ranges shrink about their midpoint; symmetric ranges shrink
/// max|v|. ratio == 1 is exactly the min-max fit.
inline std::pair<double, double> group_params(const GroupRange& r,
                                              const GridSpec& spec,
                                              double ratio) {
  if (spec.symmetric) {
    const double half = static_cast<double>(spec.levels() / 2);
    const double m = ratio == 1.0 ? r.max_abs : r.max_abs * ratio;
    double scale = m / (half - 1.0);
    if (!(scale >= kScaleFloor)) scale = kScaleFloor;
    return {scale, -half * scale};
  }
  double lo = r.lo;
  double hi = r.hi;
  if (ratio != 1.0) {
    const double mid = 0.5 * (r.lo + r.hi);
    const double half_range = 0.5 * (r.hi - r.lo) * ratio;
    lo = mid - half_range;
    hi = mid + half_range;
  }
  double scale = (hi - lo) / static_cast<double>(spec.max_code());
  if (!(scale >= kScaleFloor)) scale = kScaleFloor;
  return {scale, lo};
}

}  // namespace detail

/// Min-max grid without clipping.
inline QuantGrid fit_minmax(const Matrix& values, const GridSpec& spec) {
  const auto ranges = detail::group_ranges(values, spec);
  std::vector<double> scales(ranges.size());
  std::vector<double> zeros(ranges.size());
  for (std::size_t g = 0; g < ranges.size(); ++g) {
    std::tie(scales[g], zeros[g]) = detail::group_params(ranges[g], spec, 1.0);
  }
  return QuantGrid(spec, values.rows(), values.cols(), std::move(scales),
                   std::move(zeros));
}

inline constexpr int kClipSearchPoints = 100;
inline constexpr double kClipMaxShrink = 0.8;

struct ClipSearch {
  QuantGrid grid;
  std::vector<double> ratios;  // chosen shrink ratio per group
};

/// Shrink ratio number m of the clipping search, m = 0 is 1.0 and
/// m = points - 1 is the shrink floor.
inline double clip_ratio(int m, int points = kClipSearchPoints,
                         double floor = kClipMaxShrink) {
  return 1.0 - (1.0 - floor) * static_cast<double>(m) /
                   static_cast<double>(points - 1);
}

/// MSE clipping search over 100 evenly spaced shrink ratios in [0.8, 1.0].
/// Each group picks the ratio with the smallest (optionally row-weighted)
/// squared projection error; ties go to the larger ratio.
inline ClipSearch fit_mse_clip_detailed(
    const Matrix& values, const GridSpec& spec,
    std::optional<std::span<const double>> row_weights = std::nullopt) {
  if (row_weights && row_weights->size() != values.rows()) {
    throw InvalidArgument("row weight count does not match row count");
  }
  if (row_weights) {
    for (double w : *row_weights) {
      if (!(w > 0.0) || !std::isfinite(w)) {
        throw InvalidArgument("row weights must be positive and finite");
      }
    }
  }
  const auto ranges = detail::group_ranges(values, spec);
  const std::size_t groups = ranges.size();
  std::vector<double> scales(groups);
  std::vector<double> zeros(groups);
  std::vector<double> best_err(groups, std::numeric_limits<double>::infinity());
  std::vector<double> best_ratio(groups, 1.0);

  std::vector<double> cand_scales(groups);
  std::vector<double> cand_zeros(groups);
  std::vector<double> err(groups);
  for (int m = 0; m < kClipSearchPoints; ++m) {
    const double ratio = clip_ratio(m);
    for (std::size_t g = 0; g < groups; ++g) {
      std::tie(cand_scales[g], cand_zeros[g]) =
          detail::group_params(ranges[g], spec, ratio);
    }
    const QuantGrid cand(spec, values.rows(), values.cols(), cand_scales,
                         cand_zeros);
    std::fill(err.begin(), err.end(), 0.0);
    for (std::size_t i = 0; i < values.rows(); ++i) {
      const double w = row_weights ? (*row_weights)[i] : 1.0;
      for (std::size_t j = 0; j < values.cols(); ++j) {
        const double v = values(i, j);
        const double q = cand.value(i, j, cand.nearest_code(i, j, v));
        err[cand.group_of(i, j)] += w * (v - q) * (v - q);
      }
    }
    for (std::size_t g = 0; g < groups; ++g) {
      if (err[g] < best_err[g]) {
        best_err[g] = err[g];
        best_ratio[g] = ratio;
        scales[g] = cand_scales[g];
        zeros[g] = cand_zeros[g];
      }
    }
  }
  return {QuantGrid(spec, values.rows(), values.cols(), std::move(scales),
                    std::move(zeros)),
          std::move(best_ratio)};
}

inline QuantGrid fit_mse_clip(
    const Matrix& values, const GridSpec& spec,
    std::optional<std::span<const double>> row_weights = std::nullopt) {
  return fit_mse_clip_detailed(values, spec, row_weights).grid;
}

inline QuantGrid fit_grid(const Matrix& values, const GridSpec& spec,
                          FitMode mode) {
  return mode == FitMode::kMinMax ? fit_minmax(values, spec)
                                  : fit_mse_clip(values, spec);
}

/// Σ (v - proj(v))² over all entries.
inline double projection_error(const Matrix& values, const QuantGrid& grid) {
  return squared_distance(values, project(values, grid).quantized);
}

}  // namespace admmq
