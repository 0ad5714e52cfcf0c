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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "admmq/grid.hpp"
#include "support.hpp"

namespace admmq {
namespace {

GridSpec spec_of(int bits, bool symmetric = false,
                 Granularity g = Granularity::kPerTensor,
                 std::size_t group_size = 0) {
  GridSpec s;
  s.bits = bits;
  s.symmetric = symmetric;
  s.granularity = g;
  s.group_size = group_size;
  return s;
}

QuantGrid scalar_grid(int bits, double scale, double zero) {
  return QuantGrid(spec_of(bits), 1, 1, {scale}, {zero});
}

double project_scalar(const QuantGrid& g, double v) {
  return project(Matrix{{v}}, g).quantized(0, 0);
}

TEST(GridSpecTest, Validation) {
  EXPECT_THROW(spec_of(1).validate(), InvalidArgument);
  EXPECT_THROW(spec_of(9).validate(), InvalidArgument);
  EXPECT_NO_THROW(spec_of(2).validate());
  EXPECT_NO_THROW(spec_of(8).validate());
  EXPECT_THROW(spec_of(4, false, Granularity::kGroup, 0).validate(),
               InvalidArgument);
  EXPECT_EQ(spec_of(3).levels(), 8u);
  EXPECT_EQ(spec_of(4, false, Granularity::kGroup, 128).label(), "g128");
}

TEST(FitMinMaxTest, AsymmetricFormula) {
  const QuantGrid g = fit_minmax(Matrix{{-1.0}, {0.0}, {2.0}}, spec_of(2));
  EXPECT_DOUBLE_EQ(g.scale(0), 1.0);
  EXPECT_DOUBLE_EQ(g.zero(0), -1.0);
}

TEST(FitMinMaxTest, SymmetricFormula) {
  const QuantGrid g = fit_minmax(Matrix{{-2.0}, {1.0}}, spec_of(3, true));
  EXPECT_DOUBLE_EQ(g.scale(0), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(g.zero(0), -4.0 * (2.0 / 3.0));
  // Level 2^{b-1} is exactly zero.
  EXPECT_EQ(g.value(0, 0, 4), 0.0);
}

TEST(FitMinMaxTest, ConstantGroupUsesFloor) {
  const QuantGrid zeros = fit_minmax(Matrix(3, 1), spec_of(4));
  EXPECT_EQ(zeros.scale(0), kScaleFloor);
  EXPECT_EQ(project(Matrix(3, 1), zeros).quantized, Matrix(3, 1));

  const Matrix c{{0.7}, {0.7}};
  const QuantGrid g = fit_minmax(c, spec_of(3));
  EXPECT_EQ(g.scale(0), kScaleFloor);
  EXPECT_EQ(g.zero(0), 0.7);
  EXPECT_EQ(project(c, g).quantized, c);
}

TEST(FitMinMaxTest, RejectsNonFiniteAndBadLayout) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(fit_minmax(Matrix{{1.0}, {nan}}, spec_of(3)), InvalidArgument);
  EXPECT_THROW(fit_minmax(Matrix(0, 0), spec_of(3)), InvalidArgument);
  EXPECT_THROW(
      fit_minmax(Matrix(6, 2), spec_of(3, false, Granularity::kGroup, 4)),
      InvalidArgument);
}

TEST(GranularityTest, GroupLayout) {
  std::mt19937_64 rng(1);
  const Matrix v = testing::gaussian(8, 3, rng);
  const QuantGrid per_tensor = fit_minmax(v, spec_of(3));
  const QuantGrid per_channel =
      fit_minmax(v, spec_of(3, false, Granularity::kPerChannel));
  const QuantGrid grouped =
      fit_minmax(v, spec_of(3, false, Granularity::kGroup, 4));
  EXPECT_EQ(per_tensor.group_count(), 1u);
  EXPECT_EQ(per_channel.group_count(), 3u);
  EXPECT_EQ(grouped.group_count(), 6u);
  // Group (row block, column) pairs are distinct and each is fitted only on
  // its own entries.
  for (std::size_t j = 0; j < 3; ++j) {
    double lo = v(0, j);
    for (std::size_t i = 0; i < 8; ++i) lo = std::min(lo, v(i, j));
    EXPECT_EQ(per_channel.zero(per_channel.group_of(0, j)), lo);
    for (std::size_t block = 0; block < 2; ++block) {
      double blo = v(4 * block, j);
      for (std::size_t i = 4 * block; i < 4 * block + 4; ++i)
        blo = std::min(blo, v(i, j));
      EXPECT_EQ(grouped.zero(grouped.group_of(4 * block, j)), blo);
      EXPECT_EQ(grouped.group_of(4 * block, j),
                grouped.group_of(4 * block + 3, j));
    }
  }
}

TEST(ProjectTest, GridPointAndRounding) {
  const QuantGrid g = scalar_grid(2, 1.0, 0.0);
  const auto p0 = project(Matrix{{0.0}}, g);
  EXPECT_EQ(p0.quantized(0, 0), 0.0);
  EXPECT_EQ(p0.coded.code(0, 0), 0u);
  const auto lo = project(Matrix{{2.49}}, g);
  EXPECT_EQ(lo.quantized(0, 0), 2.0);
  EXPECT_EQ(lo.coded.code(0, 0), 2u);
  const auto hi = project(Matrix{{2.51}}, g);
  EXPECT_EQ(hi.quantized(0, 0), 3.0);
  EXPECT_EQ(hi.coded.code(0, 0), 3u);
}

TEST(ProjectTest, ClampsToBounds) {
  const QuantGrid g = scalar_grid(2, 1.0, 0.0);
  EXPECT_EQ(project_scalar(g, 7.3), 3.0);
  EXPECT_EQ(project_scalar(g, -4.0), 0.0);
}

TEST(ProjectTest, TiesRoundAwayFromZero) {
  const QuantGrid g = scalar_grid(3, 1.0, 0.0);
  EXPECT_EQ(project_scalar(g, 1.5), 2.0);
  EXPECT_EQ(project_scalar(g, 2.5), 3.0);
}

TEST(ProjectTest, RejectsMismatchAndNonFinite) {
  const QuantGrid g = scalar_grid(2, 1.0, 0.0);
  EXPECT_THROW(project(Matrix(2, 1), g), InvalidArgument);
  EXPECT_THROW(project(Matrix{{std::numeric_limits<double>::infinity()}}, g),
               InvalidArgument);
}

TEST(ProjectTest, MatchesExhaustiveArgmin) {
  std::mt19937_64 rng(7);
  for (int bits : {2, 3, 4}) {
    for (bool sym : {false, true}) {
      const Matrix fit = testing::gaussian(10, 4, rng);
      const QuantGrid g =
          fit_minmax(fit, spec_of(bits, sym, Granularity::kPerChannel));
      const Matrix v = testing::gaussian(10, 4, rng, 1.5);
      const auto p = project(v, g);
      for (std::size_t i = 0; i < 10; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
          EXPECT_EQ(p.coded.code(i, j),
                    testing::exhaustive_nearest(g, i, j, v(i, j)));
          EXPECT_LE(p.coded.code(i, j), g.spec().max_code());
        }
    }
  }
}

TEST(ProjectTest, IdempotentAndDecodeExact) {
  std::mt19937_64 rng(9);
  const Matrix v = testing::gaussian(16, 5, rng);
  const QuantGrid g = fit_mse_clip(v, spec_of(3, false, Granularity::kGroup, 8));
  const auto first = project(v, g);
  const auto second = project(first.quantized, g);
  EXPECT_EQ(second.quantized, first.quantized);
  EXPECT_EQ(second.coded, first.coded);
  EXPECT_EQ(first.coded.decode(), first.quantized);
}

TEST(FitMseClipTest, OnGridValuesKeepFullRange) {
  const Matrix v{{-1.0}, {0.0}, {1.0}, {2.0}};
  const ClipSearch s = fit_mse_clip_detailed(v, spec_of(2));
  EXPECT_EQ(s.ratios[0], 1.0);
  EXPECT_EQ(projection_error(v, s.grid), 0.0);
  EXPECT_EQ(s.grid, fit_minmax(v, spec_of(2)));
}

TEST(FitMseClipTest, SingleValueTiesToFullRange) {
  const Matrix v{{0.3, -2.0, 5.0}};
  const ClipSearch s =
      fit_mse_clip_detailed(v, spec_of(3, false, Granularity::kPerChannel));
  for (double r : s.ratios) EXPECT_EQ(r, 1.0);
}

TEST(FitMseClipTest, NeverWorseThanMinMax) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    for (bool sym : {false, true}) {
      const Matrix v = testing::gaussian(256, 1, rng);
      const GridSpec s = spec_of(3, sym);
      EXPECT_LE(projection_error(v, fit_mse_clip(v, s)),
                projection_error(v, fit_minmax(v, s)));
    }
  }
}

TEST(FitMseClipTest, ClipsHeavyTails) {
  // One far outlier among many small values: shrinking pays off.
  std::mt19937_64 rng(15);
  Matrix v = testing::gaussian(256, 1, rng, 0.1);
  v(255, 0) = 3.0;
  const ClipSearch s = fit_mse_clip_detailed(v, spec_of(2));
  EXPECT_LT(s.ratios[0], 1.0);
  EXPECT_LT(projection_error(v, s.grid),
            projection_error(v, fit_minmax(v, spec_of(2))));
}

TEST(FitMseClipTest, RatioGrid) {
  EXPECT_EQ(clip_ratio(0), 1.0);
  EXPECT_NEAR(clip_ratio(99), 0.8, 1e-15);
  EXPECT_NEAR(clip_ratio(1) - clip_ratio(2), 0.2 / 99.0, 1e-15);
}

TEST(FitMseClipTest, WeightedSearchMatchesBruteForce) {
  std::mt19937_64 rng(19);
  const Matrix v = testing::gaussian(32, 1, rng);
  std::vector<double> w(32);
  std::uniform_real_distribution<double> u(0.1, 5.0);
  for (double& x : w) x = u(rng);
  const GridSpec s = spec_of(3);
  const ClipSearch got = fit_mse_clip_detailed(v, s, std::span<const double>(w));
  // Reference: weighted error of every candidate ratio computed directly.
  double best = std::numeric_limits<double>::infinity();
  double best_ratio = 0.0;
  double lo = v(0, 0), hi = v(0, 0);
  for (double x : v.values()) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  for (int m = 0; m < 100; ++m) {
    const double r = 1.0 - 0.2 * m / 99.0;
    const double mid = 0.5 * (lo + hi);
    const double half = 0.5 * (hi - lo) * r;
    const QuantGrid g(s, 32, 1, {(2.0 * half) / 7.0}, {mid - half});
    double err = 0.0;
    for (std::size_t i = 0; i < 32; ++i) {
      const double q = g.value(i, 0, testing::exhaustive_nearest(g, i, 0, v(i, 0)));
      err += w[i] * (v(i, 0) - q) * (v(i, 0) - q);
    }
    if (err < best * (1.0 - 1e-12)) {
      best = err;
      best_ratio = r;
    }
  }
  EXPECT_NEAR(got.ratios[0], best_ratio, 1e-12);
  EXPECT_THROW(fit_mse_clip(v, s, std::span<const double>(w.data(), 3)),
               InvalidArgument);
}

}  // namespace
}  // namespace admmq
