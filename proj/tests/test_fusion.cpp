/*
 * Copyright 2026 The SPDrought Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <cmath>

#include "spdrought/fusion.hpp"
#include "spdrought/rng.hpp"

using namespace spdrought;

namespace {

GridSpec land_grid(int rows, int cols) {
  GridSpec spec;
  spec.rows = rows;
  spec.cols = cols;
  spec.weeks = 52;
  spec.land_mask.assign(spec.pixel_count(), 1);
  return spec;
}

FusionParams identity_params(int n) {
  return {Eigen::MatrixXd::Identity(n, n), Eigen::MatrixXd::Identity(n, n)};
}

}  // namespace

TEST(Neighborhood, InteriorPixelHas25Members) {
  const Neighborhood nb = neighborhood({5, 5}, 2, land_grid(10, 10));
  ASSERT_EQ(nb.members.size(), 25u);
  EXPECT_EQ(nb.members[0].pixel, (PixelCoord{5, 5}));
  EXPECT_DOUBLE_EQ(nb.members[0].distance, 0.8);
}

TEST(Neighborhood, CornerIsTruncated) {
  EXPECT_EQ(neighborhood({0, 0}, 2, land_grid(10, 10)).members.size(), 9u);
}

TEST(Neighborhood, EuclideanDistance) {
  const Neighborhood nb = neighborhood({5, 5}, 2, land_grid(10, 10));
  bool found = false;
  for (const auto& m : nb.members) {
    if (m.pixel == PixelCoord{6, 7}) {
      EXPECT_DOUBLE_EQ(m.distance, std::sqrt(5.0));
      found = true;
    }
  }
  EXPECT_TRUE(found);
}

TEST(Neighborhood, OceanNeighboursAreSkipped) {
  GridSpec spec = land_grid(5, 5);
  spec.land_mask[spec.pixel_index({2, 3})] = 0;
  EXPECT_EQ(neighborhood({2, 2}, 1, spec).members.size(), 8u);
}

TEST(SpatialAttention, HandComputedTwoMemberCase) {
  Eigen::VectorXd center(2);
  center << 1, 0;
  Eigen::MatrixXd members(2, 2);
  members << 1, 0, 0, 1;
  // With R = 1 the scale is 1/sqrt(2): logits [0.70711, 0].
  const Eigen::VectorXd w = spatial_attention(center, members, Eigen::VectorXd::Ones(2), identity_params(2));
  const double e = std::exp(1.0 / std::sqrt(2.0));
  EXPECT_NEAR(w(0), e / (e + 1.0), 1e-12);
  EXPECT_NEAR(w(0), 0.6698, 1e-4);
  EXPECT_NEAR(w(1), 0.3302, 1e-4);
}

TEST(SpatialAttention, IdenticalMembersGiveUniformWeights) {
  SplitMix64 rng(3);
  Eigen::VectorXd center = Eigen::VectorXd::NullaryExpr(9, [&] { return rng.uniform(); });
  Eigen::MatrixXd members = center.transpose().replicate(6, 1);
  FusionParams p{Eigen::MatrixXd::NullaryExpr(9, 9, [&] { return rng.normal(); }),
                 Eigen::MatrixXd::NullaryExpr(9, 9, [&] { return rng.normal(); })};
  const Eigen::VectorXd w = spatial_attention(center, members, Eigen::VectorXd::Constant(6, 1.5), p);
  for (int m = 0; m < 6; ++m) EXPECT_NEAR(w(m), 1.0 / 6.0, 1e-12);
}

TEST(SpatialAttention, WeightsSumToOne) {
  SplitMix64 rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 1 + static_cast<int>(rng.below(25));
    Eigen::VectorXd center = Eigen::VectorXd::NullaryExpr(9, [&] { return rng.uniform(); });
    Eigen::MatrixXd members = Eigen::MatrixXd::NullaryExpr(k, 9, [&] { return rng.uniform(); });
    Eigen::VectorXd r = Eigen::VectorXd::NullaryExpr(k, [&] { return rng.uniform(0.8, 3.0); });
    FusionParams p{Eigen::MatrixXd::NullaryExpr(9, 9, [&] { return rng.normal(); }),
                   Eigen::MatrixXd::NullaryExpr(9, 9, [&] { return rng.normal(); })};
    const Eigen::VectorXd w = spatial_attention(center, members, r, p);
    EXPECT_NEAR(w.sum(), 1.0, 1e-12);
    EXPECT_GE(w.minCoeff(), 0.0);
  }
}

TEST(SpatialAttention, NearerMemberWinsWithEqualStatics) {
  Eigen::VectorXd center = Eigen::VectorXd::Constant(3, 0.5);
  Eigen::MatrixXd members = center.transpose().replicate(2, 1);
  Eigen::VectorXd r(2);
  r << 1.0, 2.0;
  const Eigen::VectorXd w = spatial_attention(center, members, r, identity_params(3));
  EXPECT_GT(w(0), w(1));
}

TEST(FuseSeries, DirectArithmetic) {
  Eigen::VectorXd w(2);
  w << 0.25, 0.75;
  Eigen::MatrixXd members(2, 2);  // 1 step x 2 channels
  members << 4, 1, 8, 1;
  const Eigen::MatrixXd out = fuse_series(w, members, 1, 2);
  EXPECT_DOUBLE_EQ(out(0, 0), 7.0);
  EXPECT_DOUBLE_EQ(out(0, 1), 1.0);
}

TEST(FuseSeries, OneHotSelectsMember) {
  SplitMix64 rng(5);
  Eigen::MatrixXd members = Eigen::MatrixXd::NullaryExpr(4, 3 * 14, [&] { return rng.normal(); });
  Eigen::VectorXd w = Eigen::VectorXd::Zero(4);
  w(2) = 1.0;
  const Eigen::MatrixXd out = fuse_series(w, members, 3, 14);
  for (int t = 0; t < 3; ++t) {
    for (int c = 0; c < 14; ++c) EXPECT_EQ(out(t, c), members(2, t * 14 + c));
  }
}

TEST(FuseSeries, SharedSeriesIsReturnedForAnyWeights) {
  SplitMix64 rng(6);
  Eigen::RowVectorXd s = Eigen::RowVectorXd::NullaryExpr(2 * 14, [&] { return rng.normal(); });
  Eigen::MatrixXd members = s.replicate(5, 1);
  Eigen::VectorXd w = Eigen::VectorXd::NullaryExpr(5, [&] { return rng.uniform(); });
  w /= w.sum();
  const Eigen::MatrixXd out = fuse_series(w, members, 2, 14);
  for (int t = 0; t < 2; ++t) {
    for (int c = 0; c < 14; ++c) EXPECT_NEAR(out(t, c), s(t * 14 + c), 1e-12);
  }
}
