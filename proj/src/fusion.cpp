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

#include "spdrought/fusion.hpp"

#include <cmath>

#include "spdrought/error.hpp"

namespace spdrought {
namespace {

template <class Accept>
Neighborhood collect(PixelCoord center, int d, const GridSpec& spec, Accept accept) {
  if (!spec.in_bounds(center) || !spec.is_land(center)) {
    throw Error(ErrorKind::kInvariantViolation, "neighborhood centre must be a land pixel");
  }
  if (d < 0) throw Error(ErrorKind::kConfigError, "neighborhood radius must be >= 0");
  Neighborhood out;
  out.center = center;
  out.members.push_back({center, kSelfDistance});
  for (int dr = -d; dr <= d; ++dr) {
    for (int dc = -d; dc <= d; ++dc) {
      if (dr == 0 && dc == 0) continue;
      const PixelCoord p{center.row + dr, center.col + dc};
      if (!spec.in_bounds(p) || !spec.is_land(p) || !accept(p)) continue;
      out.members.push_back({p, std::sqrt(static_cast<double>(dr * dr + dc * dc))});
    }
  }
  return out;
}

}  // namespace

Neighborhood neighborhood(PixelCoord center, int d, const GridSpec& spec) {
  return collect(center, d, spec, [](PixelCoord) { return true; });
}

Neighborhood neighborhood(PixelCoord center, int d, const Dataset& ds) {
  auto valid = [&](PixelCoord p) {
    const std::size_t i = ds.spec.pixel_index(p);
    for (int f = 0; f < kNumericStaticCount; ++f) {
      if (!std::isfinite(ds.statics.numeric[ds.numeric_offset(i, f)])) return false;
    }
    return true;
  };
  if (!valid(center)) throw Error(ErrorKind::kIsolatedPixel, "centre pixel has no valid static features");
  return collect(center, d, ds.spec, valid);
}

Eigen::VectorXd static_vector(const Dataset& ds, std::size_t pixel) {
  Eigen::VectorXd s(kStaticCount);
  for (int f = 0; f < kNumericStaticCount; ++f) s(f) = ds.statics.numeric[ds.numeric_offset(pixel, f)];
  const int c = ds.statics.categories;
  s(kNumericStaticCount) = c > 1 ? static_cast<double>(ds.statics.land_cover[pixel]) / (c - 1) : 0.0;
  return s;
}

Eigen::VectorXd spatial_attention(const Eigen::VectorXd& center, const Eigen::MatrixXd& members,
                                  const Eigen::VectorXd& distances, const FusionParams& params) {
  const Eigen::Index n = center.size();
  const Eigen::Index k = members.rows();
  if (k < 1 || members.cols() != n || distances.size() != k || params.w_query.rows() != n ||
      params.w_query.cols() != n || params.w_key.rows() != n || params.w_key.cols() != n) {
    throw Error(ErrorKind::kShapeMismatch, "spatial_attention: inconsistent shapes");
  }
  const Eigen::RowVectorXd query = center.transpose() * params.w_query;
  const Eigen::MatrixXd keys = members * params.w_key;
  const double root_n = std::sqrt(static_cast<double>(n));
  Eigen::VectorXd logits(k);
  for (Eigen::Index m = 0; m < k; ++m) {
    if (!(distances(m) > 0.0)) throw Error(ErrorKind::kInvariantViolation, "distances must be positive");
    logits(m) = query.dot(keys.row(m)) / (distances(m) * root_n);
    if (!std::isfinite(logits(m))) throw Error(ErrorKind::kNonFiniteLogit, "spatial attention logit");
  }
  const double top = logits.maxCoeff();
  Eigen::VectorXd w = (logits.array() - top).exp().matrix();
  return w / w.sum();
}

Eigen::MatrixXd fuse_series(const Eigen::VectorXd& weights, const Eigen::MatrixXd& members, int steps, int channels) {
  if (weights.size() != members.rows() || members.cols() != static_cast<Eigen::Index>(steps) * channels) {
    throw Error(ErrorKind::kShapeMismatch, "fuse_series: member series shape");
  }
  const Eigen::RowVectorXd flat = weights.transpose() * members;
  Eigen::MatrixXd out(steps, channels);
  for (int t = 0; t < steps; ++t) {
    for (int c = 0; c < channels; ++c) out(t, c) = flat(static_cast<Eigen::Index>(t) * channels + c);
  }
  return out;
}

}  // namespace spdrought
