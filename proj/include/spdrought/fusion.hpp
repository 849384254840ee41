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

#pragma once

#include <Eigen/Core>

#include <span>
#include <vector>

#include "spdrought/autodiff.hpp"
#include "spdrought/gridcube.hpp"

namespace spdrought {

// Distance assigned to the centre pixel as its own key.
inline constexpr double kSelfDistance = 0.8;

struct NeighborMember {
  PixelCoord pixel;
  double distance = 0.0;
};

// Members of the (2d+1)x(2d+1) square around `center`; members[0] is always
// the centre itself.
struct Neighborhood {
  PixelCoord center;
  std::vector<NeighborMember> members;
};

// Land pixels only.
Neighborhood neighborhood(PixelCoord center, int d, const GridSpec& spec);
// Land pixels whose static features are all finite.
Neighborhood neighborhood(PixelCoord center, int d, const Dataset& ds);

// The 9-dim vector the attention compares: 8 numeric statics followed by the
// land-cover id scaled to [0, 1] by id / (C - 1).
Eigen::VectorXd static_vector(const Dataset& ds, std::size_t pixel);

struct FusionParams {
  Eigen::MatrixXd w_query;  // N x N
  Eigen::MatrixXd w_key;    // N x N
};

// softmax_m( (s_c W_q) . (s_m W_k) / (R_m * sqrt(N)) )
Eigen::VectorXd spatial_attention(const Eigen::VectorXd& center, const Eigen::MatrixXd& members,
                                  const Eigen::VectorXd& distances, const FusionParams& params);

// Convex combination of member series: members is k x (T*channels) with each
// row one member's row-major T x channels block.
Eigen::MatrixXd fuse_series(const Eigen::VectorXd& weights, const Eigen::MatrixXd& members, int steps,
                            int channels);

namespace ad {

// Tape version of spatial_attention: returns the 1 x k weight row.
// `inv_scale` holds 1 / (R_m * sqrt(N)) per member.
template <class T>
Var fusion_weights(Tape<T>& tape, const Matrix<T>& center, const Matrix<T>& members, const Matrix<T>& inv_scale,
                   Var w_query, Var w_key) {
  const Var q = matmul(tape, tape.constant(center), w_query);
  const Var keys = matmul(tape, tape.constant(members), w_key);
  const Var logits = mul_const(tape, matmul_nt(tape, q, keys), inv_scale);
  if (!tape.value(logits).allFinite()) throw Error(ErrorKind::kNonFiniteLogit, "spatial attention logit");
  return softmax_rows(tape, logits);
}

// weights (1 x k) times member series (k x (T*channels)), reshaped to T x channels.
template <class T>
Var fused_series(Tape<T>& tape, Var weights, const Matrix<T>& member_series, Eigen::Index steps,
                 Eigen::Index channels) {
  if (tape.value(weights).cols() != member_series.rows() || member_series.cols() != steps * channels) {
    throw Error(ErrorKind::kShapeMismatch, "fused_series: member series shape");
  }
  const Var flat = matmul(tape, weights, tape.constant(member_series));
  return reshape(tape, flat, steps, channels);
}

}  // namespace ad
}  // namespace spdrought
