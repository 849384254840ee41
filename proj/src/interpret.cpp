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

#include "spdrought/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "spdrought/error.hpp"
#include "spdrought/parallel.hpp"

namespace spdrought {

AttributionMap integrated_gradients(const ScalarFunction& f, const Eigen::MatrixXd& x, const Eigen::MatrixXd& baseline,
                                    int steps, int chunk) {
  if (steps < 1) throw Error(ErrorKind::kConfigError, "integrated gradients needs at least one step");
  if (x.rows() != baseline.rows() || x.cols() != baseline.cols()) {
    throw Error(ErrorKind::kShapeMismatch, "input and baseline shapes differ");
  }
  const Eigen::MatrixXd delta = x - baseline;
  // Compensated summation keeps long paths accurate to a few ulps.
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(x.rows(), x.cols());
  Eigen::MatrixXd carry = Eigen::MatrixXd::Zero(x.rows(), x.cols());
  chunk = std::max(chunk, 1);
  std::vector<Eigen::MatrixXd> points;
  for (int k0 = 0; k0 < steps; k0 += chunk) {
    points.clear();
    for (int k = k0; k < std::min(steps, k0 + chunk); ++k) {
      const double alpha = (static_cast<double>(k) + 0.5) / steps;
      points.push_back(baseline + alpha * delta);
    }
    for (const auto& g : f.gradients(points)) {
      if (!g.allFinite()) throw Error(ErrorKind::kNonFiniteGradient, "non-finite gradient on the attribution path");
      for (Eigen::Index i = 0; i < g.size(); ++i) {
        double& s = sum.data()[i];
        const double v = g.data()[i], t = s + v;
        carry.data()[i] += std::abs(s) >= std::abs(v) ? (s - t) + v : (v - t) + s;
        s = t;
      }
    }
  }
  AttributionMap map;
  map.values = delta.cwiseProduct(sum + carry) / static_cast<double>(steps);
  map.steps = steps;
  return map;
}

double completeness_gap(const AttributionMap& map, const ScalarFunction& f, const Eigen::MatrixXd& x,
                        const Eigen::MatrixXd& baseline, double eps) {
  const double diff = f.value(x) - f.value(baseline);
  return std::abs(map.values.sum() - diff) / std::max(std::abs(diff), eps);
}

ForecastEntry::ForecastEntry(const Forecaster& forecaster, const PreparedData& data, std::size_t pixel, int index,
                             int horizon_week)
    : forecaster_(forecaster),
      numeric_(data.numeric.row(static_cast<Eigen::Index>(pixel))),
      land_cover_(data.land_cover.at(pixel)),
      index_(index),
      horizon_week_(horizon_week) {
  if (index < 0 || index >= kIndexCount) throw Error(ErrorKind::kConfigError, "index must be 0, 1 or 2");
  if (horizon_week < 0 || horizon_week >= forecaster.config().horizon) {
    throw Error(ErrorKind::kConfigError, "horizon week outside the forecast horizon");
  }
}

double ForecastEntry::value(const Eigen::MatrixXd& fused) const {
  ad::Tape<double> tape(false);
  const ad::Var x = tape.constant(fused);
  const ad::Var pred = forecaster_.model().forward(tape, x, numeric_, {land_cover_}, false, nullptr);
  return tape.value(pred)(horizon_week_, index_);
}

std::vector<Eigen::MatrixXd> ForecastEntry::gradients(std::span<const Eigen::MatrixXd> points) const {
  const auto b = static_cast<Eigen::Index>(points.size());
  if (b == 0) return {};
  const auto steps = points[0].rows();
  ad::Matrix<double> stacked(b * steps, points[0].cols());
  for (Eigen::Index i = 0; i < b; ++i) stacked.middleRows(i * steps, steps) = points[static_cast<std::size_t>(i)];
  ad::Tape<double> tape(false);
  const ad::Var x = tape.input(std::move(stacked));
  const ad::Matrix<double> numeric = numeric_.replicate(b, 1);
  const std::vector<int> land_cover(static_cast<std::size_t>(b), land_cover_);
  const ad::Var pred = forecaster_.model().forward(tape, x, numeric, land_cover, false, nullptr);
  // Each sample's entry sits in its own row block, so one backward pass over
  // the sum yields every per-sample gradient.
  const int h = forecaster_.config().horizon;
  ad::Matrix<double> pick = ad::Matrix<double>::Zero(b * h, kIndexCount);
  for (Eigen::Index i = 0; i < b; ++i) pick(i * h + horizon_week_, index_) = 1.0;
  tape.backward(ad::weighted_sum(tape, pred, std::move(pick)));
  std::vector<Eigen::MatrixXd> out;
  out.reserve(points.size());
  for (Eigen::Index i = 0; i < b; ++i) out.emplace_back(tape.grad(x).middleRows(i * steps, steps));
  return out;
}

Eigen::MatrixXd fused_context(const Forecaster& forecaster, const PreparedData& data, std::size_t pixel,
                              const Window& window) {
  const auto in = fusion_input<double>(data, pixel, window, forecaster.config().zeroed_channels);
  ad::Tape<double> tape(false);
  const ad::Var fused = forecaster.model().fuse(tape, std::vector<FusionInput<double>>{in});
  return tape.value(fused);
}

LagAttribution lag_attribution_grid(const Checkpoint& ckpt, const PreparedData& data, int index, int week, int lag,
                                    int steps, int threads) {
  const Forecaster forecaster(ckpt);
  const TrainConfig& cfg = forecaster.config();
  if (index < 0 || index >= kIndexCount) throw Error(ErrorKind::kConfigError, "index must be 0, 1 or 2");
  if (lag < 1 || lag >= cfg.context) throw Error(ErrorKind::kConfigError, "lag must lie in [1, context)");
  const Window window{week - cfg.context, cfg.context, cfg.horizon};
  if (window.context_start < 0 || window.end() > data.spec.weeks) {
    throw Error(ErrorKind::kConfigError, "week " + std::to_string(week) + " leaves no full window in the record");
  }
  const SampleSet test = test_samples(data, cfg);
  if (test.pixels.empty()) throw Error(ErrorKind::kEmptySplit, "no test pixels to attribute");

  LagAttribution out;
  out.index = index;
  out.week = week;
  out.lag = lag;
  out.steps = steps;
  for (int v = 0; v < kDynamicCount; ++v) {
    out.names.emplace_back(kDynamicNames[v]);
    out.rasters.emplace_back(data.spec.rows, data.spec.cols);
  }
  const int row = cfg.context - lag;
  parallel_chunks(test.pixels.size(), threads, [&](std::size_t begin, std::size_t end, int) {
    for (std::size_t i = begin; i < end; ++i) {
      const std::size_t p = test.pixels[i];
      const Eigen::MatrixXd x = fused_context(forecaster, data, p, window);
      const ForecastEntry f(forecaster, data, p, index, 0);
      const AttributionMap map = integrated_gradients(f, x, Eigen::MatrixXd::Zero(x.rows(), x.cols()), steps);
      const PixelCoord c = data.spec.coord(p);
      for (int v = 0; v < kDynamicCount; ++v) out.rasters[v].at(c.row, c.col) = map.values(row, kIndexCount + v);
    }
  });
  return out;
}

void export_lag_attribution(const LagAttribution& attribution, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::string stem = "ig_" + std::string(kIndexNames[attribution.index]) + "_week" +
                           std::to_string(attribution.week) + "_lag" + std::to_string(attribution.lag);
  for (std::size_t v = 0; v < attribution.rasters.size(); ++v) {
    const std::string base = (std::filesystem::path(dir) / (stem + "_" + attribution.names[v])).string();
    write_pgm(base + ".pgm", attribution.rasters[v]);
    write_csv(base + ".csv", attribution.rasters[v]);
  }
}

}  // namespace spdrought
