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

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "spdrought/raster.hpp"
#include "spdrought/trainer.hpp"

namespace spdrought {

// A scalar function of a matrix input with batched gradients.
class ScalarFunction {
 public:
  virtual ~ScalarFunction() = default;
  virtual double value(const Eigen::MatrixXd& x) const = 0;
  virtual std::vector<Eigen::MatrixXd> gradients(std::span<const Eigen::MatrixXd> points) const = 0;
};

// Adapts a pair of callables (mostly for tests and closed-form functions).
class LambdaFunction : public ScalarFunction {
 public:
  using Value = std::function<double(const Eigen::MatrixXd&)>;
  using Gradient = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>;

  LambdaFunction(Value value, Gradient gradient) : value_(std::move(value)), gradient_(std::move(gradient)) {}
  double value(const Eigen::MatrixXd& x) const override { return value_(x); }
  std::vector<Eigen::MatrixXd> gradients(std::span<const Eigen::MatrixXd> points) const override {
    std::vector<Eigen::MatrixXd> out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back(gradient_(p));
    return out;
  }

 private:
  Value value_;
  Gradient gradient_;
};

struct AttributionMap {
  Eigen::MatrixXd values;  // same shape as the attributed input
  std::string baseline = "zeros";
  int steps = 0;
};

// Midpoint-rule integrated gradients along the straight path baseline -> x.
// Gradients are requested in batches of `chunk` path points.
AttributionMap integrated_gradients(const ScalarFunction& f, const Eigen::MatrixXd& x, const Eigen::MatrixXd& baseline,
                                    int steps, int chunk = 64);

// |sum IG - (F(x) - F(x'))| / max(|F(x) - F(x')|, eps)
double completeness_gap(const AttributionMap& map, const ScalarFunction& f, const Eigen::MatrixXd& x,
                        const Eigen::MatrixXd& baseline, double eps = 1e-12);

// One forecast entry (index k at horizon week h) of a trained model as a
// function of the fused context series (context x 14) of one pixel.
class ForecastEntry : public ScalarFunction {
 public:
  ForecastEntry(const Forecaster& forecaster, const PreparedData& data, std::size_t pixel, int index,
                int horizon_week = 0);

  double value(const Eigen::MatrixXd& fused) const override;
  std::vector<Eigen::MatrixXd> gradients(std::span<const Eigen::MatrixXd> points) const override;

 private:
  const Forecaster& forecaster_;
  Eigen::RowVectorXd numeric_;
  int land_cover_;
  int index_;
  int horizon_week_;
};

// The fused context the model actually sees for (pixel, window).
Eigen::MatrixXd fused_context(const Forecaster& forecaster, const PreparedData& data, std::size_t pixel,
                              const Window& window);

struct LagAttribution {
  int index = 0;
  int week = 0;  // first horizon week of the attributed window
  int lag = 1;
  int steps = 0;
  std::vector<std::string> names;  // one per dynamic predictor
  std::vector<Raster> rasters;     // NaN outside the test pixels
};

// IG of each dynamic predictor at context row (context - lag) for the first
// horizon week of the window whose horizon starts at `week`, over the
// checkpoint's test pixels.
LagAttribution lag_attribution_grid(const Checkpoint& ckpt, const PreparedData& data, int index, int week, int lag,
                                    int steps = 128, int threads = 1);

// Writes <dir>/<stem>_<name>.pgm (+ sidecar) and .csv for every raster.
void export_lag_attribution(const LagAttribution& attribution, const std::string& dir);

}  // namespace spdrought
