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

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spdrought/checkpoint.hpp"
#include "spdrought/gridcube.hpp"
#include "spdrought/model.hpp"
#include "spdrought/pipeline.hpp"

namespace spdrought {

enum class Variant {
  kFull,
  kNoStatic,
  kNoFusion,
  kNoEncoder,
  kNoDecoder,
  kContext50,
  kSingleTask,
  kTemporalSplit,
};

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view name);

enum class Precision { kFloat32, kFloat64 };

struct TrainConfig {
  int epochs = 30;
  int batch_size = 32;
  double learning_rate = 1e-4;
  int context = 100;
  int horizon = 26;
  int stride = 26;
  int block = 5;
  double train_frac = 0.8;
  std::uint64_t seed = 0;
  Variant variant = Variant::kFull;
  int task = 0;  // target index for kSingleTask
  int radius = 2;

  int model_dim = 48;
  int ff_dim = 256;
  int heads = 2;
  int encoder_layers = 3;
  int decoder_layers = 2;
  double dropout = 0.1;

  Precision precision = Precision::kFloat32;
  int threads = 1;

  // Input channels (0..13, indices first) replaced by zeros; feature
  // importance uses this to remove one predictor at a time.
  std::vector<int> zeroed_channels;

  // Applies variant-implied settings (context_50 sets context = 50).
  TrainConfig resolved() const;
  void validate() const;
  ModelConfig model_config(int categories) const;
};

void write_config(Checkpoint& ckpt, const TrainConfig& cfg);
TrainConfig read_config(const Checkpoint& ckpt);
std::string config_to_text(const TrainConfig& cfg);

// Model-ready view of a dataset: normalized by max, predictors imputed with
// the weekly climatology, index targets kept with their NaNs, and the fusion
// neighbourhood of every land pixel.
struct PreparedData {
  GridSpec spec;
  int categories = 8;
  int radius = 2;
  MaxTable table;
  SeriesCube inputs;            // pixels x weeks x 14: [indices, dynamics]
  std::vector<float> targets;   // pixels x weeks x 3, normalized; NaN = unobserved
  std::vector<EmptySlot> empty_slots;
  std::vector<std::vector<std::size_t>> members;  // per pixel, [0] is the pixel itself
  std::vector<std::vector<double>> inv_scale;     // 1 / (R_m sqrt(N)) per member
  Eigen::MatrixXd static_vectors;                 // pixels x 9
  Eigen::MatrixXd numeric;                        // pixels x 8, NaN replaced by 0
  std::vector<int> land_cover;

  float target(std::size_t pixel, int week, int k) const {
    return targets[(pixel * static_cast<std::size_t>(spec.weeks) + week) * kIndexCount + k];
  }
  std::vector<std::size_t> land_indices() const;
};

PreparedData prepare_data(const Dataset& ds, int radius = 2);

// Pixel indices and windows a model is trained or scored on.
struct SampleSet {
  std::vector<std::size_t> pixels;
  std::vector<Window> windows;
  std::size_t size() const { return pixels.size() * windows.size(); }
};

SampleSet train_samples(const PreparedData& data, const TrainConfig& cfg);
SampleSet test_samples(const PreparedData& data, const TrainConfig& cfg);

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<double> epoch_loss;  // mean training loss per epoch
  std::string loss_trace_text() const;
};

TrainResult train(const PreparedData& data, const TrainConfig& cfg);

// Double-precision inference on a trained checkpoint.
class Forecaster {
 public:
  explicit Forecaster(const Checkpoint& ckpt);
  ~Forecaster();
  Forecaster(Forecaster&&) noexcept;
  Forecaster& operator=(Forecaster&&) noexcept;

  const TrainConfig& config() const { return cfg_; }
  SpDroughtModel<double>& model();
  const SpDroughtModel<double>& model() const;

  // Normalized horizon forecast (horizon x 3) for each pixel, one window.
  std::vector<Eigen::MatrixXd> predict(const PreparedData& data, std::span<const std::size_t> pixels,
                                       const Window& window) const;

 private:
  TrainConfig cfg_;
  std::unique_ptr<SpDroughtModel<double>> model_;
};

// Fusion and static inputs of one sample; channels in `zeroed` are cleared.
template <class T>
FusionInput<T> fusion_input(const PreparedData& data, std::size_t pixel, const Window& window,
                            std::span<const int> zeroed = {});

// Context block (context x 14) of one pixel's own series.
Eigen::MatrixXd center_context(const PreparedData& data, std::size_t pixel, const Window& window);

// MAE per index in normalized units.
struct EvalReport {
  std::array<double, kIndexCount> mae{};
  double total = 0.0;
  std::array<double, kIndexCount> mae_std{};
  double total_std = 0.0;
  std::array<std::size_t, kIndexCount> count{};
  int runs = 1;

  std::string to_text(std::string_view label = "model") const;
};

// A forecaster maps (pixel, window) to a horizon x 3 normalized forecast.
using ForecastFn = std::function<std::vector<Eigen::MatrixXd>(std::span<const std::size_t>, const Window&)>;

EvalReport evaluate_forecasts(const PreparedData& data, const SampleSet& samples, const ForecastFn& forecast,
                              int threads = 1);
EvalReport evaluate(const Checkpoint& ckpt, const PreparedData& data, const SampleSet& samples, int threads = 1);
// Uses the test split implied by the checkpoint's own config.
EvalReport evaluate(const Checkpoint& ckpt, const PreparedData& data, int threads = 1);

// Mean over runs with the population standard deviation.
EvalReport aggregate_runs(std::span<const EvalReport> runs);

// Baselines over one pixel's index context (context x 3).
Eigen::MatrixXd persistence_forecast(const Eigen::MatrixXd& context, int horizon);
Eigen::MatrixXd climatology_forecast(const Eigen::MatrixXd& context, int context_start, int horizon,
                                     int weeks_per_year);

// Centered moving average with reflect padding (kernel odd).
Eigen::VectorXd moving_average(const Eigen::VectorXd& series, int kernel);

// Channel-wise trend/remainder decomposition with one affine map
// context -> horizon per branch and channel.
class DLinear {
 public:
  DLinear(int context, int horizon, int channels, int kernel = 25);

  // Every weight 1/context (a plain average), zero biases.
  void initialize();
  ad::ParameterSet<double>& params() { return params_; }
  int context() const { return context_; }
  int horizon() const { return horizon_; }
  int channels() const { return channels_; }
  int kernel() const { return kernel_; }

  // Forecast for a batch; each context is context x channels.
  ad::Var forward(ad::Tape<double>& tape, std::span<const Eigen::MatrixXd> contexts) const;
  Eigen::MatrixXd forecast(const Eigen::MatrixXd& context) const;

 private:
  int context_, horizon_, channels_, kernel_;
  mutable ad::ParameterSet<double> params_;  // the tape binds parameters mutably
};

// Trains on the index channels of the same training samples with masked MAE
// and Adam under `cfg`; returns the loss trace.
std::vector<double> train_dlinear(DLinear& model, const PreparedData& data, const TrainConfig& cfg);

struct FeatureImportanceRow {
  std::string name;
  int channel = 0;
  double first_epoch_loss = 0.0;
  double delta = 0.0;
};

struct FeatureImportance {
  double baseline_loss = 0.0;
  double noise_band = 0.0;  // std of baseline first-epoch loss across seeds
  std::vector<FeatureImportanceRow> rows;  // ranked by delta, descending

  std::string to_text() const;
};

FeatureImportance feature_importance_by_ablation(const PreparedData& data, const TrainConfig& cfg,
                                                 int noise_repeats = 3);

}  // namespace spdrought
