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

#include "spdrought/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "spdrought/error.hpp"
#include "spdrought/fusion.hpp"
#include "spdrought/optim.hpp"
#include "spdrought/parallel.hpp"

namespace spdrought {
namespace {

constexpr std::array<std::string_view, 8> kVariantNames = {
    "full", "no_static", "no_fusion", "no_encoder", "no_decoder", "context_50", "single_task", "temporal_split"};

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorKind::kConfigError, what); }

template <class T>
struct Batch {
  std::vector<FusionInput<T>> fusion;
  ad::Matrix<T> numeric;
  std::vector<int> land_cover;
  ad::Matrix<T> target;
  ad::Matrix<T> mask;
};

template <class T>
Batch<T> make_batch(const PreparedData& data, std::span<const std::size_t> pixels, const Window& w,
                    const TrainConfig& cfg, bool with_targets) {
  Batch<T> b;
  const auto n = static_cast<Eigen::Index>(pixels.size());
  b.fusion.reserve(pixels.size());
  b.numeric.resize(n, kNumericStaticCount);
  b.land_cover.resize(pixels.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t p = pixels[static_cast<std::size_t>(i)];
    b.fusion.push_back(fusion_input<T>(data, p, w, cfg.zeroed_channels));
    b.numeric.row(i) = data.numeric.row(static_cast<Eigen::Index>(p)).cast<T>();
    b.land_cover[static_cast<std::size_t>(i)] = data.land_cover[p];
  }
  if (!with_targets) return b;
  const int h = w.horizon_len;
  b.target = ad::Matrix<T>::Zero(n * h, kIndexCount);
  b.mask = ad::Matrix<T>::Zero(n * h, kIndexCount);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t p = pixels[static_cast<std::size_t>(i)];
    for (int t = 0; t < h; ++t) {
      for (int k = 0; k < kIndexCount; ++k) {
        if (cfg.variant == Variant::kSingleTask && k != cfg.task) continue;
        const float v = data.target(p, w.horizon_start() + t, k);
        if (std::isnan(v)) continue;
        b.target(i * h + t, k) = static_cast<T>(v);
        b.mask(i * h + t, k) = T(1);
      }
    }
  }
  return b;
}

template <class T>
TrainResult train_impl(const PreparedData& data, const TrainConfig& cfg) {
  SpDroughtModel<T> model(cfg.model_config(data.categories));
  auto init_rng = rng_stream(cfg.seed, "init");
  model.initialize(init_rng);
  auto batch_rng = rng_stream(cfg.seed, "batching");
  auto dropout_rng = rng_stream(cfg.seed, "dropout");

  const SampleSet samples = train_samples(data, cfg);
  if (samples.size() == 0) throw Error(ErrorKind::kEmptySplit, "no training samples");

  AdamState<T> state;
  const AdamConfig adam{cfg.learning_rate};
  TrainResult result;
  std::vector<std::size_t> pixels = samples.pixels;
  std::vector<Window> order = samples.windows;
  const auto batch = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    batch_rng.shuffle(std::span(pixels));
    double loss_sum = 0.0;
    long steps = 0;
    for (std::size_t start = 0; start < pixels.size(); start += batch) {
      const auto group = std::span<const std::size_t>(pixels).subspan(start, std::min(batch, pixels.size() - start));
      batch_rng.shuffle(std::span(order));
      for (const Window& w : order) {
        const Batch<T> b = make_batch<T>(data, group, w, cfg, true);
        if (b.mask.sum() == T(0)) continue;
        model.params().zero_grad();
        ad::Tape<T> tape;
        const ad::Var fused = model.fuse(tape, b.fusion);
        const ad::Var pred = model.forward(tape, fused, b.numeric, b.land_cover, true, &dropout_rng);
        const ad::Var loss = ad::masked_mae(tape, pred, b.target, b.mask);
        const double value = static_cast<double>(tape.value(loss)(0, 0));
        if (!std::isfinite(value)) {
          throw Error(ErrorKind::kNonFiniteLoss, "epoch " + std::to_string(epoch + 1) + ", window starting at week " +
                                                     std::to_string(w.context_start) + ", batch of " +
                                                     std::to_string(group.size()) + " pixels from index " +
                                                     std::to_string(group.front()));
        }
        tape.backward(loss);
        adam_step(model.params(), state, adam);
        loss_sum += value;
        ++steps;
      }
    }
    result.epoch_loss.push_back(steps > 0 ? loss_sum / static_cast<double>(steps) : 0.0);
  }

  write_config(result.checkpoint, cfg);
  result.checkpoint.set_scalar("config.categories", data.categories);
  result.checkpoint.add_parameters(model.params());
  return result;
}

std::vector<std::size_t> pixel_indices(const GridSpec& spec, const std::vector<PixelCoord>& coords) {
  std::vector<std::size_t> out;
  out.reserve(coords.size());
  for (const auto& c : coords) out.push_back(spec.pixel_index(c));
  return out;
}

double population_std(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double ss = 0.0;
  for (const double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size()));
}

}  // namespace

// ---- config -------------------------------------------------------------------

std::string_view variant_name(Variant v) { return kVariantNames[static_cast<std::size_t>(v)]; }

Variant parse_variant(std::string_view name) {
  for (std::size_t i = 0; i < kVariantNames.size(); ++i) {
    if (kVariantNames[i] == name) return static_cast<Variant>(i);
  }
  config_error("unknown variant '" + std::string(name) + "'");
}

TrainConfig TrainConfig::resolved() const {
  TrainConfig out = *this;
  if (out.variant == Variant::kContext50) out.context = 50;
  return out;
}

void TrainConfig::validate() const {
  if (epochs < 0) config_error("epochs must be >= 0");
  if (batch_size < 1) config_error("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) config_error("learning_rate must be positive");
  if (context < 1 || horizon < 1 || stride < 1) config_error("context, horizon and stride must be >= 1");
  if (block < 1) config_error("block must be >= 1");
  if (!(train_frac > 0.0 && train_frac < 1.0)) config_error("train_frac must lie in (0, 1)");
  if (variant == Variant::kContext50 && context != 50) config_error("variant context_50 requires context 50");
  if (task < 0 || task >= kIndexCount) config_error("task must be 0, 1 or 2");
  if (radius < 0) config_error("radius must be >= 0");
  if (threads < 1) config_error("threads must be >= 1");
  for (const int c : zeroed_channels) {
    if (c < 0 || c >= kChannelCount) config_error("zeroed channel out of range");
  }
  model_config(1).validate();
}

ModelConfig TrainConfig::model_config(int categories) const {
  ModelConfig m;
  m.categories = categories;
  m.model_dim = model_dim;
  m.ff_dim = ff_dim;
  m.heads = heads;
  m.encoder_layers = encoder_layers;
  m.decoder_layers = decoder_layers;
  m.context = context;
  m.horizon = horizon;
  m.dropout = dropout;
  m.use_static = variant != Variant::kNoStatic;
  m.use_fusion = variant != Variant::kNoFusion;
  m.use_encoder = variant != Variant::kNoEncoder;
  m.use_decoder = variant != Variant::kNoDecoder;
  return m;
}

void write_config(Checkpoint& ckpt, const TrainConfig& cfg) {
  ckpt.set_scalar("config.epochs", cfg.epochs);
  ckpt.set_scalar("config.batch_size", cfg.batch_size);
  ckpt.set_scalar("config.learning_rate", cfg.learning_rate);
  ckpt.set_scalar("config.context", cfg.context);
  ckpt.set_scalar("config.horizon", cfg.horizon);
  ckpt.set_scalar("config.stride", cfg.stride);
  ckpt.set_scalar("config.block", cfg.block);
  ckpt.set_scalar("config.train_frac", cfg.train_frac);
  // Two 32-bit halves keep the full seed exact in f64.
  ckpt.set_scalar("config.seed_hi", static_cast<double>(cfg.seed >> 32));
  ckpt.set_scalar("config.seed_lo", static_cast<double>(cfg.seed & 0xFFFFFFFFu));
  ckpt.set_scalar("config.variant", static_cast<double>(static_cast<int>(cfg.variant)));
  ckpt.set_scalar("config.task", cfg.task);
  ckpt.set_scalar("config.radius", cfg.radius);
  ckpt.set_scalar("config.model_dim", cfg.model_dim);
  ckpt.set_scalar("config.ff_dim", cfg.ff_dim);
  ckpt.set_scalar("config.heads", cfg.heads);
  ckpt.set_scalar("config.encoder_layers", cfg.encoder_layers);
  ckpt.set_scalar("config.decoder_layers", cfg.decoder_layers);
  ckpt.set_scalar("config.dropout", cfg.dropout);
  ckpt.set_scalar("config.precision", cfg.precision == Precision::kFloat64 ? 64 : 32);
  NamedTensor zeroed{"config.zeroed_channels", {cfg.zeroed_channels.size()}, {}};
  for (const int c : cfg.zeroed_channels) zeroed.data.push_back(c);
  ckpt.tensors.push_back(std::move(zeroed));
}

TrainConfig read_config(const Checkpoint& ckpt) {
  TrainConfig cfg;
  auto as_int = [&](std::string_view key) { return static_cast<int>(ckpt.scalar(key)); };
  cfg.epochs = as_int("config.epochs");
  cfg.batch_size = as_int("config.batch_size");
  cfg.learning_rate = ckpt.scalar("config.learning_rate");
  cfg.context = as_int("config.context");
  cfg.horizon = as_int("config.horizon");
  cfg.stride = as_int("config.stride");
  cfg.block = as_int("config.block");
  cfg.train_frac = ckpt.scalar("config.train_frac");
  cfg.seed = (static_cast<std::uint64_t>(ckpt.scalar("config.seed_hi")) << 32) |
             static_cast<std::uint64_t>(ckpt.scalar("config.seed_lo"));
  const int v = as_int("config.variant");
  if (v < 0 || v >= static_cast<int>(kVariantNames.size())) config_error("checkpoint has an unknown variant code");
  cfg.variant = static_cast<Variant>(v);
  cfg.task = as_int("config.task");
  cfg.radius = as_int("config.radius");
  cfg.model_dim = as_int("config.model_dim");
  cfg.ff_dim = as_int("config.ff_dim");
  cfg.heads = as_int("config.heads");
  cfg.encoder_layers = as_int("config.encoder_layers");
  cfg.decoder_layers = as_int("config.decoder_layers");
  cfg.dropout = ckpt.scalar("config.dropout");
  cfg.precision = as_int("config.precision") == 64 ? Precision::kFloat64 : Precision::kFloat32;
  if (const auto* z = ckpt.find("config.zeroed_channels")) {
    for (const double c : z->data) cfg.zeroed_channels.push_back(static_cast<int>(c));
  }
  cfg.validate();
  return cfg;
}

std::string config_to_text(const TrainConfig& cfg) {
  std::ostringstream os;
  os << "epochs=" << cfg.epochs << '\n'
     << "batch_size=" << cfg.batch_size << '\n'
     << "learning_rate=" << cfg.learning_rate << '\n'
     << "context=" << cfg.context << '\n'
     << "horizon=" << cfg.horizon << '\n'
     << "stride=" << cfg.stride << '\n'
     << "block=" << cfg.block << '\n'
     << "train_frac=" << cfg.train_frac << '\n'
     << "seed=" << cfg.seed << '\n'
     << "variant=" << variant_name(cfg.variant) << '\n'
     << "task=" << cfg.task << '\n'
     << "radius=" << cfg.radius << '\n'
     << "model_dim=" << cfg.model_dim << '\n'
     << "ff_dim=" << cfg.ff_dim << '\n'
     << "heads=" << cfg.heads << '\n'
     << "encoder_layers=" << cfg.encoder_layers << '\n'
     << "decoder_layers=" << cfg.decoder_layers << '\n'
     << "dropout=" << cfg.dropout << '\n'
     << "precision=" << (cfg.precision == Precision::kFloat64 ? "float64" : "float32") << '\n'
     << "threads=" << cfg.threads << '\n';
  return os.str();
}

// ---- data ---------------------------------------------------------------------

std::vector<std::size_t> PreparedData::land_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < spec.land_mask.size(); ++i) {
    if (spec.land_mask[i]) out.push_back(i);
  }
  return out;
}

PreparedData prepare_data(const Dataset& ds, int radius) {
  ds.validate();
  NormalizedDataset nd = normalize_by_max(ds);
  const Dataset& n = nd.dataset;
  const GridSpec& spec = n.spec;
  const std::size_t pixels = spec.pixel_count();

  PreparedData out;
  out.spec = spec;
  out.categories = n.statics.categories;
  out.radius = radius;
  out.table = nd.table;

  SeriesCube cube{pixels, spec.weeks, kChannelCount, std::vector<float>(pixels * spec.weeks * kChannelCount)};
  for (std::size_t p = 0; p < pixels; ++p) {
    for (int t = 0; t < spec.weeks; ++t) {
      for (int k = 0; k < kIndexCount; ++k) cube.at(p, t, k) = n.index_value(p, t, k);
      for (int v = 0; v < kDynamicCount; ++v) cube.at(p, t, kIndexCount + v) = n.dynamic_value(p, t, v);
    }
  }
  ImputedCube imputed = impute_weekly_climatology(std::move(cube), spec.weeks_per_year, spec.land_mask);
  out.inputs = std::move(imputed.cube);
  out.empty_slots = std::move(imputed.empty_slots);
  out.targets = n.indices.values;

  out.members.resize(pixels);
  out.inv_scale.resize(pixels);
  out.static_vectors = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(pixels), kStaticCount);
  out.numeric = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(pixels), kNumericStaticCount);
  out.land_cover.assign(pixels, 0);
  const double root_n = std::sqrt(static_cast<double>(kStaticCount));
  for (std::size_t p = 0; p < pixels; ++p) {
    out.land_cover[p] = n.statics.land_cover[p];
    if (!spec.land_mask[p]) continue;
    const auto row = static_cast<Eigen::Index>(p);
    for (int f = 0; f < kNumericStaticCount; ++f) {
      const float v = n.statics.numeric[n.numeric_offset(p, f)];
      out.numeric(row, f) = std::isfinite(v) ? v : 0.0;
    }
    out.static_vectors.row(row) = static_vector(n, p).transpose();
    const Neighborhood hood = neighborhood(spec.coord(p), radius, n);
    for (const auto& m : hood.members) {
      out.members[p].push_back(spec.pixel_index(m.pixel));
      out.inv_scale[p].push_back(1.0 / (m.distance * root_n));
    }
  }
  return out;
}

SampleSet train_samples(const PreparedData& data, const TrainConfig& cfg) {
  SampleSet s;
  const auto windows = enumerate_windows(data.spec.weeks, cfg.context, cfg.horizon, cfg.stride);
  if (cfg.variant == Variant::kTemporalSplit) {
    s.pixels = data.land_indices();
    for (const auto& w : windows) {
      if (w.end() <= data.spec.weeks - cfg.horizon) s.windows.push_back(w);
    }
    return s;
  }
  const auto split = block_split(data.spec, cfg.block, cfg.train_frac, cfg.seed);
  s.pixels = pixel_indices(data.spec, split.train_pixels);
  s.windows = windows;
  return s;
}

SampleSet test_samples(const PreparedData& data, const TrainConfig& cfg) {
  SampleSet s;
  if (cfg.variant == Variant::kTemporalSplit) {
    s.pixels = data.land_indices();
    const int start = data.spec.weeks - cfg.context - cfg.horizon;
    if (start >= 0) s.windows.push_back(Window{start, cfg.context, cfg.horizon});
    return s;
  }
  const auto split = block_split(data.spec, cfg.block, cfg.train_frac, cfg.seed);
  s.pixels = pixel_indices(data.spec, split.test_pixels);
  s.windows = enumerate_windows(data.spec.weeks, cfg.context, cfg.horizon, cfg.stride);
  return s;
}

template <class T>
FusionInput<T> fusion_input(const PreparedData& data, std::size_t pixel, const Window& window,
                            std::span<const int> zeroed) {
  const auto& members = data.members.at(pixel);
  if (members.empty()) throw Error(ErrorKind::kInvariantViolation, "fusion input requested for a non-land pixel");
  if (window.context_start < 0 || window.horizon_start() > data.spec.weeks) {
    throw Error(ErrorKind::kShapeMismatch, "window outside the record");
  }
  const auto k = static_cast<Eigen::Index>(members.size());
  const int steps = window.context_len;
  FusionInput<T> in;
  in.center_static = data.static_vectors.row(static_cast<Eigen::Index>(pixel)).cast<T>();
  in.member_statics.resize(k, kStaticCount);
  in.inv_scale.resize(1, k);
  in.member_series.resize(k, static_cast<Eigen::Index>(steps) * kChannelCount);
  for (Eigen::Index m = 0; m < k; ++m) {
    const std::size_t q = members[static_cast<std::size_t>(m)];
    in.member_statics.row(m) = data.static_vectors.row(static_cast<Eigen::Index>(q)).cast<T>();
    in.inv_scale(0, m) = static_cast<T>(data.inv_scale[pixel][static_cast<std::size_t>(m)]);
    const float* src = &data.inputs.values[(q * data.spec.weeks + window.context_start) * kChannelCount];
    for (Eigen::Index j = 0; j < in.member_series.cols(); ++j) in.member_series(m, j) = static_cast<T>(src[j]);
    for (const int c : zeroed) {
      for (int t = 0; t < steps; ++t) in.member_series(m, static_cast<Eigen::Index>(t) * kChannelCount + c) = T(0);
    }
  }
  return in;
}

template FusionInput<float> fusion_input<float>(const PreparedData&, std::size_t, const Window&, std::span<const int>);
template FusionInput<double> fusion_input<double>(const PreparedData&, std::size_t, const Window&, std::span<const int>);

Eigen::MatrixXd center_context(const PreparedData& data, std::size_t pixel, const Window& window) {
  Eigen::MatrixXd out(window.context_len, kChannelCount);
  for (int t = 0; t < window.context_len; ++t) {
    for (int c = 0; c < kChannelCount; ++c) out(t, c) = data.inputs.at(pixel, window.context_start + t, c);
  }
  return out;
}

// ---- training -----------------------------------------------------------------

TrainResult train(const PreparedData& data, const TrainConfig& cfg_in) {
  const TrainConfig cfg = cfg_in.resolved();
  cfg.validate();
  if (cfg.radius != data.radius) config_error("data was prepared with a different neighbourhood radius");
  return cfg.precision == Precision::kFloat64 ? train_impl<double>(data, cfg) : train_impl<float>(data, cfg);
}

std::string TrainResult::loss_trace_text() const {
  std::ostringstream os;
  os << "epoch\tmean_loss\n";
  char buf[64];
  for (std::size_t i = 0; i < epoch_loss.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu\t%.9g\n", i + 1, epoch_loss[i]);
    os << buf;
  }
  return os.str();
}

// ---- inference ----------------------------------------------------------------

Forecaster::Forecaster(const Checkpoint& ckpt) : cfg_(read_config(ckpt)) {
  const int categories = static_cast<int>(ckpt.scalar("config.categories"));
  model_ = std::make_unique<SpDroughtModel<double>>(cfg_.model_config(categories));
  ckpt.load_parameters(model_->params());
}

Forecaster::~Forecaster() = default;
Forecaster::Forecaster(Forecaster&&) noexcept = default;
Forecaster& Forecaster::operator=(Forecaster&&) noexcept = default;

SpDroughtModel<double>& Forecaster::model() { return *model_; }
const SpDroughtModel<double>& Forecaster::model() const { return *model_; }

std::vector<Eigen::MatrixXd> Forecaster::predict(const PreparedData& data, std::span<const std::size_t> pixels,
                                                 const Window& window) const {
  if (window.context_len != cfg_.context || window.horizon_len != cfg_.horizon) {
    throw Error(ErrorKind::kShapeMismatch, "window does not match the model's context/horizon");
  }
  std::vector<Eigen::MatrixXd> out;
  if (pixels.empty()) return out;
  const Batch<double> b = make_batch<double>(data, pixels, window, cfg_, false);
  ad::Tape<double> tape(false);
  const ad::Var fused = model_->fuse(tape, b.fusion);
  const ad::Var pred = model_->forward(tape, fused, b.numeric, b.land_cover, false, nullptr);
  const auto& P = tape.value(pred);
  const int h = cfg_.horizon;
  for (std::size_t i = 0; i < pixels.size(); ++i) out.emplace_back(P.middleRows(static_cast<Eigen::Index>(i) * h, h));
  return out;
}

// ---- evaluation ---------------------------------------------------------------

EvalReport evaluate_forecasts(const PreparedData& data, const SampleSet& samples, const ForecastFn& forecast,
                              int threads) {
  if (samples.size() == 0) throw Error(ErrorKind::kEmptySplit, "no evaluation samples");
  // Per-pixel partial sums reduced in pixel order keep the result independent
  // of the thread count.
  struct Partial {
    std::array<double, kIndexCount> abs_err{};
    std::array<std::size_t, kIndexCount> count{};
  };
  std::vector<Partial> partial(samples.pixels.size());
  constexpr std::size_t kGroup = 32;
  parallel_chunks(samples.pixels.size(), threads, [&](std::size_t begin, std::size_t end, int) {
    for (std::size_t g = begin; g < end; g += kGroup) {
      const std::size_t n = std::min(kGroup, end - g);
      const auto group = std::span<const std::size_t>(samples.pixels).subspan(g, n);
      for (const Window& w : samples.windows) {
        const auto preds = forecast(group, w);
        for (std::size_t i = 0; i < n; ++i) {
          auto& acc = partial[g + i];
          for (int t = 0; t < w.horizon_len; ++t) {
            for (int k = 0; k < kIndexCount; ++k) {
              const float y = data.target(group[i], w.horizon_start() + t, k);
              if (std::isnan(y)) continue;
              acc.abs_err[k] += std::abs(preds[i](t, k) - static_cast<double>(y));
              ++acc.count[k];
            }
          }
        }
      }
    }
  });
  EvalReport r;
  std::array<double, kIndexCount> sum{};
  for (const auto& p : partial) {
    for (int k = 0; k < kIndexCount; ++k) {
      sum[k] += p.abs_err[k];
      r.count[k] += p.count[k];
    }
  }
  for (int k = 0; k < kIndexCount; ++k) {
    r.mae[k] = r.count[k] > 0 ? sum[k] / static_cast<double>(r.count[k]) : 0.0;
    r.total += r.mae[k];
  }
  return r;
}

EvalReport evaluate(const Checkpoint& ckpt, const PreparedData& data, const SampleSet& samples, int threads) {
  const Forecaster f(ckpt);
  return evaluate_forecasts(
      data, samples, [&](std::span<const std::size_t> px, const Window& w) { return f.predict(data, px, w); },
      threads);
}

EvalReport evaluate(const Checkpoint& ckpt, const PreparedData& data, int threads) {
  return evaluate(ckpt, data, test_samples(data, read_config(ckpt)), threads);
}

EvalReport aggregate_runs(std::span<const EvalReport> runs) {
  if (runs.empty()) throw Error(ErrorKind::kEmptySplit, "no runs to aggregate");
  EvalReport out;
  out.runs = static_cast<int>(runs.size());
  std::vector<double> xs(runs.size());
  for (int k = 0; k <= kIndexCount; ++k) {
    for (std::size_t i = 0; i < runs.size(); ++i) xs[i] = k < kIndexCount ? runs[i].mae[k] : runs[i].total;
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    if (k < kIndexCount) {
      out.mae[k] = mean;
      out.mae_std[k] = population_std(xs);
      for (const auto& r : runs) out.count[k] += r.count[k];
    } else {
      out.total_std = population_std(xs);
    }
  }
  out.total = out.mae[0] + out.mae[1] + out.mae[2];
  return out;
}

std::string EvalReport::to_text(std::string_view label) const {
  std::ostringstream os;
  os << "# " << label << ": MAE x 1e-3 (normalized units), " << runs << " run(s)\n";
  os << "index\tmae\tstd\tcount\n";
  char buf[128];
  for (int k = 0; k < kIndexCount; ++k) {
    std::snprintf(buf, sizeof(buf), "%s\t%.4f\t%.4f\t%zu\n", std::string(kIndexNames[k]).c_str(), mae[k] * 1e3,
                  mae_std[k] * 1e3, count[k]);
    os << buf;
  }
  std::snprintf(buf, sizeof(buf), "total\t%.4f\t%.4f\t%zu\n", total * 1e3, total_std * 1e3,
                count[0] + count[1] + count[2]);
  os << buf;
  return os.str();
}

// ---- baselines ----------------------------------------------------------------

Eigen::MatrixXd persistence_forecast(const Eigen::MatrixXd& context, int horizon) {
  if (context.rows() < 1) throw Error(ErrorKind::kShapeMismatch, "persistence needs a non-empty context");
  return context.row(context.rows() - 1).replicate(horizon, 1);
}

Eigen::MatrixXd climatology_forecast(const Eigen::MatrixXd& context, int context_start, int horizon,
                                     int weeks_per_year) {
  if (context.rows() < weeks_per_year) {
    throw Error(ErrorKind::kShapeMismatch, "climatology needs at least one year of context");
  }
  const auto wpy = static_cast<Eigen::Index>(weeks_per_year);
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(wpy, context.cols());
  Eigen::VectorXd count = Eigen::VectorXd::Zero(wpy);
  for (Eigen::Index t = 0; t < context.rows(); ++t) {
    const Eigen::Index w = (context_start + t) % wpy;
    sum.row(w) += context.row(t);
    count(w) += 1.0;
  }
  Eigen::MatrixXd out(horizon, context.cols());
  const Eigen::Index first = context_start + context.rows();
  for (int h = 0; h < horizon; ++h) {
    const Eigen::Index w = (first + h) % wpy;
    out.row(h) = sum.row(w) / count(w);
  }
  return out;
}

Eigen::VectorXd moving_average(const Eigen::VectorXd& series, int kernel) {
  if (kernel < 1 || kernel % 2 == 0) throw Error(ErrorKind::kConfigError, "moving-average kernel must be odd");
  const Eigen::Index n = series.size();
  const Eigen::Index half = kernel / 2;
  if (half > 0 && n <= half) throw Error(ErrorKind::kShapeMismatch, "series shorter than the reflect padding");
  // Reflect without repeating the edge sample: x[-i] = x[i], x[n-1+i] = x[n-1-i].
  auto at = [&](Eigen::Index i) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
    return series(i);
  };
  Eigen::VectorXd out(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    double s = 0.0;
    for (Eigen::Index j = -half; j <= half; ++j) s += at(t + j);
    out(t) = s / static_cast<double>(kernel);
  }
  return out;
}

DLinear::DLinear(int context, int horizon, int channels, int kernel)
    : context_(context), horizon_(horizon), channels_(channels), kernel_(kernel) {
  if (context < 1 || horizon < 1 || channels < 1) throw Error(ErrorKind::kConfigError, "DLinear sizes must be positive");
  if (kernel < 1 || kernel % 2 == 0) throw Error(ErrorKind::kConfigError, "moving-average kernel must be odd");
  for (int c = 0; c < channels; ++c) {
    for (const char* branch : {"trend", "remainder"}) {
      const std::string p = std::string(branch) + "." + std::to_string(c);
      params_.add(p + ".weight", context, horizon);
      params_.add(p + ".bias", 1, horizon);
    }
  }
  initialize();
}

void DLinear::initialize() {
  for (auto& p : params_) {
    if (p.name.ends_with(".weight")) {
      p.value.setConstant(1.0 / context_);
    } else {
      p.value.setZero();
    }
  }
}

ad::Var DLinear::forward(ad::Tape<double>& tape, std::span<const Eigen::MatrixXd> contexts) const {
  const auto b = static_cast<Eigen::Index>(contexts.size());
  ad::Var out;
  for (int c = 0; c < channels_; ++c) {
    ad::Matrix<double> trend(b, context_), rem(b, context_);
    for (Eigen::Index i = 0; i < b; ++i) {
      const auto& x = contexts[static_cast<std::size_t>(i)];
      if (x.rows() != context_ || x.cols() != channels_) throw Error(ErrorKind::kShapeMismatch, "DLinear context shape");
      const Eigen::VectorXd s = x.col(c);
      const Eigen::VectorXd m = moving_average(s, kernel_);
      trend.row(i) = m.transpose();
      rem.row(i) = (s - m).transpose();
    }
    const std::string t = "trend." + std::to_string(c);
    const std::string r = "remainder." + std::to_string(c);
    const ad::Var yt = ad::linear(tape, tape.constant(std::move(trend)), tape.param(params_.at(t + ".weight")),
                                  tape.param(params_.at(t + ".bias")));
    const ad::Var yr = ad::linear(tape, tape.constant(std::move(rem)), tape.param(params_.at(r + ".weight")),
                                  tape.param(params_.at(r + ".bias")));
    const ad::Var y = ad::add(tape, yt, yr);
    out = c == 0 ? y : ad::concat_cols(tape, out, y);
  }
  return out;  // B x (channels * horizon), channel-major columns
}

Eigen::MatrixXd DLinear::forecast(const Eigen::MatrixXd& context) const {
  ad::Tape<double> tape(false);
  const ad::Var y = forward(tape, std::span(&context, 1));
  const auto& Y = tape.value(y);
  Eigen::MatrixXd out(horizon_, channels_);
  for (int c = 0; c < channels_; ++c) {
    for (int h = 0; h < horizon_; ++h) out(h, c) = Y(0, c * horizon_ + h);
  }
  return out;
}

std::vector<double> train_dlinear(DLinear& model, const PreparedData& data, const TrainConfig& cfg_in) {
  const TrainConfig cfg = cfg_in.resolved();
  if (model.context() != cfg.context || model.horizon() != cfg.horizon || model.channels() != kIndexCount) {
    throw Error(ErrorKind::kConfigError, "DLinear shape does not match the training config");
  }
  const SampleSet samples = train_samples(data, cfg);
  if (samples.size() == 0) throw Error(ErrorKind::kEmptySplit, "no training samples");
  auto rng = rng_stream(cfg.seed, "batching");
  AdamState<double> state;
  const AdamConfig adam{cfg.learning_rate};
  std::vector<std::size_t> pixels = samples.pixels;
  std::vector<Window> order = samples.windows;
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  const int h = cfg.horizon;
  std::vector<double> trace;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span(pixels));
    double loss_sum = 0.0;
    long steps = 0;
    for (std::size_t start = 0; start < pixels.size(); start += batch) {
      const std::size_t n = std::min(batch, pixels.size() - start);
      rng.shuffle(std::span(order));
      for (const Window& w : order) {
        std::vector<Eigen::MatrixXd> ctx;
        ad::Matrix<double> target = ad::Matrix<double>::Zero(static_cast<Eigen::Index>(n), kIndexCount * h);
        ad::Matrix<double> mask = target;
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t p = pixels[start + i];
          ctx.push_back(center_context(data, p, w).leftCols(kIndexCount));
          for (int k = 0; k < kIndexCount; ++k) {
            if (cfg.variant == Variant::kSingleTask && k != cfg.task) continue;
            for (int t = 0; t < h; ++t) {
              const float y = data.target(p, w.horizon_start() + t, k);
              if (std::isnan(y)) continue;
              target(static_cast<Eigen::Index>(i), k * h + t) = y;
              mask(static_cast<Eigen::Index>(i), k * h + t) = 1.0;
            }
          }
        }
        if (mask.sum() == 0.0) continue;
        model.params().zero_grad();
        ad::Tape<double> tape;
        const ad::Var loss = ad::masked_mae(tape, model.forward(tape, ctx), target, mask);
        const double value = tape.value(loss)(0, 0);
        if (!std::isfinite(value)) throw Error(ErrorKind::kNonFiniteLoss, "DLinear loss");
        tape.backward(loss);
        adam_step(model.params(), state, adam);
        loss_sum += value;
        ++steps;
      }
    }
    trace.push_back(steps > 0 ? loss_sum / static_cast<double>(steps) : 0.0);
  }
  return trace;
}

// ---- feature importance -------------------------------------------------------

FeatureImportance feature_importance_by_ablation(const PreparedData& data, const TrainConfig& cfg_in,
                                                 int noise_repeats) {
  TrainConfig cfg = cfg_in;
  cfg.epochs = 1;
  FeatureImportance out;
  std::vector<double> baselines;
  for (int r = 0; r < std::max(noise_repeats, 1); ++r) {
    TrainConfig c = cfg;
    c.seed = cfg.seed + static_cast<std::uint64_t>(r);
    baselines.push_back(train(data, c).epoch_loss.at(0));
  }
  out.baseline_loss = baselines.front();
  out.noise_band = population_std(baselines);
  for (int v = 0; v < kDynamicCount; ++v) {
    TrainConfig c = cfg;
    c.zeroed_channels.push_back(kIndexCount + v);
    const double loss = train(data, c).epoch_loss.at(0);
    out.rows.push_back({std::string(kDynamicNames[v]), kIndexCount + v, loss, loss - out.baseline_loss});
  }
  std::stable_sort(out.rows.begin(), out.rows.end(),
                   [](const auto& a, const auto& b) { return a.delta > b.delta; });
  return out;
}

std::string FeatureImportance::to_text() const {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "# baseline_first_epoch_loss=%.9g noise_band=%.9g\n", baseline_loss, noise_band);
  os << buf << "rank\tfeature\tfirst_epoch_loss\tdelta\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu\t%s\t%.9g\t%.9g\n", i + 1, rows[i].name.c_str(), rows[i].first_epoch_loss,
                  rows[i].delta);
    os << buf;
  }
  return os.str();
}

}  // namespace spdrought
