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

#include <cmath>
#include <string>
#include <vector>

#include "spdrought/autodiff.hpp"
#include "spdrought/error.hpp"
#include "spdrought/fusion.hpp"
#include "spdrought/gridcube.hpp"
#include "spdrought/rng.hpp"

namespace spdrought {

struct ModelConfig {
  int channels = kChannelCount;
  int static_features = kStaticCount;  // attention key width
  int numeric_features = kNumericStaticCount;
  int static_hidden = 10;
  int static_out = 16;
  int categories = 8;
  int embed_dim = 4;
  int model_dim = 48;
  int ff_dim = 256;
  int heads = 2;
  int encoder_layers = 3;
  int decoder_layers = 2;
  int context = 100;
  int horizon = 26;
  int tasks = kIndexCount;
  double dropout = 0.1;

  bool use_fusion = true;
  bool use_static = true;
  bool use_encoder = true;
  bool use_decoder = true;

  int static_repr_dim() const { return static_out + embed_dim; }
  int memory_dim() const { return model_dim + static_repr_dim(); }
  void validate() const;
};

inline void ModelConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorKind::kConfigError, what);
  };
  require(channels > 0 && static_features > 0 && numeric_features > 0, "feature counts must be positive");
  require(static_hidden > 0 && static_out > 0 && embed_dim > 0 && categories > 0, "static sizes must be positive");
  require(model_dim > 0 && ff_dim > 0 && heads > 0, "model sizes must be positive");
  require(model_dim % heads == 0, "heads must divide the model dimension");
  require(encoder_layers >= 0 && decoder_layers >= 0, "layer counts must be >= 0");
  require(context > 0 && horizon > 0 && tasks > 0, "context, horizon and tasks must be positive");
  require(dropout >= 0.0 && dropout < 1.0, "dropout must lie in [0, 1)");
}

// Sinusoidal positional encoding for positions offset .. offset+steps-1.
template <class T>
ad::Matrix<T> positional_encoding(int steps, int dim, int offset = 0) {
  if (dim % 2 != 0) throw Error(ErrorKind::kConfigError, "positional encoding needs an even width");
  ad::Matrix<T> pe(steps, dim);
  for (int t = 0; t < steps; ++t) {
    const double pos = static_cast<double>(t + offset);
    for (int i = 0; i < dim / 2; ++i) {
      const double angle = pos / std::pow(10000.0, static_cast<double>(2 * i) / dim);
      pe(t, 2 * i) = static_cast<T>(std::sin(angle));
      pe(t, 2 * i + 1) = static_cast<T>(std::cos(angle));
    }
  }
  return pe;
}

// Per-sample inputs of the spatial fusion step.
template <class T>
struct FusionInput {
  ad::Matrix<T> center_static;   // 1 x N
  ad::Matrix<T> member_statics;  // k x N, row 0 is the centre
  ad::Matrix<T> inv_scale;       // 1 x k, 1 / (R_m sqrt(N))
  ad::Matrix<T> member_series;   // k x (context * channels), row 0 is the centre
};

template <class T>
class SpDroughtModel {
 public:
  using Var = ad::Var;
  using Tape = ad::Tape<T>;
  using Mat = ad::Matrix<T>;

  explicit SpDroughtModel(ModelConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    build();
  }
  SpDroughtModel(const SpDroughtModel&) = delete;
  SpDroughtModel& operator=(const SpDroughtModel&) = delete;

  const ModelConfig& config() const { return cfg_; }
  ad::ParameterSet<T>& params() { return params_; }
  const ad::ParameterSet<T>& params() const { return params_; }

  // Uniform fan-in initialisation for affine maps, unit gains for layer
  // norms, standard normal embeddings and query tokens.
  void initialize(SplitMix64& rng) {
    for (auto& p : params_) {
      const std::string& n = p.name;
      if (ends_with(n, ".gain")) {
        p.value.setOnes();
      } else if (ends_with(n, ".shift")) {
        p.value.setZero();
      } else if (n == "static.embedding" || n == "decoder.queries") {
        for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = static_cast<T>(rng.normal());
      } else {
        const double fan_in = static_cast<double>(fan_in_of(p));
        const double bound = 1.0 / std::sqrt(fan_in);
        for (Eigen::Index i = 0; i < p.value.size(); ++i) {
          p.value.data()[i] = static_cast<T>(rng.uniform(-bound, bound));
        }
      }
    }
  }

  // Copies parameter values by name from a model of identical layout.
  void copy_parameters_from(const SpDroughtModel& other) {
    for (auto& p : params_) {
      const auto* q = other.params().find(p.name);
      if (q == nullptr || q->value.rows() != p.value.rows() || q->value.cols() != p.value.cols()) {
        throw Error(ErrorKind::kShapeMismatch, "parameter layout differs at " + p.name);
      }
      p.value = q->value;
    }
  }

  // ---- spatial fusion -------------------------------------------------------

  // Tape version of the attention weights (1 x k).
  Var fusion_weights(Tape& tape, const FusionInput<T>& in) const {
    return ad::fusion_weights(tape, in.center_static, in.member_statics, in.inv_scale, tape.param(*fusion_wq_),
                              tape.param(*fusion_wk_));
  }

  // Fused context series stacked over the batch: (B*context) x channels.
  // Without fusion (or with force_center) the centre series passes through.
  Var fuse(Tape& tape, const std::vector<FusionInput<T>>& batch, bool force_center = false) const {
    std::vector<Var> parts;
    parts.reserve(batch.size());
    for (const auto& in : batch) {
      if (in.member_series.cols() != static_cast<Eigen::Index>(cfg_.context) * cfg_.channels) {
        throw Error(ErrorKind::kShapeMismatch, "fusion input does not match the context length");
      }
      Var w;
      if (cfg_.use_fusion && !force_center) {
        w = fusion_weights(tape, in);
      } else {
        Mat one_hot = Mat::Zero(1, in.member_series.rows());
        one_hot(0, 0) = T(1);
        w = tape.constant(std::move(one_hot));
      }
      parts.push_back(ad::fused_series(tape, w, in.member_series, cfg_.context, cfg_.channels));
    }
    return ad::vstack<T>(tape, parts);
  }

  // ---- static representation ------------------------------------------------

  // B x 20: MLP(numeric) of width 16 followed by the land-cover embedding.
  // Zeros for the variant without static features.
  Var static_representation(Tape& tape, const Mat& numeric, const std::vector<int>& land_cover) const {
    if (numeric.cols() != cfg_.numeric_features || numeric.rows() != static_cast<Eigen::Index>(land_cover.size())) {
      throw Error(ErrorKind::kShapeMismatch, "static input shape");
    }
    for (const int id : land_cover) {
      if (id < 0 || id >= cfg_.categories) throw Error(ErrorKind::kIdOutOfRange, "land cover id " + std::to_string(id));
    }
    if (!cfg_.use_static) return tape.constant(Mat::Zero(numeric.rows(), cfg_.static_repr_dim()));
    Var h = linear(tape, tape.constant(numeric), static_fc1_);
    h = ad::relu(tape, h);
    h = linear(tape, h, static_fc2_);
    const Var e = ad::gather_rows(tape, tape.param(*embedding_), land_cover);
    return ad::concat_cols(tape, h, e);
  }

  // ---- temporal encoder -----------------------------------------------------

  // (B*context) x channels -> (B*context) x model_dim.
  Var encode_dynamic(Tape& tape, Var fused, int batch, bool train_mode, SplitMix64* dropout_rng) const {
    const auto& X = tape.value(fused);
    if (X.cols() != cfg_.channels || X.rows() != static_cast<Eigen::Index>(batch) * cfg_.context) {
      throw Error(ErrorKind::kShapeMismatch, "encoder input shape");
    }
    Var h = linear(tape, fused, input_proj_);
    h = ad::dropout(tape, h, cfg_.dropout, train_mode, dropout_rng);
    h = ad::add(tape, h, ad::tile_rows(tape, tape.constant(positional_encoding<T>(cfg_.context, cfg_.model_dim)), batch));
    if (cfg_.use_encoder) {
      for (const auto& layer : encoder_) {
        Var a = norm(tape, h, layer.ln1);
        h = ad::add(tape, h, attend(tape, a, a, layer.attn, batch));
        a = norm(tape, h, layer.ln2);
        h = ad::add(tape, h, feed_forward(tape, a, layer.ff));
      }
      h = norm(tape, h, encoder_norm_);
    }
    check_finite(tape, h, "encoder");
    return h;
  }

  // ---- horizon decoder ------------------------------------------------------

  // Memory is the re-projection of [H_t | f_s] to model_dim; the decoder runs
  // `horizon` learned query tokens over it. Returns (B*horizon) x model_dim.
  Var decode_horizon(Tape& tape, Var encoded, Var static_repr, int batch) const {
    const Var joined = ad::concat_cols(tape, encoded, ad::repeat_rows(tape, static_repr, cfg_.context));
    const Var memory = linear(tape, joined, memory_proj_);
    Var y;
    if (cfg_.use_decoder) {
      const Mat pe = positional_encoding<T>(cfg_.horizon, cfg_.model_dim, cfg_.context);
      const Var queries = ad::add(tape, tape.param(*queries_), tape.constant(pe));
      y = ad::tile_rows(tape, queries, batch);
      for (const auto& layer : decoder_) {
        Var a = norm(tape, y, layer.ln1);
        y = ad::add(tape, y, attend(tape, a, a, layer.self_attn, batch));
        a = norm(tape, y, layer.ln2);
        y = ad::add(tape, y, attend(tape, a, memory, layer.cross_attn, batch));
        a = norm(tape, y, layer.ln3);
        y = ad::add(tape, y, feed_forward(tape, a, layer.ff));
      }
      y = norm(tape, y, decoder_norm_);
    } else {
      // Decoder ablation: a learned horizon x context map over time.
      const Var map = tape.param(*temporal_map_);
      std::vector<Var> parts;
      parts.reserve(static_cast<std::size_t>(batch));
      for (int b = 0; b < batch; ++b) {
        const Var mem_b = ad::slice_rows(tape, memory, static_cast<Eigen::Index>(b) * cfg_.context, cfg_.context);
        parts.push_back(ad::matmul(tape, map, mem_b));
      }
      y = ad::vstack<T>(tape, parts);
    }
    check_finite(tape, y, "decoder");
    return y;
  }

  // (B*horizon) x model_dim -> (B*horizon) x tasks, one affine head per task.
  Var predict_indices(Tape& tape, Var features) const {
    Var out = linear(tape, features, heads_[0]);
    for (std::size_t k = 1; k < heads_.size(); ++k) out = ad::concat_cols(tape, out, linear(tape, features, heads_[k]));
    return out;
  }

  // Full composition from the fused context series.
  Var forward(Tape& tape, Var fused, const Mat& numeric, const std::vector<int>& land_cover, bool train_mode,
              SplitMix64* dropout_rng) const {
    const int batch = static_cast<int>(land_cover.size());
    const Var encoded = encode_dynamic(tape, fused, batch, train_mode, dropout_rng);
    const Var fs = static_representation(tape, numeric, land_cover);
    return predict_indices(tape, decode_horizon(tape, encoded, fs, batch));
  }

 private:
  struct Affine {
    ad::Parameter<T>* weight = nullptr;
    ad::Parameter<T>* bias = nullptr;
  };
  struct Norm {
    ad::Parameter<T>* gain = nullptr;
    ad::Parameter<T>* shift = nullptr;
  };
  struct AttentionBlock {
    Affine q, k, v, o;
  };
  struct FeedForward {
    Affine fc1, fc2;
  };
  struct EncoderLayer {
    Norm ln1;
    AttentionBlock attn;
    Norm ln2;
    FeedForward ff;
  };
  struct DecoderLayer {
    Norm ln1;
    AttentionBlock self_attn;
    Norm ln2;
    AttentionBlock cross_attn;
    Norm ln3;
    FeedForward ff;
  };

  static bool ends_with(const std::string& s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
  }

  // Bias vectors share the fan-in of their weight matrix.
  std::size_t fan_in_of(const ad::Parameter<T>& p) const {
    if (ends_with(p.name, ".bias")) {
      const std::string weight = p.name.substr(0, p.name.size() - 5) + ".weight";
      if (const auto* w = params_.find(weight)) return static_cast<std::size_t>(w->value.rows());
      return static_cast<std::size_t>(p.value.cols());
    }
    if (p.name == "decoder.temporal_map") return static_cast<std::size_t>(p.value.cols());
    return static_cast<std::size_t>(p.value.rows());
  }

  Affine affine(const std::string& name, int in, int out) {
    Affine a;
    a.weight = &params_.add(name + ".weight", in, out);
    a.bias = &params_.add(name + ".bias", 1, out);
    return a;
  }
  Norm layer_norm(const std::string& name, int dim) {
    Norm n;
    n.gain = &params_.add(name + ".gain", 1, dim);
    n.shift = &params_.add(name + ".shift", 1, dim);
    return n;
  }
  AttentionBlock attention_block(const std::string& name) {
    const int d = cfg_.model_dim;
    return {affine(name + ".q", d, d), affine(name + ".k", d, d), affine(name + ".v", d, d), affine(name + ".o", d, d)};
  }
  FeedForward feed_forward_block(const std::string& name) {
    return {affine(name + ".fc1", cfg_.model_dim, cfg_.ff_dim), affine(name + ".fc2", cfg_.ff_dim, cfg_.model_dim)};
  }

  void build() {
    const int n = cfg_.static_features;
    if (cfg_.use_fusion) {
      fusion_wq_ = &params_.add("fusion.w_query", n, n);
      fusion_wk_ = &params_.add("fusion.w_key", n, n);
    }
    if (cfg_.use_static) {
      static_fc1_ = affine("static.fc1", cfg_.numeric_features, cfg_.static_hidden);
      static_fc2_ = affine("static.fc2", cfg_.static_hidden, cfg_.static_out);
      embedding_ = &params_.add("static.embedding", cfg_.categories, cfg_.embed_dim);
    }
    input_proj_ = affine("input", cfg_.channels, cfg_.model_dim);
    if (cfg_.use_encoder) {
      for (int l = 0; l < cfg_.encoder_layers; ++l) {
        const std::string p = "encoder." + std::to_string(l);
        EncoderLayer layer;
        layer.ln1 = layer_norm(p + ".ln1", cfg_.model_dim);
        layer.attn = attention_block(p + ".attn");
        layer.ln2 = layer_norm(p + ".ln2", cfg_.model_dim);
        layer.ff = feed_forward_block(p + ".ff");
        encoder_.push_back(layer);
      }
      encoder_norm_ = layer_norm("encoder.norm", cfg_.model_dim);
    }
    memory_proj_ = affine("memory", cfg_.memory_dim(), cfg_.model_dim);
    if (cfg_.use_decoder) {
      queries_ = &params_.add("decoder.queries", cfg_.horizon, cfg_.model_dim);
      for (int l = 0; l < cfg_.decoder_layers; ++l) {
        const std::string p = "decoder." + std::to_string(l);
        DecoderLayer layer;
        layer.ln1 = layer_norm(p + ".ln1", cfg_.model_dim);
        layer.self_attn = attention_block(p + ".self_attn");
        layer.ln2 = layer_norm(p + ".ln2", cfg_.model_dim);
        layer.cross_attn = attention_block(p + ".cross_attn");
        layer.ln3 = layer_norm(p + ".ln3", cfg_.model_dim);
        layer.ff = feed_forward_block(p + ".ff");
        decoder_.push_back(layer);
      }
      decoder_norm_ = layer_norm("decoder.norm", cfg_.model_dim);
    } else {
      temporal_map_ = &params_.add("decoder.temporal_map", cfg_.horizon, cfg_.context);
    }
    for (int k = 0; k < cfg_.tasks; ++k) heads_.push_back(affine("head." + std::to_string(k), cfg_.model_dim, 1));
  }

  Var linear(Tape& tape, Var x, const Affine& a) const {
    return ad::linear(tape, x, tape.param(*a.weight), tape.param(*a.bias));
  }
  Var norm(Tape& tape, Var x, const Norm& n) const {
    return ad::layer_norm(tape, x, tape.param(*n.gain), tape.param(*n.shift));
  }
  Var attend(Tape& tape, Var query_in, Var kv_in, const AttentionBlock& blk, int batch) const {
    const Var q = linear(tape, query_in, blk.q);
    const Var k = linear(tape, kv_in, blk.k);
    const Var v = linear(tape, kv_in, blk.v);
    return linear(tape, ad::attention(tape, q, k, v, batch, cfg_.heads), blk.o);
  }
  Var feed_forward(Tape& tape, Var x, const FeedForward& ff) const {
    return linear(tape, ad::relu(tape, linear(tape, x, ff.fc1)), ff.fc2);
  }
  static void check_finite(const Tape& tape, Var v, const char* where) {
    if (!tape.value(v).allFinite()) throw Error(ErrorKind::kNonFiniteActivation, std::string("non-finite ") + where + " activation");
  }

  ModelConfig cfg_;
  ad::ParameterSet<T> params_;
  ad::Parameter<T>* fusion_wq_ = nullptr;
  ad::Parameter<T>* fusion_wk_ = nullptr;
  Affine static_fc1_, static_fc2_;
  ad::Parameter<T>* embedding_ = nullptr;
  Affine input_proj_;
  std::vector<EncoderLayer> encoder_;
  Norm encoder_norm_;
  Affine memory_proj_;
  ad::Parameter<T>* queries_ = nullptr;
  std::vector<DecoderLayer> decoder_;
  Norm decoder_norm_;
  ad::Parameter<T>* temporal_map_ = nullptr;
  std::vector<Affine> heads_;
};

}  // namespace spdrought
