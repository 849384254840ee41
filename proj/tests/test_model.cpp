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

#include "spdrought/model.hpp"
#include "support/test_support.hpp"

using namespace spdrought;
using spdrought::testing::random_batch;
using spdrought::testing::random_fusion_input;
using spdrought::testing::reduced_config;
using Mat = ad::Matrix<double>;

namespace {

// The model is pinned in memory, so construct it in place.
struct SeededModel : SpDroughtModel<double> {
  SeededModel(const ModelConfig& cfg, std::uint64_t seed) : SpDroughtModel<double>(cfg) {
    SplitMix64 rng(seed);
    initialize(rng);
  }
};

SeededModel make_model(const ModelConfig& cfg, std::uint64_t seed = 1) { return SeededModel(cfg, seed); }

Mat static_repr(const SpDroughtModel<double>& m, const Mat& numeric, const std::vector<int>& lc) {
  ad::Tape<double> t(false);
  return t.value(m.static_representation(t, numeric, lc));
}

}  // namespace

TEST(PositionalEncoding, Values) {
  const Mat pe = positional_encoding<double>(100, 48);
  for (int i = 0; i < 48; ++i) EXPECT_EQ(pe(0, i), i % 2 == 0 ? 0.0 : 1.0);
  EXPECT_NEAR(pe(1, 0), 0.84147098, 1e-8);
  EXPECT_DOUBLE_EQ(pe(1, 0), std::sin(1.0));
  EXPECT_LE(pe.cwiseAbs().maxCoeff(), 1.0);
  EXPECT_EQ(positional_encoding<double>(3, 4, 2).row(0), positional_encoding<double>(5, 4).row(2));
}

TEST(StaticRepresentation, WidthAndConcatenation) {
  const auto m = make_model(ModelConfig{});
  SplitMix64 rng(2);
  Mat numeric(2, 8);
  for (Eigen::Index i = 0; i < numeric.size(); ++i) numeric.data()[i] = rng.uniform();
  numeric.row(1) = numeric.row(0);
  const Mat s = static_repr(m, numeric, {1, 5});
  ASSERT_EQ(s.cols(), 20);
  EXPECT_EQ(s.row(0).head(16), s.row(1).head(16));
  EXPECT_NE(s.row(0).tail(4), s.row(1).tail(4));
}

TEST(StaticRepresentation, ZeroMlpGivesZeroPrefix) {
  auto m = make_model(ModelConfig{});
  for (auto& p : m.params()) {
    if (p.name.rfind("static.fc", 0) == 0) p.value.setZero();
  }
  const Mat s = static_repr(m, Mat::Ones(1, 8), {3});
  EXPECT_EQ(s.row(0).head(16).squaredNorm(), 0.0);
  EXPECT_NE(s.row(0).tail(4).squaredNorm(), 0.0);
}

TEST(StaticRepresentation, RejectsUnknownLandCover) {
  const auto m = make_model(ModelConfig{});
  ad::Tape<double> t(false);
  EXPECT_THROW(m.static_representation(t, Mat::Ones(1, 8), {8}), Error);
}

TEST(Model, DefaultConfigurationShapes) {
  const ModelConfig cfg;
  const auto m = make_model(cfg);
  SplitMix64 rng(3);
  std::vector<FusionInput<double>> batch{random_fusion_input<double>(cfg, 25, rng)};
  ad::Tape<double> t(false);
  const ad::Var fused = m.fuse(t, batch);
  EXPECT_EQ(t.value(fused).rows(), 100);
  EXPECT_EQ(t.value(fused).cols(), 14);
  const ad::Var enc = m.encode_dynamic(t, fused, 1, false, nullptr);
  EXPECT_EQ(t.value(enc).rows(), 100);
  EXPECT_EQ(t.value(enc).cols(), 48);
  const ad::Var fs = m.static_representation(t, Mat::Ones(1, 8), {0});
  const ad::Var dec = m.decode_horizon(t, enc, fs, 1);
  EXPECT_EQ(t.value(dec).rows(), 26);
  EXPECT_EQ(t.value(dec).cols(), 48);
  const ad::Var out = m.predict_indices(t, dec);
  EXPECT_EQ(t.value(out).rows(), 26);
  EXPECT_EQ(t.value(out).cols(), 3);
}

TEST(Model, ParameterCountOfDefaultConfiguration) {
  EXPECT_EQ(make_model(ModelConfig{}).params().scalar_count(), 197487u);
}

TEST(Model, EvalModeIsDeterministic) {
  const ModelConfig cfg = reduced_config();
  const auto m = make_model(cfg);
  SplitMix64 rng(4);
  const auto b = random_batch(cfg, 3, rng);
  EXPECT_EQ(spdrought::testing::predict(m, b), spdrought::testing::predict(m, b));
}

TEST(Model, TrainModeDropoutChangesOutput) {
  ModelConfig cfg = reduced_config();
  cfg.dropout = 0.5;
  const auto m = make_model(cfg);
  SplitMix64 rng(5);
  const auto b = random_batch(cfg, 2, rng);
  SplitMix64 drop(6);
  ad::Tape<double> t(false);
  const ad::Var fused = m.fuse(t, b.inputs);
  const Mat train_out = t.value(m.forward(t, fused, b.numeric, b.land_cover, true, &drop));
  EXPECT_NE(train_out, spdrought::testing::predict(m, b));
}

TEST(Model, OneHotFusionFeedsTheCentreSeries) {
  const ModelConfig cfg = reduced_config();
  const auto m = make_model(cfg);
  SplitMix64 rng(7);
  const auto b = random_batch(cfg, 2, rng);
  ad::Tape<double> t(false);
  const Mat forced = t.value(m.fuse(t, b.inputs, true));
  for (int i = 0; i < 2; ++i) {
    for (int s = 0; s < cfg.context; ++s) {
      for (int c = 0; c < cfg.channels; ++c) {
        EXPECT_EQ(forced(i * cfg.context + s, c), b.inputs[i].member_series(0, s * cfg.channels + c));
      }
    }
  }
}

TEST(Model, NoFusionEqualsForcedCentreWeights) {
  ModelConfig cfg = reduced_config();
  const auto full = make_model(cfg);
  cfg.use_fusion = false;
  SpDroughtModel<double> nofusion(cfg);
  nofusion.copy_parameters_from(full);
  SplitMix64 rng(8);
  const auto b = random_batch(cfg, 3, rng);
  ad::Tape<double> t1(false), t2(false);
  const Mat a = t1.value(full.forward(t1, full.fuse(t1, b.inputs, true), b.numeric, b.land_cover, false, nullptr));
  const Mat c = t2.value(nofusion.forward(t2, nofusion.fuse(t2, b.inputs), b.numeric, b.land_cover, false, nullptr));
  EXPECT_EQ(a, c);
}

TEST(Model, ZeroStaticRepresentationMatchesNoStaticVariant) {
  ModelConfig cfg = reduced_config();
  const auto full = make_model(cfg);
  cfg.use_static = false;
  SpDroughtModel<double> nostatic(cfg);
  nostatic.copy_parameters_from(full);
  SplitMix64 rng(9);
  const auto b = random_batch(cfg, 2, rng);
  ad::Tape<double> t1(false), t2(false);
  const ad::Var e1 = full.encode_dynamic(t1, full.fuse(t1, b.inputs), 2, false, nullptr);
  const Mat a = t1.value(full.decode_horizon(t1, e1, t1.constant(Mat::Zero(2, 20)), 2));
  const Mat c =
      t2.value(nostatic.forward(t2, nostatic.fuse(t2, b.inputs), b.numeric, b.land_cover, false, nullptr));
  const Mat a_pred = t1.value(full.predict_indices(t1, t1.constant(a)));
  EXPECT_EQ(a_pred, c);
}

TEST(Model, EveryMemoryRowReachesTheOutput) {
  const ModelConfig cfg = reduced_config();
  const auto m = make_model(cfg);
  SplitMix64 rng(10);
  Mat enc(cfg.context, cfg.model_dim);
  for (Eigen::Index i = 0; i < enc.size(); ++i) enc.data()[i] = rng.normal();
  Mat fs(1, 20);
  for (Eigen::Index i = 0; i < fs.size(); ++i) fs.data()[i] = rng.normal();
  auto decode = [&](const Mat& e) {
    ad::Tape<double> t(false);
    return Mat(t.value(m.decode_horizon(t, t.constant(e), t.constant(fs), 1)));
  };
  const Mat base = decode(enc);
  for (int r = 0; r < cfg.context; ++r) {
    Mat e = enc;
    e.row(r).array() += 0.5;
    EXPECT_GT((decode(e) - base).cwiseAbs().maxCoeff(), 1e-9) << "memory row " << r;
  }
}

TEST(Model, PositionalEncodingBreaksPermutationInvariance) {
  const ModelConfig cfg = reduced_config();
  const auto m = make_model(cfg);
  SplitMix64 rng(11);
  Mat x(cfg.context, cfg.channels);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform();
  Mat permuted = x;
  permuted.row(0).swap(permuted.row(7));
  ad::Tape<double> t(false);
  const Mat a = t.value(m.encode_dynamic(t, t.constant(x), 1, false, nullptr));
  const Mat c = t.value(m.encode_dynamic(t, t.constant(permuted), 1, false, nullptr));
  Mat a_perm = a;
  a_perm.row(0).swap(a_perm.row(7));
  EXPECT_GT((a_perm - c).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Model, HeadsAreIndependent) {
  const ModelConfig cfg = reduced_config();
  auto m = make_model(cfg);
  SplitMix64 rng(12);
  Mat f(cfg.horizon, cfg.model_dim);
  for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = rng.normal();
  auto heads = [&] {
    ad::Tape<double> t(false);
    return Mat(t.value(m.predict_indices(t, t.constant(f))));
  };
  const Mat before = heads();
  m.params().at("head.2.weight").value.array() += 0.25;
  const Mat after = heads();
  EXPECT_EQ(before.leftCols(2), after.leftCols(2));
  EXPECT_NE(before.col(2), after.col(2));

  for (auto& p : m.params()) {
    if (p.name.rfind("head.", 0) == 0) p.value.setZero();
  }
  EXPECT_EQ(heads().squaredNorm(), 0.0);
}

TEST(Model, VariantsWithoutEncoderOrDecoderStillProduceHorizon) {
  for (int which = 0; which < 2; ++which) {
    ModelConfig cfg = reduced_config();
    (which == 0 ? cfg.use_encoder : cfg.use_decoder) = false;
    const auto m = make_model(cfg);
    SplitMix64 rng(13);
    const auto b = random_batch(cfg, 2, rng);
    const Mat out = spdrought::testing::predict(m, b);
    EXPECT_EQ(out.rows(), 2 * cfg.horizon);
    EXPECT_EQ(out.cols(), 3);
    EXPECT_TRUE(out.allFinite());
  }
}

TEST(Model, NonFiniteInputIsReported) {
  const ModelConfig cfg = reduced_config();
  const auto m = make_model(cfg);
  Mat x = Mat::Zero(cfg.context, cfg.channels);
  x(3, 3) = std::numeric_limits<double>::quiet_NaN();
  ad::Tape<double> t(false);
  try {
    m.encode_dynamic(t, t.constant(x), 1, false, nullptr);
    FAIL() << "expected NonFiniteActivation";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNonFiniteActivation);
  }
}

TEST(Model, GradientsMatchFiniteDifferences) {
  const ModelConfig cfg = reduced_config();
  auto m = make_model(cfg, 21);
  SplitMix64 rng(22);
  for (int trial = 0; trial < 2; ++trial) {
    auto b = random_batch(cfg, 2, rng);
    const auto r = spdrought::testing::gradient_check(m, b, rng);
    EXPECT_LE(r.worst_param, 1e-3);
    EXPECT_LE(r.worst_input, 1e-3);
  }
}

TEST(Model, EncoderInputGradientMatchesFiniteDifferences) {
  ModelConfig cfg = reduced_config();
  const auto m = make_model(cfg, 31);
  SplitMix64 rng(32);
  Mat x(cfg.context, cfg.channels), w(cfg.context, cfg.model_dim);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform();
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.normal();
  auto readout = [&](const Mat& in) {
    ad::Tape<double> t(false);
    return t.value(ad::weighted_sum(t, m.encode_dynamic(t, t.constant(in), 1, false, nullptr), w))(0, 0);
  };
  ad::Tape<double> t(false);
  const ad::Var in = t.input(x);
  t.backward(ad::weighted_sum(t, m.encode_dynamic(t, in, 1, false, nullptr), w));
  const Mat g = t.grad(in);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Mat up = x, down = x;
    up.data()[i] += h;
    down.data()[i] -= h;
    EXPECT_LE(spdrought::testing::relative_error(g.data()[i], (readout(up) - readout(down)) / (2 * h)), 1e-4);
  }
}
