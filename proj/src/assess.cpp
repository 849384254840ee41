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

#include "spdrought/assess.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "spdrought/error.hpp"
#include "spdrought/parallel.hpp"

namespace spdrought {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Raster mask_for_week(const GridSpec& spec, const std::vector<AssessedSlot>& slots, int week, bool predicted) {
  Raster r(spec.rows, spec.cols);
  for (const auto& s : slots) {
    if (s.week != week) continue;
    const DroughtState state = predicted ? s.predicted_state : s.observed_state;
    if (state == DroughtState::kUndefined) continue;
    const PixelCoord c = spec.coord(s.pixel);
    r.at(c.row, c.col) = state == DroughtState::kDrought ? 1.0 : 0.0;
  }
  return r;
}

const char* state_text(DroughtState s) {
  switch (s) {
    case DroughtState::kDrought:
      return "1";
    case DroughtState::kNone:
      return "0";
    default:
      return "nan";
  }
}

}  // namespace

double weekly_percentile_threshold(std::span<const double> samples, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::kConfigError, "percentile must lie in [0, 1]");
  std::vector<double> v;
  v.reserve(samples.size());
  for (const double x : samples) {
    if (!std::isnan(x)) v.push_back(x);
  }
  if (v.size() < 2) {
    throw Error(ErrorKind::kInsufficientSamples, "percentile needs at least 2 samples, got " + std::to_string(v.size()));
  }
  std::sort(v.begin(), v.end());
  const double rank = static_cast<double>(v.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const double frac = rank - static_cast<double>(lo);
  if (lo + 1 >= v.size()) return v[lo];
  return v[lo] + frac * (v[lo + 1] - v[lo]);
}

WeeklyThresholds weekly_thresholds(const Dataset& raw, int index, double p) {
  const GridSpec& spec = raw.spec;
  WeeklyThresholds out;
  out.rows = spec.rows;
  out.cols = spec.cols;
  out.weeks_per_year = spec.weeks_per_year;
  out.percentile = p;
  const std::size_t slots = spec.pixel_count() * static_cast<std::size_t>(spec.weeks_per_year);
  out.thresholds.assign(slots, kNaN);
  out.means.assign(slots, kNaN);
  out.counts.assign(slots, 0);
  std::vector<double> samples;
  for (std::size_t px = 0; px < spec.pixel_count(); ++px) {
    if (!spec.land_mask[px]) continue;
    for (int w = 0; w < spec.weeks_per_year; ++w) {
      samples.clear();
      for (int t = w; t < spec.weeks; t += spec.weeks_per_year) {
        const double v = raw.index_value(px, t, index);
        if (!std::isnan(v)) samples.push_back(v);
      }
      const std::size_t s = out.slot(px, w);
      out.counts[s] = static_cast<int>(samples.size());
      if (samples.size() < 2) continue;
      out.thresholds[s] = weekly_percentile_threshold(samples, p);
      double sum = 0.0;
      for (const double v : samples) sum += v;
      out.means[s] = sum / static_cast<double>(samples.size());
    }
  }
  return out;
}

DroughtState drought_state(double value, double threshold) {
  if (std::isnan(value) || std::isnan(threshold)) return DroughtState::kUndefined;
  return value < threshold ? DroughtState::kDrought : DroughtState::kNone;
}

std::vector<DroughtState> detect_drought(std::span<const double> values, std::span<const double> thresholds) {
  if (values.size() != thresholds.size()) throw Error(ErrorKind::kShapeMismatch, "values and thresholds differ in length");
  std::vector<DroughtState> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = drought_state(values[i], thresholds[i]);
  return out;
}

ClassificationReport classification_metrics(std::span<const DroughtState> predicted,
                                            std::span<const DroughtState> observed) {
  if (predicted.size() != observed.size()) throw Error(ErrorKind::kShapeMismatch, "mask lengths differ");
  ClassificationReport r;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] == DroughtState::kUndefined || observed[i] == DroughtState::kUndefined) {
      ++r.excluded;
      continue;
    }
    const bool p = predicted[i] == DroughtState::kDrought;
    const bool o = observed[i] == DroughtState::kDrought;
    if (p && o) ++r.tp;
    if (p && !o) ++r.fp;
    if (!p && !o) ++r.tn;
    if (!p && o) ++r.fn;
  }
  if (r.scored() == 0) throw Error(ErrorKind::kEmptyComparison, "no slot is defined on both sides");
  r.accuracy = static_cast<double>(r.tp + r.tn) / static_cast<double>(r.scored());
  r.precision_undefined = r.tp + r.fp == 0;
  r.precision = r.precision_undefined ? 0.0 : static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp);
  return r;
}

std::string ClassificationReport::to_text() const {
  std::ostringstream os;
  char buf[96];
  os << "metric\tvalue\n";
  os << "tp\t" << tp << "\nfp\t" << fp << "\ntn\t" << tn << "\nfn\t" << fn << "\n";
  std::snprintf(buf, sizeof(buf), "accuracy\t%.6f\nprecision\t%.6f\n", accuracy, precision);
  os << buf;
  os << "precision_undefined\t" << (precision_undefined ? 1 : 0) << "\n";
  os << "excluded\t" << excluded << "\n";
  return os.str();
}

std::vector<DroughtState> observed_drought(const Dataset& raw, const WeeklyThresholds& thresholds, int index) {
  std::vector<DroughtState> out;
  for (std::size_t px = 0; px < raw.spec.pixel_count(); ++px) {
    if (!raw.spec.land_mask[px]) continue;
    for (int t = 0; t < raw.spec.weeks; ++t) {
      out.push_back(drought_state(raw.index_value(px, t, index), thresholds.threshold(px, t)));
    }
  }
  return out;
}

Assessment assess_soil_moisture(const Checkpoint& ckpt, const Dataset& raw, const PreparedData& data, double p,
                                int threads) {
  const Forecaster forecaster(ckpt);
  const SampleSet test = test_samples(data, forecaster.config());
  if (test.size() == 0) throw Error(ErrorKind::kEmptySplit, "no test samples to assess");
  const WeeklyThresholds th = weekly_thresholds(raw, kSoilMoisture, p);
  const double scale = data.table.index_max[kSoilMoisture];

  std::vector<std::vector<AssessedSlot>> per_pixel(test.pixels.size());
  parallel_chunks(test.pixels.size(), threads, [&](std::size_t begin, std::size_t end, int) {
    for (std::size_t i = begin; i < end; ++i) {
      const std::size_t px = test.pixels[i];
      for (const Window& w : test.windows) {
        const auto pred = forecaster.predict(data, std::span(&px, 1), w);
        for (int h = 0; h < w.horizon_len; ++h) {
          const int week = w.horizon_start() + h;
          AssessedSlot s;
          s.pixel = px;
          s.week = week;
          s.observed = raw.index_value(px, week, kSoilMoisture);
          s.predicted = pred[0](h, kSoilMoisture) * scale;
          s.threshold = th.threshold(px, week);
          const double mean = th.mean(px, week);
          s.observed_deviation = s.observed - mean;
          s.predicted_deviation = s.predicted - mean;
          s.observed_state = drought_state(s.observed, s.threshold);
          s.predicted_state = drought_state(s.predicted, s.threshold);
          per_pixel[i].push_back(s);
        }
      }
    }
  });
  Assessment out;
  std::vector<DroughtState> predicted, observed;
  for (const auto& slots : per_pixel) {
    for (const auto& s : slots) {
      out.slots.push_back(s);
      predicted.push_back(s.predicted_state);
      observed.push_back(s.observed_state);
    }
  }
  out.report = classification_metrics(predicted, observed);
  return out;
}

std::string Assessment::slots_csv(const GridSpec& spec) const {
  std::ostringstream os;
  os << "row,col,week,observed,predicted,threshold,observed_deviation,predicted_deviation,observed_drought,"
        "predicted_drought\n";
  char buf[320];
  for (const auto& s : slots) {
    const PixelCoord c = spec.coord(s.pixel);
    std::snprintf(buf, sizeof(buf), "%d,%d,%d,%.9g,%.9g,%.9g,%.9g,%.9g,%s,%s\n", c.row, c.col, s.week, s.observed,
                  s.predicted, s.threshold, s.observed_deviation, s.predicted_deviation, state_text(s.observed_state),
                  state_text(s.predicted_state));
    os << buf;
  }
  return os.str();
}

Raster Assessment::predicted_mask(const GridSpec& spec, int week) const { return mask_for_week(spec, slots, week, true); }
Raster Assessment::observed_mask(const GridSpec& spec, int week) const { return mask_for_week(spec, slots, week, false); }

void export_drought_mask(const Raster& mask, const std::string& stem) {
  write_pgm(stem + ".pgm", mask, RasterRange{0.0, 1.0});
  write_csv(stem + ".csv", mask);
}

}  // namespace spdrought
