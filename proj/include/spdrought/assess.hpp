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

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "spdrought/gridcube.hpp"
#include "spdrought/raster.hpp"
#include "spdrought/trainer.hpp"

namespace spdrought {

inline constexpr double kDroughtPercentile = 0.3;

// Linear-interpolation percentile over the non-NaN samples:
// rank r = (n - 1) p, v[floor r] + frac(r) (v[floor r + 1] - v[floor r]).
double weekly_percentile_threshold(std::span<const double> samples, double p);

// Per-pixel, per-calendar-week percentile and mean of one index over all
// years of a (raw, observed) dataset. NaN where fewer than 2 samples exist.
struct WeeklyThresholds {
  int rows = 0;
  int cols = 0;
  int weeks_per_year = 52;
  double percentile = kDroughtPercentile;
  std::vector<double> thresholds;  // pixels x weeks_per_year
  std::vector<double> means;       // climatological mean, for the deviation column
  std::vector<int> counts;

  std::size_t slot(std::size_t pixel, int calendar_week) const {
    return pixel * static_cast<std::size_t>(weeks_per_year) + calendar_week;
  }
  double threshold(std::size_t pixel, int week) const { return thresholds[slot(pixel, week % weeks_per_year)]; }
  double mean(std::size_t pixel, int week) const { return means[slot(pixel, week % weeks_per_year)]; }
};

WeeklyThresholds weekly_thresholds(const Dataset& raw, int index = kSoilMoisture, double p = kDroughtPercentile);

enum class DroughtState : std::int8_t { kUndefined = -1, kNone = 0, kDrought = 1 };

// drought <=> value < threshold; NaN on either side is undefined.
DroughtState drought_state(double value, double threshold);
std::vector<DroughtState> detect_drought(std::span<const double> values, std::span<const double> thresholds);

struct ClassificationReport {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double accuracy = 0.0;
  double precision = 0.0;
  bool precision_undefined = false;  // TP + FP == 0, precision reported as 0
  std::size_t excluded = 0;          // pairs with an undefined side

  std::size_t scored() const { return tp + fp + tn + fn; }
  std::string to_text() const;
};

// "drought" is the positive class; pairs with an undefined side are dropped.
ClassificationReport classification_metrics(std::span<const DroughtState> predicted,
                                            std::span<const DroughtState> observed);

// One scored (pixel, week) of a soil-moisture assessment, in raw units.
struct AssessedSlot {
  std::size_t pixel = 0;
  int week = 0;
  double observed = 0.0;
  double predicted = 0.0;
  double threshold = 0.0;
  double observed_deviation = 0.0;   // observed - climatological mean
  double predicted_deviation = 0.0;  // predicted - climatological mean
  DroughtState observed_state = DroughtState::kUndefined;
  DroughtState predicted_state = DroughtState::kUndefined;
};

struct Assessment {
  ClassificationReport report;
  std::vector<AssessedSlot> slots;

  std::string slots_csv(const GridSpec& spec) const;
  // rows x cols mask for one week: 1 drought, 0 none, NaN elsewhere.
  Raster predicted_mask(const GridSpec& spec, int week) const;
  Raster observed_mask(const GridSpec& spec, int week) const;
};

// Scores de-normalized soil-moisture forecasts of the checkpoint on its test
// samples against observed drought, both thresholded on observed history.
Assessment assess_soil_moisture(const Checkpoint& ckpt, const Dataset& raw, const PreparedData& data,
                                double p = kDroughtPercentile, int threads = 1);

// Observed drought state of every land (pixel, week) of one index.
std::vector<DroughtState> observed_drought(const Dataset& raw, const WeeklyThresholds& thresholds,
                                           int index = kSoilMoisture);

// Writes <stem>.pgm (+ sidecar) and <stem>.csv: land 0/1 on a fixed 0..1
// scale (levels 0 and 254), ocean and undefined cells 255 / nan.
void export_drought_mask(const Raster& mask, const std::string& stem);

}  // namespace spdrought
