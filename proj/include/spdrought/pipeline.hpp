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

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "spdrought/gridcube.hpp"

namespace spdrought {

// Global (all land pixels) maxima used to scale each variable into [0, 1].
struct MaxTable {
  std::array<float, kDynamicCount> dynamic_max{};
  std::array<float, kIndexCount> index_max{};
  std::array<float, kNumericStaticCount> static_max{};
  // Names of variables whose max was 0 or which were all-NaN; left unscaled
  // and stored with max 1.
  std::vector<std::string> degenerate;

  std::string to_text() const;
};

struct NormalizedDataset {
  Dataset dataset;
  MaxTable table;
};

// Divides every dynamic predictor, drought index and numeric static feature
// by its NaN-ignoring maximum over land pixels.
NormalizedDataset normalize_by_max(const Dataset& ds);
Dataset denormalize(const Dataset& normalized, const MaxTable& table);

// A dense [pixels x weeks x vars] cube, the shape shared by the dynamic and
// index arrays of a Dataset.
struct SeriesCube {
  std::size_t pixels = 0;
  int weeks = 0;
  int vars = 0;
  std::vector<float> values;

  float& at(std::size_t p, int t, int v) { return values[(p * weeks + t) * vars + v]; }
  float at(std::size_t p, int t, int v) const { return values[(p * weeks + t) * vars + v]; }
};

struct EmptySlot {
  std::size_t pixel = 0;
  int calendar_week = 0;
  int var = 0;
};

struct ImputedCube {
  SeriesCube cube;
  std::vector<EmptySlot> empty_slots;  // filled with 0.0
};

// Replaces each NaN at (pixel, year, calendar week, var) with the mean over
// years of the observed values at the same (pixel, calendar week, var).
// Pixels with `active[p] == 0` are passed through untouched; an empty
// `active` means every pixel.
ImputedCube impute_weekly_climatology(SeriesCube cube, int weeks_per_year,
                                      const std::vector<std::uint8_t>& active = {});

struct SplitAssignment {
  int block_size = 5;
  std::uint64_t seed = 0;
  std::size_t tile_count = 0;
  std::size_t train_tiles = 0;
  std::vector<PixelCoord> train_pixels;
  std::vector<PixelCoord> test_pixels;

  std::string to_text() const;
};

SplitAssignment block_split(const GridSpec& spec, int block, double train_frac, std::uint64_t seed);

struct Window {
  int context_start = 0;
  int context_len = 100;
  int horizon_len = 26;

  int horizon_start() const { return context_start + context_len; }
  int end() const { return context_start + context_len + horizon_len; }
  friend bool operator==(const Window&, const Window&) = default;
};

std::vector<Window> enumerate_windows(int weeks, int context, int horizon, int stride);

}  // namespace spdrought
