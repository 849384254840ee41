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
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace spdrought {

inline constexpr int kDynamicCount = 11;
inline constexpr int kIndexCount = 3;
inline constexpr int kNumericStaticCount = 8;
inline constexpr int kStaticCount = kNumericStaticCount + 1;
inline constexpr int kChannelCount = kIndexCount + kDynamicCount;

enum DynamicVar : int {
  kTemperature = 0,
  kRadiation,
  kVpd,
  kPrecipitation,
  kWindSpeed,
  kPet,
  kPdsi,
  kSurfacePressure,
  kSmRoot,
  kVod,
  kLai,
};

enum IndexVar : int { kSoilMoisture = 0, kEsi, kSif };

enum NumericStatic : int {
  kElevation = 0,
  kCanopyHeight,
  kSmMean,
  kSmStd,
  kEsiMean,
  kEsiStd,
  kSifMean,
  kSifStd,
};

inline constexpr std::array<std::string_view, kDynamicCount> kDynamicNames = {
    "temperature", "radiation", "vpd",  "precipitation", "wind_speed", "pet",
    "pdsi",        "surface_pressure", "sm_root", "vod",  "lai"};
inline constexpr std::array<std::string_view, kIndexCount> kIndexNames = {"sm", "esi", "sif"};
inline constexpr std::array<std::string_view, kNumericStaticCount> kNumericStaticNames = {
    "elevation", "canopy_height", "sm_mean", "sm_std", "esi_mean", "esi_std", "sif_mean", "sif_std"};

// The single NaN bit pattern written to disk.
inline constexpr std::uint32_t kCanonicalNanBits = 0x7FC00000u;
float canonical_nan();

struct PixelCoord {
  int row = 0;
  int col = 0;
  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

struct GridSpec {
  int rows = 0;
  int cols = 0;
  int weeks = 0;
  int weeks_per_year = 52;
  std::vector<std::uint8_t> land_mask;  // rows*cols, 1 = land

  std::size_t pixel_count() const { return static_cast<std::size_t>(rows) * cols; }
  std::size_t pixel_index(PixelCoord p) const { return static_cast<std::size_t>(p.row) * cols + p.col; }
  PixelCoord coord(std::size_t index) const {
    return {static_cast<int>(index / cols), static_cast<int>(index % cols)};
  }
  bool in_bounds(PixelCoord p) const { return p.row >= 0 && p.row < rows && p.col >= 0 && p.col < cols; }
  bool is_land(PixelCoord p) const { return land_mask[pixel_index(p)] != 0; }
  std::size_t land_count() const;
  std::vector<PixelCoord> land_pixels() const;
};

struct StaticFeatures {
  std::vector<float> numeric;           // rows*cols*8
  std::vector<std::uint16_t> land_cover;  // rows*cols, ids in [0, categories)
  int categories = 8;
};

struct DynamicCube {
  std::vector<float> values;  // rows*cols*weeks*11
};

struct IndexCube {
  std::vector<float> values;  // rows*cols*weeks*3
};

struct Dataset {
  GridSpec spec;
  StaticFeatures statics;
  DynamicCube dynamics;
  IndexCube indices;

  std::size_t dyn_offset(std::size_t pixel, int week, int var) const {
    return (pixel * spec.weeks + week) * kDynamicCount + var;
  }
  std::size_t index_offset(std::size_t pixel, int week, int k) const {
    return (pixel * spec.weeks + week) * kIndexCount + k;
  }
  std::size_t numeric_offset(std::size_t pixel, int f) const { return pixel * kNumericStaticCount + f; }

  float dynamic_value(std::size_t pixel, int week, int var) const { return dynamics.values[dyn_offset(pixel, week, var)]; }
  float index_value(std::size_t pixel, int week, int k) const { return indices.values[index_offset(pixel, week, k)]; }

  // Allocates all arrays for `spec` filled with NaN (land cover 0).
  static Dataset allocate(GridSpec spec, int categories);

  // Throws Error(kInvariantViolation) on the first violated invariant.
  void validate() const;
};

// Bit-level equality with every NaN treated as the canonical pattern.
bool bitwise_equal(const Dataset& a, const Dataset& b);

std::vector<std::byte> encode_dataset(const Dataset& ds);
Dataset decode_dataset(std::span<const std::byte> bytes);

void save_dataset(const std::string& path, const Dataset& ds);
Dataset load_dataset(const std::string& path);

struct SynthConfig {
  int rows = 24;
  int cols = 24;
  int years = 11;
  int weeks_per_year = 52;
  double ocean_fraction = 0.42;
  int drought_events = 6;
  double nan_fraction = 0.02;
  int categories = 8;
  int smoothing_radius = 2;
  int patch_size = 6;

  void validate() const;
};

// One planted drought: precipitation is suppressed over the block
// [row0, row1) x [col0, col1) x [week0, week1); index k is lowered over the
// same block shifted by kEventLag[k] weeks.
struct DroughtEvent {
  int row0 = 0, row1 = 0, col0 = 0, col1 = 0, week0 = 0, week1 = 0;
};
inline constexpr std::array<int, kIndexCount> kEventLag = {0, 1, 2};

struct SynthTruth {
  std::vector<DroughtEvent> events;
  // Weights of the lagged precipitation response of soil moisture.
  std::vector<double> precipitation_kernel;
};

Dataset generate_synthetic(const SynthConfig& cfg, std::uint64_t seed, SynthTruth* truth = nullptr);

}  // namespace spdrought
