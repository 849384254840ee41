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

#include "spdrought/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "spdrought/error.hpp"
#include "spdrought/rng.hpp"

namespace spdrought {
namespace {

template <std::size_t N>
void scale_vars(std::vector<float>& values, std::size_t stride, const std::array<float, N>& max) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    float& v = values[i];
    if (!std::isnan(v)) v /= max[i % stride];
  }
}

template <std::size_t N>
void unscale_vars(std::vector<float>& values, std::size_t stride, const std::array<float, N>& max) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    float& v = values[i];
    if (!std::isnan(v)) v *= max[i % stride];
  }
}

// NaN-ignoring max of each variable over land pixels; -inf when no sample.
template <std::size_t N>
std::array<float, N> land_max(const std::vector<float>& values, std::size_t per_pixel, const GridSpec& spec) {
  std::array<float, N> out;
  out.fill(-std::numeric_limits<float>::infinity());
  for (std::size_t p = 0; p < spec.pixel_count(); ++p) {
    if (!spec.land_mask[p]) continue;
    const float* row = values.data() + p * per_pixel;
    for (std::size_t i = 0; i < per_pixel; ++i) {
      const float v = row[i];
      if (!std::isnan(v)) out[i % N] = std::max(out[i % N], v);
    }
  }
  return out;
}

template <std::size_t N, std::size_t M>
void resolve_degenerate(std::array<float, N>& max, const std::array<std::string_view, M>& names,
                        std::vector<std::string>& flagged) {
  for (std::size_t i = 0; i < N; ++i) {
    if (!(max[i] != 0.0f) || std::isinf(max[i])) {
      flagged.emplace_back(names[i]);
      max[i] = 1.0f;
    }
  }
}

}  // namespace

std::string MaxTable::to_text() const {
  std::ostringstream out;
  out.precision(9);
  out << "# group name max\n";
  for (int v = 0; v < kDynamicCount; ++v) out << "dynamic " << kDynamicNames[v] << ' ' << dynamic_max[v] << '\n';
  for (int k = 0; k < kIndexCount; ++k) out << "index " << kIndexNames[k] << ' ' << index_max[k] << '\n';
  for (int f = 0; f < kNumericStaticCount; ++f) {
    out << "static " << kNumericStaticNames[f] << ' ' << static_max[f] << '\n';
  }
  for (const auto& name : degenerate) out << "degenerate " << name << " 1\n";
  return out.str();
}

NormalizedDataset normalize_by_max(const Dataset& ds) {
  NormalizedDataset out{ds, {}};
  const auto weeks = static_cast<std::size_t>(ds.spec.weeks);
  MaxTable& table = out.table;
  table.dynamic_max = land_max<kDynamicCount>(ds.dynamics.values, weeks * kDynamicCount, ds.spec);
  table.index_max = land_max<kIndexCount>(ds.indices.values, weeks * kIndexCount, ds.spec);
  table.static_max = land_max<kNumericStaticCount>(ds.statics.numeric, kNumericStaticCount, ds.spec);
  resolve_degenerate(table.dynamic_max, kDynamicNames, table.degenerate);
  resolve_degenerate(table.index_max, kIndexNames, table.degenerate);
  resolve_degenerate(table.static_max, kNumericStaticNames, table.degenerate);
  scale_vars(out.dataset.dynamics.values, kDynamicCount, table.dynamic_max);
  scale_vars(out.dataset.indices.values, kIndexCount, table.index_max);
  scale_vars(out.dataset.statics.numeric, kNumericStaticCount, table.static_max);
  return out;
}

Dataset denormalize(const Dataset& normalized, const MaxTable& table) {
  Dataset out = normalized;
  unscale_vars(out.dynamics.values, kDynamicCount, table.dynamic_max);
  unscale_vars(out.indices.values, kIndexCount, table.index_max);
  unscale_vars(out.statics.numeric, kNumericStaticCount, table.static_max);
  return out;
}

ImputedCube impute_weekly_climatology(SeriesCube cube, int weeks_per_year, const std::vector<std::uint8_t>& active) {
  if (weeks_per_year < 1 || cube.weeks % weeks_per_year != 0) {
    throw Error(ErrorKind::kConfigError, "weeks must be a positive multiple of weeks_per_year");
  }
  if (!active.empty() && active.size() != cube.pixels) {
    throw Error(ErrorKind::kShapeMismatch, "activity mask does not match the cube");
  }
  const int years = cube.weeks / weeks_per_year;
  ImputedCube out;
  for (std::size_t p = 0; p < cube.pixels; ++p) {
    if (!active.empty() && !active[p]) continue;
    for (int w = 0; w < weeks_per_year; ++w) {
      for (int v = 0; v < cube.vars; ++v) {
        double sum = 0.0;
        int n = 0;
        bool any_missing = false;
        for (int y = 0; y < years; ++y) {
          const float x = cube.at(p, y * weeks_per_year + w, v);
          if (std::isnan(x)) {
            any_missing = true;
          } else {
            sum += x;
            ++n;
          }
        }
        if (!any_missing) continue;
        float fill = 0.0f;
        if (n > 0) {
          fill = static_cast<float>(sum / n);
        } else {
          out.empty_slots.push_back({p, w, v});
        }
        for (int y = 0; y < years; ++y) {
          float& x = cube.at(p, y * weeks_per_year + w, v);
          if (std::isnan(x)) x = fill;
        }
      }
    }
  }
  out.cube = std::move(cube);
  return out;
}

std::string SplitAssignment::to_text() const {
  std::ostringstream out;
  out << "# block_size=" << block_size << " seed=" << seed << " tiles=" << tile_count
      << " train_tiles=" << train_tiles << "\n# side row col\n";
  for (const auto& p : train_pixels) out << "train " << p.row << ' ' << p.col << '\n';
  for (const auto& p : test_pixels) out << "test " << p.row << ' ' << p.col << '\n';
  return out.str();
}

SplitAssignment block_split(const GridSpec& spec, int block, double train_frac, std::uint64_t seed) {
  if (block < 1) throw Error(ErrorKind::kConfigError, "block size must be >= 1");
  if (!(train_frac > 0.0 && train_frac < 1.0)) throw Error(ErrorKind::kConfigError, "train fraction must lie in (0, 1)");
  const int tile_rows = (spec.rows + block - 1) / block;
  const int tile_cols = (spec.cols + block - 1) / block;
  const std::size_t tiles = static_cast<std::size_t>(tile_rows) * tile_cols;
  if (tiles < 2) throw Error(ErrorKind::kConfigError, "grid yields fewer than 2 tiles");

  std::vector<std::uint32_t> order(tiles);
  std::iota(order.begin(), order.end(), 0u);
  auto rng = rng_stream(seed, "split");
  rng.shuffle(std::span(order));
  const auto train_count = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(tiles)));
  std::vector<std::uint8_t> is_train(tiles, 0);
  for (std::size_t i = 0; i < train_count; ++i) is_train[order[i]] = 1;

  SplitAssignment out;
  out.block_size = block;
  out.seed = seed;
  out.tile_count = tiles;
  out.train_tiles = train_count;
  for (int r = 0; r < spec.rows; ++r) {
    for (int c = 0; c < spec.cols; ++c) {
      const PixelCoord p{r, c};
      if (!spec.is_land(p)) continue;
      const std::size_t tile = static_cast<std::size_t>(r / block) * tile_cols + c / block;
      (is_train[tile] ? out.train_pixels : out.test_pixels).push_back(p);
    }
  }
  return out;
}

std::vector<Window> enumerate_windows(int weeks, int context, int horizon, int stride) {
  if (context < 1 || horizon < 1 || stride < 1) {
    throw Error(ErrorKind::kConfigError, "context, horizon and stride must be >= 1");
  }
  std::vector<Window> out;
  for (int start = 0; start + context + horizon <= weeks; start += stride) {
    out.push_back({start, context, horizon});
  }
  return out;
}

}  // namespace spdrought
