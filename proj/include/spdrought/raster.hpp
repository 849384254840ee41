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

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace spdrought {

// rows x cols grid of doubles; NaN marks cells without a value (ocean,
// unscored or held-out pixels).
struct Raster {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;

  Raster() = default;
  Raster(int r, int c);
  double& at(int r, int c) { return values[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
};

struct RasterRange {
  double min = 0.0;
  double max = 0.0;
};

// Plain PGM (P2), maxval 255: finite cells scaled linearly onto 0..254 over
// `range` (default: the finite min/max), NaN cells written as 255. A sidecar
// `<path>.minmax.txt` records the range used. Returns that range.
RasterRange write_pgm(const std::string& path, const Raster& raster, std::optional<RasterRange> range = std::nullopt);

// One "row,col,value" line per cell, NaN written as "nan".
void write_csv(const std::string& path, const Raster& raster);

std::string pgm_text(const Raster& raster, const RasterRange& range);
std::string csv_text(const Raster& raster);

}  // namespace spdrought
