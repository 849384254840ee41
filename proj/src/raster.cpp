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

#include "spdrought/raster.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "spdrought/byte_io.hpp"

namespace spdrought {

Raster::Raster(int r, int c)
    : rows(r), cols(c), values(static_cast<std::size_t>(r) * c, std::numeric_limits<double>::quiet_NaN()) {}

namespace {

RasterRange finite_range(const Raster& raster) {
  RasterRange out{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const double v : raster.values) {
    if (!std::isfinite(v)) continue;
    out.min = std::min(out.min, v);
    out.max = std::max(out.max, v);
  }
  if (out.min > out.max) out = {0.0, 0.0};
  return out;
}

}  // namespace

std::string pgm_text(const Raster& raster, const RasterRange& range) {
  std::ostringstream os;
  os << "P2\n" << raster.cols << ' ' << raster.rows << "\n255\n";
  const double span = range.max - range.min;
  for (int r = 0; r < raster.rows; ++r) {
    for (int c = 0; c < raster.cols; ++c) {
      const double v = raster.at(r, c);
      int level = 255;
      if (std::isfinite(v)) {
        const double u = span > 0.0 ? (v - range.min) / span : 0.0;
        level = static_cast<int>(std::lround(std::clamp(u, 0.0, 1.0) * 254.0));
      }
      os << level << (c + 1 < raster.cols ? ' ' : '\n');
    }
  }
  return os.str();
}

std::string csv_text(const Raster& raster) {
  std::ostringstream os;
  os << "row,col,value\n";
  char buf[64];
  for (int r = 0; r < raster.rows; ++r) {
    for (int c = 0; c < raster.cols; ++c) {
      const double v = raster.at(r, c);
      if (std::isnan(v)) {
        std::snprintf(buf, sizeof(buf), "%d,%d,nan\n", r, c);
      } else {
        std::snprintf(buf, sizeof(buf), "%d,%d,%.17g\n", r, c, v);
      }
      os << buf;
    }
  }
  return os.str();
}

RasterRange write_pgm(const std::string& path, const Raster& raster, std::optional<RasterRange> range) {
  const RasterRange used = range.value_or(finite_range(raster));
  write_text_file(path, pgm_text(raster, used));
  char buf[128];
  std::snprintf(buf, sizeof(buf), "min=%.17g\nmax=%.17g\nnan_level=255\n", used.min, used.max);
  write_text_file(path + ".minmax.txt", buf);
  return used;
}

void write_csv(const std::string& path, const Raster& raster) { write_text_file(path, csv_text(raster)); }

}  // namespace spdrought
