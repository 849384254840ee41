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

#include "spdrought/gridcube.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

#include "spdrought/byte_io.hpp"
#include "spdrought/crc64.hpp"
#include "spdrought/error.hpp"

namespace spdrought {
namespace {

constexpr std::string_view kMagic = "DSG1";
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 4 + 4 * 9;

std::uint32_t canonical_bits(float v) {
  return std::isnan(v) ? kCanonicalNanBits : std::bit_cast<std::uint32_t>(v);
}

void put_floats(ByteWriter& w, const std::vector<float>& values) {
  for (const float v : values) w.put_u32(canonical_bits(v));
}

void get_floats(ByteReader& r, std::vector<float>& values, std::size_t n, std::string_view what) {
  r.require(n * 4, what);
  values.resize(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = std::bit_cast<float>(r.get_u32(what));
}

bool floats_bitwise_equal(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (canonical_bits(a[i]) != canonical_bits(b[i])) return false;
  }
  return true;
}

[[noreturn]] void violation(const std::string& what) { throw Error(ErrorKind::kInvariantViolation, what); }

}  // namespace

float canonical_nan() { return std::bit_cast<float>(kCanonicalNanBits); }

std::size_t GridSpec::land_count() const {
  std::size_t n = 0;
  for (const auto m : land_mask) n += m != 0;
  return n;
}

std::vector<PixelCoord> GridSpec::land_pixels() const {
  std::vector<PixelCoord> out;
  out.reserve(land_count());
  for (std::size_t i = 0; i < land_mask.size(); ++i) {
    if (land_mask[i]) out.push_back(coord(i));
  }
  return out;
}

Dataset Dataset::allocate(GridSpec spec, int categories) {
  Dataset ds;
  const std::size_t pixels = spec.pixel_count();
  const std::size_t weeks = static_cast<std::size_t>(spec.weeks);
  ds.spec = std::move(spec);
  ds.statics.categories = categories;
  ds.statics.numeric.assign(pixels * kNumericStaticCount, canonical_nan());
  ds.statics.land_cover.assign(pixels, 0);
  ds.dynamics.values.assign(pixels * weeks * kDynamicCount, canonical_nan());
  ds.indices.values.assign(pixels * weeks * kIndexCount, canonical_nan());
  return ds;
}

void Dataset::validate() const {
  if (spec.rows < 1 || spec.cols < 1) violation("grid extents must be positive");
  if (spec.weeks < 1) violation("weeks must be positive");
  if (spec.weeks_per_year < 1) violation("weeks_per_year must be positive");
  const std::size_t pixels = spec.pixel_count();
  const std::size_t weeks = static_cast<std::size_t>(spec.weeks);
  if (spec.land_mask.size() != pixels) violation("land mask size mismatch");
  for (const auto m : spec.land_mask) {
    if (m > 1) violation("land mask entries must be 0 or 1");
  }
  if (spec.land_count() == 0) violation("grid has no land pixel");
  if (statics.categories < 1 || statics.categories > 65535) violation("category count out of range");
  if (statics.land_cover.size() != pixels) violation("land cover size mismatch");
  if (statics.numeric.size() != pixels * kNumericStaticCount) violation("static feature size mismatch");
  if (dynamics.values.size() != pixels * weeks * kDynamicCount) violation("dynamic cube size mismatch");
  if (indices.values.size() != pixels * weeks * kIndexCount) violation("index cube size mismatch");

  for (std::size_t p = 0; p < pixels; ++p) {
    if (statics.land_cover[p] >= statics.categories) {
      violation("land cover id " + std::to_string(statics.land_cover[p]) + " >= " +
                std::to_string(statics.categories));
    }
    for (int f = 0; f < kNumericStaticCount; ++f) {
      const float v = statics.numeric[numeric_offset(p, f)];
      if (std::isinf(v)) violation("infinite static feature");
      const bool is_std = f == kSmStd || f == kEsiStd || f == kSifStd;
      if (is_std && v < 0.0f) violation("negative standard deviation feature");
    }
  }
  auto check_cube = [&](const std::vector<float>& values, std::size_t per_pixel, const char* name) {
    for (std::size_t p = 0; p < pixels; ++p) {
      const bool land = spec.land_mask[p] != 0;
      const float* row = values.data() + p * per_pixel;
      for (std::size_t i = 0; i < per_pixel; ++i) {
        if (std::isinf(row[i])) violation(std::string("infinite value in ") + name);
        if (!land && !std::isnan(row[i])) violation(std::string("ocean pixel carries data in ") + name);
      }
    }
  };
  check_cube(dynamics.values, weeks * kDynamicCount, "dynamics");
  check_cube(indices.values, weeks * kIndexCount, "indices");
}

bool bitwise_equal(const Dataset& a, const Dataset& b) {
  return a.spec.rows == b.spec.rows && a.spec.cols == b.spec.cols && a.spec.weeks == b.spec.weeks &&
         a.spec.weeks_per_year == b.spec.weeks_per_year && a.spec.land_mask == b.spec.land_mask &&
         a.statics.categories == b.statics.categories && a.statics.land_cover == b.statics.land_cover &&
         floats_bitwise_equal(a.statics.numeric, b.statics.numeric) &&
         floats_bitwise_equal(a.dynamics.values, b.dynamics.values) &&
         floats_bitwise_equal(a.indices.values, b.indices.values);
}

std::vector<std::byte> encode_dataset(const Dataset& ds) {
  ByteWriter w;
  w.put_string(kMagic);
  w.put_u32(kVersion);
  w.put_u32(static_cast<std::uint32_t>(ds.spec.rows));
  w.put_u32(static_cast<std::uint32_t>(ds.spec.cols));
  w.put_u32(static_cast<std::uint32_t>(ds.spec.weeks));
  w.put_u32(static_cast<std::uint32_t>(ds.spec.weeks_per_year));
  w.put_u32(kDynamicCount);
  w.put_u32(kIndexCount);
  w.put_u32(kNumericStaticCount);
  w.put_u32(static_cast<std::uint32_t>(ds.statics.categories));
  for (const auto m : ds.spec.land_mask) w.put_u8(m);
  for (const auto id : ds.statics.land_cover) w.put_u16(id);
  put_floats(w, ds.statics.numeric);
  put_floats(w, ds.dynamics.values);
  put_floats(w, ds.indices.values);
  const std::uint64_t crc = crc64_xz(w.bytes());
  w.put_u64(crc);
  return std::move(w).take();
}

Dataset decode_dataset(std::span<const std::byte> bytes) {
  ByteReader r(bytes);
  if (r.remaining() < kMagic.size()) {
    throw Error(ErrorKind::kTruncatedPayload, "stream shorter than the magic number");
  }
  if (r.get_string(kMagic.size(), "magic") != kMagic) {
    throw Error(ErrorKind::kBadMagic, "stream does not start with \"DSG1\"");
  }
  r.require(kHeaderBytes - kMagic.size(), "header");
  const std::uint32_t version = r.get_u32("version");
  if (version != kVersion) violation("unsupported DSG1 version " + std::to_string(version));
  GridSpec spec;
  const std::uint64_t rows = r.get_u32("rows");
  const std::uint64_t cols = r.get_u32("cols");
  const std::uint64_t weeks = r.get_u32("weeks");
  spec.weeks_per_year = static_cast<int>(r.get_u32("weeks_per_year"));
  const std::uint32_t m = r.get_u32("M");
  const std::uint32_t k = r.get_u32("K");
  const std::uint32_t n = r.get_u32("N_numeric");
  const std::uint32_t categories = r.get_u32("C");
  if (m != kDynamicCount || k != kIndexCount || n != kNumericStaticCount) {
    violation("unexpected variable counts M=" + std::to_string(m) + " K=" + std::to_string(k) +
              " N=" + std::to_string(n));
  }
  if (rows == 0 || cols == 0 || weeks == 0) violation("grid extents must be positive");
  if (rows > std::numeric_limits<int>::max() || cols > std::numeric_limits<int>::max() ||
      weeks > std::numeric_limits<int>::max()) {
    violation("grid extents overflow");
  }
  if (categories < 1 || categories > 65535) violation("category count out of range");

  // Extents are u32, so the byte count cannot overflow 128 bits.
  const std::uint64_t pixels = rows * cols;
  const unsigned __int128 payload =
      static_cast<unsigned __int128>(pixels) * (1 + 2 + 4 * kNumericStaticCount) +
      static_cast<unsigned __int128>(pixels) * weeks * 4 * (kDynamicCount + kIndexCount) + 8;
  if (payload > r.remaining()) {
    throw Error(ErrorKind::kTruncatedPayload, "declared extents exceed the available bytes");
  }

  spec.rows = static_cast<int>(rows);
  spec.cols = static_cast<int>(cols);
  spec.weeks = static_cast<int>(weeks);
  Dataset ds;
  ds.spec = std::move(spec);
  ds.statics.categories = static_cast<int>(categories);
  ds.spec.land_mask.resize(pixels);
  for (auto& mask : ds.spec.land_mask) mask = r.get_u8("land mask");
  ds.statics.land_cover.resize(pixels);
  for (auto& id : ds.statics.land_cover) id = r.get_u16("land cover");
  get_floats(r, ds.statics.numeric, pixels * kNumericStaticCount, "numeric statics");
  get_floats(r, ds.dynamics.values, pixels * weeks * kDynamicCount, "dynamics");
  get_floats(r, ds.indices.values, pixels * weeks * kIndexCount, "indices");
  const std::size_t body = r.position();
  const std::uint64_t stored = r.get_u64("crc");
  if (r.remaining() != 0) violation("trailing bytes after CRC");
  const std::uint64_t actual = crc64_xz(bytes.first(body));
  if (stored != actual) throw Error(ErrorKind::kCrcMismatch, "DSG1 checksum mismatch");
  ds.validate();
  return ds;
}

void save_dataset(const std::string& path, const Dataset& ds) { write_file_bytes(path, encode_dataset(ds)); }

Dataset load_dataset(const std::string& path) { return decode_dataset(read_file_bytes(path)); }

}  // namespace spdrought
