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
#include <cstring>
#include <limits>
#include <string>

#include "spdrought/byte_io.hpp"
#include "spdrought/checkpoint.hpp"
#include "spdrought/crc64.hpp"
#include "spdrought/error.hpp"
#include "spdrought/gridcube.hpp"
#include "spdrought/rng.hpp"

using namespace spdrought;

namespace {

std::span<const std::byte> as_bytes(std::string_view s) { return std::as_bytes(std::span(s.data(), s.size())); }

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no spdrought::Error thrown";
  return ErrorKind::kIoError;
}

Dataset random_dataset(std::uint64_t seed, int rows, int cols, int weeks) {
  SplitMix64 rng(seed);
  GridSpec spec;
  spec.rows = rows;
  spec.cols = cols;
  spec.weeks = weeks;
  spec.weeks_per_year = 52;
  spec.land_mask.resize(spec.pixel_count());
  for (auto& m : spec.land_mask) m = rng.uniform() < 0.7 ? 1 : 0;
  spec.land_mask[0] = 1;
  Dataset ds = Dataset::allocate(spec, 5);
  for (std::size_t p = 0; p < spec.pixel_count(); ++p) {
    if (!spec.land_mask[p]) continue;
    ds.statics.land_cover[p] = static_cast<std::uint16_t>(rng.below(5));
    for (int f = 0; f < kNumericStaticCount; ++f) ds.statics.numeric[ds.numeric_offset(p, f)] = static_cast<float>(rng.uniform());
    for (int t = 0; t < weeks; ++t) {
      for (int v = 0; v < kDynamicCount; ++v) {
        ds.dynamics.values[ds.dyn_offset(p, t, v)] = rng.uniform() < 0.1 ? canonical_nan() : static_cast<float>(rng.normal());
      }
      for (int k = 0; k < kIndexCount; ++k) {
        ds.indices.values[ds.index_offset(p, t, k)] = rng.uniform() < 0.1 ? canonical_nan() : static_cast<float>(rng.uniform());
      }
    }
  }
  return ds;
}

}  // namespace

TEST(Crc64, CheckValue) {
  EXPECT_EQ(crc64_xz(as_bytes("123456789")), 0x995DC9BBDF1939FAULL);
  EXPECT_EQ(crc64_xz({}), 0u);
}

TEST(Crc64, IncrementalMatchesOneShot) {
  Crc64 c;
  c.update(as_bytes("1234"));
  c.update(as_bytes("56789"));
  EXPECT_EQ(c.value(), 0x995DC9BBDF1939FAULL);
}

TEST(Dsg1, RoundTripIsBitExactIncludingNan) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Dataset ds = random_dataset(seed, 3 + static_cast<int>(seed), 4, 60);
    const auto bytes = encode_dataset(ds);
    const Dataset back = decode_dataset(bytes);
    EXPECT_TRUE(bitwise_equal(ds, back));
    EXPECT_EQ(encode_dataset(back), bytes);
  }
}

TEST(Dsg1, EncodingIsDeterministic) {
  const Dataset ds = random_dataset(11, 4, 4, 52);
  EXPECT_EQ(encode_dataset(ds), encode_dataset(ds));
}

TEST(Dsg1, NonCanonicalNanIsWrittenCanonically) {
  Dataset ds = random_dataset(2, 2, 2, 52);
  const float odd_nan = std::bit_cast<float>(0x7FC01234u);
  ds.dynamics.values[ds.dyn_offset(0, 0, 0)] = odd_nan;
  const Dataset back = decode_dataset(encode_dataset(ds));
  EXPECT_EQ(std::bit_cast<std::uint32_t>(back.dynamics.values[back.dyn_offset(0, 0, 0)]), kCanonicalNanBits);
}

TEST(Dsg1, HeaderEchoesSpec) {
  const Dataset ds = random_dataset(3, 2, 2, 52);
  const auto bytes = encode_dataset(ds);
  ByteReader r(bytes);
  EXPECT_EQ(r.get_string(4, "magic"), "DSG1");
  r.get_u32("version");
  EXPECT_EQ(r.get_u32("rows"), 2u);
  EXPECT_EQ(r.get_u32("cols"), 2u);
  EXPECT_EQ(r.get_u32("weeks"), 52u);
  EXPECT_EQ(r.get_u32("weeks_per_year"), 52u);
  EXPECT_EQ(r.get_u32("M"), 11u);
  EXPECT_EQ(r.get_u32("K"), 3u);
  EXPECT_EQ(r.get_u32("numeric"), 8u);
}

TEST(Dsg1, BadMagic) {
  auto bytes = encode_dataset(random_dataset(4, 2, 2, 52));
  std::memcpy(bytes.data(), "XXXX", 4);
  EXPECT_EQ(kind_of([&] { decode_dataset(bytes); }), ErrorKind::kBadMagic);
}

TEST(Dsg1, TruncatedDynamics) {
  const Dataset ds = random_dataset(5, 2, 2, 52);
  auto bytes = encode_dataset(ds);
  // Keep the header, statics and half of the dynamics block.
  const std::size_t dyn_bytes = ds.dynamics.values.size() * 4;
  bytes.resize(bytes.size() - 8 - ds.indices.values.size() * 4 - dyn_bytes / 2);
  EXPECT_EQ(kind_of([&] { decode_dataset(bytes); }), ErrorKind::kTruncatedPayload);
}

TEST(Dsg1, CorruptedPayloadFailsCrc) {
  auto bytes = encode_dataset(random_dataset(6, 2, 2, 52));
  bytes[bytes.size() / 2] ^= std::byte{0x01};
  EXPECT_EQ(kind_of([&] { decode_dataset(bytes); }), ErrorKind::kCrcMismatch);
}

TEST(Spck, RoundTripIsBitExact) {
  SplitMix64 rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    Checkpoint ck;
    for (int t = 0; t < 4; ++t) {
      NamedTensor nt;
      nt.name = "tensor." + std::to_string(t);
      nt.extents = {1 + rng.below(4), 1 + rng.below(5)};
      nt.data.resize(nt.extents[0] * nt.extents[1]);
      for (auto& v : nt.data) v = rng.uniform() < 0.1 ? std::numeric_limits<double>::quiet_NaN() : rng.normal();
      ck.tensors.push_back(nt);
    }
    ck.set_scalar("config.answer", 42.0);
    const auto bytes = encode_checkpoint(ck);
    const Checkpoint back = decode_checkpoint(bytes);
    EXPECT_TRUE(bitwise_equal(ck, back));
    EXPECT_EQ(encode_checkpoint(back), bytes);
    EXPECT_EQ(back.scalar("config.answer"), 42.0);
  }
}

TEST(Spck, Errors) {
  Checkpoint ck;
  ck.set_scalar("x", 1.0);
  auto bytes = encode_checkpoint(ck);
  auto bad = bytes;
  bad[0] = std::byte{'Z'};
  EXPECT_EQ(kind_of([&] { decode_checkpoint(bad); }), ErrorKind::kBadMagic);
  auto flipped = bytes;
  flipped[flipped.size() - 9] ^= std::byte{0x10};
  EXPECT_EQ(kind_of([&] { decode_checkpoint(flipped); }), ErrorKind::kCrcMismatch);
  auto shortened = bytes;
  shortened.resize(shortened.size() - 12);
  EXPECT_EQ(kind_of([&] { decode_checkpoint(shortened); }), ErrorKind::kTruncatedPayload);
}

TEST(Spck, SaveLoadFile) {
  Checkpoint ck;
  ck.set_scalar("a", -0.0);
  ck.set_scalar("b", 1e-300);
  const std::string path = ::testing::TempDir() + "spck_roundtrip.spck";
  save_checkpoint(path, ck);
  EXPECT_TRUE(bitwise_equal(ck, load_checkpoint(path)));
}
