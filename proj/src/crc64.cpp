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

#include "spdrought/crc64.hpp"

#include <array>

namespace spdrought {
namespace {

constexpr std::uint64_t kReflectedPoly = 0xC96C5795D7870F42ULL;

constexpr std::array<std::uint64_t, 256> make_table() {
  std::array<std::uint64_t, 256> table{};
  for (std::uint64_t i = 0; i < 256; ++i) {
    std::uint64_t crc = i;
    for (int bit = 0; bit < 8; ++bit) {
      crc = (crc & 1) ? (crc >> 1) ^ kReflectedPoly : crc >> 1;
    }
    table[i] = crc;
  }
  return table;
}

constexpr auto kTable = make_table();

}  // namespace

void Crc64::update(std::span<const std::byte> data) {
  std::uint64_t crc = state_;
  for (const std::byte b : data) {
    crc = kTable[(crc ^ static_cast<std::uint64_t>(b)) & 0xFF] ^ (crc >> 8);
  }
  state_ = crc;
}

std::uint64_t crc64_xz(std::span<const std::byte> data) {
  Crc64 crc;
  crc.update(data);
  return crc.value();
}

}  // namespace spdrought
