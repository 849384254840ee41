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

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spdrought/error.hpp"

namespace spdrought {

// Little-endian serialization helpers shared by the DSG1 and SPCK formats.
class ByteWriter {
 public:
  void put_bytes(std::span<const std::byte> data) { buf_.insert(buf_.end(), data.begin(), data.end()); }
  void put_string(std::string_view s) { put_bytes(std::as_bytes(std::span(s.data(), s.size()))); }
  void put_u8(std::uint8_t v) { buf_.push_back(static_cast<std::byte>(v)); }
  void put_u16(std::uint16_t v) { put_le(v); }
  void put_u32(std::uint32_t v) { put_le(v); }
  void put_u64(std::uint64_t v) { put_le(v); }
  void put_f32(float v) { put_le(std::bit_cast<std::uint32_t>(v)); }
  void put_f64(double v) { put_le(std::bit_cast<std::uint64_t>(v)); }

  const std::vector<std::byte>& bytes() const& { return buf_; }
  std::vector<std::byte> take() && { return std::move(buf_); }
  std::size_t size() const { return buf_.size(); }

 private:
  template <class U>
  void put_le(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      buf_.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFF));
    }
  }

  std::vector<std::byte> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::byte> data) : data_(data) {}

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

  void require(std::size_t n, std::string_view what) const {
    if (remaining() < n) {
      throw Error(ErrorKind::kTruncatedPayload,
                  std::string(what) + " needs " + std::to_string(n) + " bytes, " +
                      std::to_string(remaining()) + " available");
    }
  }

  std::span<const std::byte> get_bytes(std::size_t n, std::string_view what) {
    require(n, what);
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  std::string get_string(std::size_t n, std::string_view what) {
    auto b = get_bytes(n, what);
    return std::string(reinterpret_cast<const char*>(b.data()), b.size());
  }

  std::uint8_t get_u8(std::string_view what) { return get_le<std::uint8_t>(what); }
  std::uint16_t get_u16(std::string_view what) { return get_le<std::uint16_t>(what); }
  std::uint32_t get_u32(std::string_view what) { return get_le<std::uint32_t>(what); }
  std::uint64_t get_u64(std::string_view what) { return get_le<std::uint64_t>(what); }
  float get_f32(std::string_view what) { return std::bit_cast<float>(get_le<std::uint32_t>(what)); }
  double get_f64(std::string_view what) { return std::bit_cast<double>(get_le<std::uint64_t>(what)); }

 private:
  template <class U>
  U get_le(std::string_view what) {
    require(sizeof(U), what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<U>(data_[pos_ + i]) << (8 * i));
    }
    pos_ += sizeof(U);
    return v;
  }

  std::span<const std::byte> data_;
  std::size_t pos_ = 0;
};

std::vector<std::byte> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, std::span<const std::byte> data);
void write_text_file(const std::string& path, std::string_view text);

}  // namespace spdrought
