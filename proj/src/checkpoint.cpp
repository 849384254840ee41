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

#include "spdrought/checkpoint.hpp"

#include <bit>

#include "spdrought/byte_io.hpp"
#include "spdrought/crc64.hpp"

namespace spdrought {
namespace {

constexpr std::string_view kMagic = "SPCK";
constexpr std::uint32_t kVersion = 1;

}  // namespace

std::size_t NamedTensor::element_count() const {
  std::size_t n = 1;
  for (const auto e : extents) n *= static_cast<std::size_t>(e);
  return n;
}

const NamedTensor* Checkpoint::find(std::string_view name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

const NamedTensor& Checkpoint::at(std::string_view name) const {
  const auto* t = find(name);
  if (t == nullptr) throw Error(ErrorKind::kInvariantViolation, "checkpoint has no tensor " + std::string(name));
  return *t;
}

void Checkpoint::set_scalar(std::string name, double value) {
  for (auto& t : tensors) {
    if (t.name == name) {
      t.extents.clear();
      t.data = {value};
      return;
    }
  }
  tensors.push_back({std::move(name), {}, {value}});
}

double Checkpoint::scalar(std::string_view name) const {
  const auto& t = at(name);
  if (t.data.size() != 1) throw Error(ErrorKind::kShapeMismatch, "tensor " + t.name + " is not a scalar");
  return t.data[0];
}

double Checkpoint::scalar_or(std::string_view name, double fallback) const {
  return find(name) != nullptr ? scalar(name) : fallback;
}

bool bitwise_equal(const Checkpoint& a, const Checkpoint& b) {
  if (a.tensors.size() != b.tensors.size()) return false;
  for (std::size_t i = 0; i < a.tensors.size(); ++i) {
    const auto& x = a.tensors[i];
    const auto& y = b.tensors[i];
    if (x.name != y.name || x.extents != y.extents || x.data.size() != y.data.size()) return false;
    for (std::size_t j = 0; j < x.data.size(); ++j) {
      if (std::bit_cast<std::uint64_t>(x.data[j]) != std::bit_cast<std::uint64_t>(y.data[j])) return false;
    }
  }
  return true;
}

std::vector<std::byte> encode_checkpoint(const Checkpoint& ckpt) {
  ByteWriter w;
  w.put_string(kMagic);
  w.put_u32(kVersion);
  w.put_u32(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    if (t.data.size() != t.element_count()) {
      throw Error(ErrorKind::kShapeMismatch, "tensor " + t.name + " payload does not match its extents");
    }
    w.put_u32(static_cast<std::uint32_t>(t.name.size()));
    w.put_string(t.name);
    w.put_u32(static_cast<std::uint32_t>(t.extents.size()));
    for (const auto e : t.extents) w.put_u64(e);
    for (const double v : t.data) w.put_f64(v);
  }
  w.put_u64(crc64_xz(w.bytes()));
  return std::move(w).take();
}

Checkpoint decode_checkpoint(std::span<const std::byte> bytes) {
  ByteReader r(bytes);
  if (r.remaining() < kMagic.size()) throw Error(ErrorKind::kTruncatedPayload, "checkpoint shorter than its magic");
  if (r.get_string(kMagic.size(), "magic") != kMagic) throw Error(ErrorKind::kBadMagic, "not an SPCK checkpoint");
  const auto version = r.get_u32("version");
  if (version != kVersion) {
    throw Error(ErrorKind::kInvariantViolation, "unsupported SPCK version " + std::to_string(version));
  }
  const auto count = r.get_u32("tensor count");
  Checkpoint ckpt;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    const auto name_len = r.get_u32("name length");
    t.name = r.get_string(name_len, "tensor name");
    const auto rank = r.get_u32("rank");
    r.require(static_cast<std::size_t>(rank) * 8, "extents");
    unsigned __int128 n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      t.extents.push_back(r.get_u64("extent"));
      n *= t.extents.back();
    }
    if (n * 8 > r.remaining()) throw Error(ErrorKind::kTruncatedPayload, "tensor " + t.name + " payload");
    t.data.resize(static_cast<std::size_t>(n));
    for (auto& v : t.data) v = r.get_f64("tensor payload");
    ckpt.tensors.push_back(std::move(t));
  }
  const std::size_t body = r.position();
  const auto stored = r.get_u64("crc");
  if (r.remaining() != 0) throw Error(ErrorKind::kInvariantViolation, "trailing bytes after checkpoint CRC");
  if (stored != crc64_xz(bytes.first(body))) throw Error(ErrorKind::kCrcMismatch, "checkpoint CRC mismatch");
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  write_file_bytes(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(read_file_bytes(path)); }

}  // namespace spdrought
