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

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spdrought/autodiff.hpp"

namespace spdrought {

struct NamedTensor {
  std::string name;
  std::vector<std::uint64_t> extents;  // empty for a scalar
  std::vector<double> data;

  std::size_t element_count() const;
};

// Ordered list of named f64 tensors, serialized as SPCK.
struct Checkpoint {
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(std::string_view name) const;
  const NamedTensor& at(std::string_view name) const;

  void set_scalar(std::string name, double value);
  double scalar(std::string_view name) const;
  double scalar_or(std::string_view name, double fallback) const;

  template <class T>
  void add_parameters(const ad::ParameterSet<T>& params, std::string_view prefix = "param.") {
    for (const auto& p : params) {
      NamedTensor t;
      t.name = std::string(prefix) + p.name;
      t.extents = {static_cast<std::uint64_t>(p.value.rows()), static_cast<std::uint64_t>(p.value.cols())};
      t.data.resize(static_cast<std::size_t>(p.value.size()));
      for (Eigen::Index i = 0; i < p.value.size(); ++i) t.data[static_cast<std::size_t>(i)] = static_cast<double>(p.value.data()[i]);
      tensors.push_back(std::move(t));
    }
  }

  // Every parameter must be present with matching extents.
  template <class T>
  void load_parameters(ad::ParameterSet<T>& params, std::string_view prefix = "param.") const {
    for (auto& p : params) {
      const NamedTensor& t = at(std::string(prefix) + p.name);
      if (t.extents.size() != 2 || t.extents[0] != static_cast<std::uint64_t>(p.value.rows()) ||
          t.extents[1] != static_cast<std::uint64_t>(p.value.cols())) {
        throw Error(ErrorKind::kShapeMismatch, "checkpoint tensor " + t.name + " has the wrong extents");
      }
      for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = static_cast<T>(t.data[static_cast<std::size_t>(i)]);
    }
  }
};

bool bitwise_equal(const Checkpoint& a, const Checkpoint& b);

std::vector<std::byte> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::byte> bytes);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace spdrought
