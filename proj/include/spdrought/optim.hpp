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

#include <cmath>
#include <vector>

#include "spdrought/autodiff.hpp"

namespace spdrought {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First and second moments per parameter, in ParameterSet order.
template <class T>
struct AdamState {
  std::vector<ad::Matrix<T>> m;
  std::vector<ad::Matrix<T>> v;
  long step = 0;
};

// One bias-corrected Adam update from the gradients held in `params`.
template <class T>
void adam_step(ad::ParameterSet<T>& params, AdamState<T>& state, const AdamConfig& cfg) {
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.push_back(ad::Matrix<T>::Zero(p.value.rows(), p.value.cols()));
      state.v.push_back(ad::Matrix<T>::Zero(p.value.rows(), p.value.cols()));
    }
  }
  if (state.m.size() != params.size()) throw Error(ErrorKind::kShapeMismatch, "optimizer state does not match parameters");
  ++state.step;
  const T b1 = static_cast<T>(cfg.beta1);
  const T b2 = static_cast<T>(cfg.beta2);
  const T c1 = static_cast<T>(1.0 - std::pow(cfg.beta1, static_cast<double>(state.step)));
  const T c2 = static_cast<T>(1.0 - std::pow(cfg.beta2, static_cast<double>(state.step)));
  const T lr = static_cast<T>(cfg.learning_rate);
  const T eps = static_cast<T>(cfg.epsilon);
  std::size_t i = 0;
  for (auto& p : params) {
    auto& m = state.m[i];
    auto& v = state.v[i];
    m = b1 * m + (T(1) - b1) * p.grad;
    v = b2 * v + (T(1) - b2) * p.grad.cwiseAbs2();
    p.value.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    ++i;
  }
}

}  // namespace spdrought
