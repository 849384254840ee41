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

#include "spdrought/error.hpp"

namespace spdrought {

std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kBadMagic: return "BadMagic";
    case ErrorKind::kTruncatedPayload: return "TruncatedPayload";
    case ErrorKind::kCrcMismatch: return "CrcMismatch";
    case ErrorKind::kInvariantViolation: return "InvariantViolation";
    case ErrorKind::kConfigError: return "ConfigError";
    case ErrorKind::kDegenerateVariable: return "DegenerateVariable";
    case ErrorKind::kIsolatedPixel: return "IsolatedPixel";
    case ErrorKind::kNonFiniteLogit: return "NonFiniteLogit";
    case ErrorKind::kShapeMismatch: return "ShapeMismatch";
    case ErrorKind::kIdOutOfRange: return "IdOutOfRange";
    case ErrorKind::kNonFiniteActivation: return "NonFiniteActivation";
    case ErrorKind::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::kNonFiniteGradient: return "NonFiniteGradient";
    case ErrorKind::kEmptySplit: return "EmptySplit";
    case ErrorKind::kInsufficientSamples: return "InsufficientSamples";
    case ErrorKind::kEmptyComparison: return "EmptyComparison";
    case ErrorKind::kIoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace spdrought
