// Copyright 2026 The ndst Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ndst/error.hpp"

namespace ndst {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedWav: return "MalformedWav";
    case ErrorCode::kUnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kSilentInput: return "SilentInput";
    case ErrorCode::kTooShort: return "TooShort";
    case ErrorCode::kUnknownEffect: return "UnknownEffect";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNonScalarLoss: return "NonScalarLoss";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kNoNonSilentAudio: return "NoNonSilentAudio";
    case ErrorCode::kDataGenerationFailed: return "DataGenerationFailed";
    case ErrorCode::kEffectMismatch: return "EffectMismatch";
    case ErrorCode::kVersionMismatch: return "VersionMismatch";
    case ErrorCode::kCorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorCode::kSingleClass: return "SingleClass";
    case ErrorCode::kDegenerateCovariance: return "DegenerateCovariance";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kNumericFailure: return "NumericFailure";
  }
  return "Unknown";
}

}  // namespace ndst
