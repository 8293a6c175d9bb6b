// Copyright 2026 The Tandem Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include <string>
#include <string_view>

#include "tandem/error.hpp"

namespace tandem {

enum class ModalityRole { kVision, kAudio };

inline const char* to_string(ModalityRole role) {
  return role == ModalityRole::kVision ? "vision" : "audio";
}

inline ModalityRole opposite(ModalityRole role) {
  return role == ModalityRole::kVision ? ModalityRole::kAudio : ModalityRole::kVision;
}

inline ModalityRole modality_from_string(std::string_view s) {
  if (s == "vision" || s == "vl" || s == "VL") return ModalityRole::kVision;
  if (s == "audio" || s == "al" || s == "AL") return ModalityRole::kAudio;
  throw Error(ErrorCode::kInvalidArgument, "unknown modality '" + std::string(s) + "'");
}

}  // namespace tandem
