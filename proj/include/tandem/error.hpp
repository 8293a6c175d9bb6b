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

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace tandem {

enum class ErrorCode {
  kInvalidArgument,
  kZeroDuration,
  kEmptyChunk,
  kInvalidPrediction,
  kUnknownLabel,
  kMalformedInterval,
  kDegenerateVocabulary,
  kShapeMismatch,
  kFrozenPolicy,
  kTimeout,
  kEndpointUnavailable,
  kMalformedResponse,
  kDuplicateChunk,
  kMissingAnnotation,
  kParseError,
  kTaxonomyMismatch,
  kIoError,
};

inline constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kZeroDuration: return "ZeroDuration";
    case ErrorCode::kEmptyChunk: return "EmptyChunk";
    case ErrorCode::kInvalidPrediction: return "InvalidPrediction";
    case ErrorCode::kUnknownLabel: return "UnknownLabel";
    case ErrorCode::kMalformedInterval: return "MalformedInterval";
    case ErrorCode::kDegenerateVocabulary: return "DegenerateVocabulary";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kFrozenPolicy: return "FrozenPolicy";
    case ErrorCode::kTimeout: return "Timeout";
    case ErrorCode::kEndpointUnavailable: return "EndpointUnavailable";
    case ErrorCode::kMalformedResponse: return "MalformedResponse";
    case ErrorCode::kDuplicateChunk: return "DuplicateChunk";
    case ErrorCode::kMissingAnnotation: return "MissingAnnotation";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kTaxonomyMismatch: return "TaxonomyMismatch";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

// Endpoint failures are the only retryable class.
inline constexpr bool is_retryable(ErrorCode code) {
  return code == ErrorCode::kTimeout || code == ErrorCode::kEndpointUnavailable ||
         code == ErrorCode::kMalformedResponse;
}

/// Single exception type for the library. `code()` identifies the failure;
/// `line()` is set for file-format errors, `attempts()` for endpoint calls.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  Error(ErrorCode code, const std::string& message, std::size_t line)
      : std::runtime_error(std::string(to_string(code)) + " (line " + std::to_string(line) +
                           "): " + message),
        code_(code),
        line_(line) {}

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::size_t> line() const noexcept { return line_; }
  int attempts() const noexcept { return attempts_; }

  Error with_attempts(int attempts) const {
    Error copy = *this;
    copy.attempts_ = attempts;
    return copy;
  }

 private:
  ErrorCode code_;
  std::optional<std::size_t> line_;
  int attempts_ = 0;
};

}  // namespace tandem
