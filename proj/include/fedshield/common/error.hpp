// Copyright 2026 The FedShield Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FEDSHIELD_COMMON_ERROR_HPP_
#define FEDSHIELD_COMMON_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fedshield {

enum class ErrorCode {
  kParameter,
  kCapacity,
  kRange,
  kState,
  kDepthExhausted,
  kFormat,
  kShape,
  kNumeric,
  kDivergence,
  kConfig,
  kIo,
};

inline std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParameter: return "parameter";
    case ErrorCode::kCapacity: return "capacity";
    case ErrorCode::kRange: return "range";
    case ErrorCode::kState: return "state";
    case ErrorCode::kDepthExhausted: return "depth-exhausted";
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kShape: return "shape";
    case ErrorCode::kNumeric: return "numeric";
    case ErrorCode::kDivergence: return "divergence";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

// All library failures derive from Error; code() identifies the category.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + " error: " +
                           message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Raised by local training when the loss exceeds the divergence threshold.
// Carries the loss history observed up to that point.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& message, std::vector<double> history)
      : Error(ErrorCode::kDivergence, message), history_(std::move(history)) {}

  const std::vector<double>& history() const noexcept { return history_; }

 private:
  std::vector<double> history_;
};

[[noreturn]] inline void Fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void Require(bool condition, ErrorCode code,
                    const std::string& message) {
  if (!condition) Fail(code, message);
}

}  // namespace fedshield

#endif  // FEDSHIELD_COMMON_ERROR_HPP_
