// Copyright 2026 The htec Authors.
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

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace htec {

enum class ErrorCode {
  kEmptyInput,
  kEmptyCorpus,
  kEmptyWord,
  kEmptyReference,
  kTooLong,
  kShapeError,
  kInvalidLabeledPair,
  kCorruptCheckpoint,
  kVersionError,
  kConfigError,
  kDiverged,
  kMissingGold,
  kParseError,
  kIoError,
};

std::string_view error_code_name(ErrorCode code);

/// All recoverable failures in the library are reported as htec::Error.
/// The code lets callers (CLI exit codes, HTTP status mapping) dispatch on
/// the failure class without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace htec
