// Copyright 2026 The dmosum Authors
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

#include <optional>
#include <stdexcept>
#include <string>

namespace dmosum {

enum class Errc {
  InvalidArgument,
  TooShort,
  DegenerateTraining,
  NonPositiveLRV,
  WindowNotFull,
  InvalidScenario,
  SourceExhausted,
  ParseError,
  InsufficientReps,
  SearchRangeEmpty,
  NoTransition,
};

inline const char* errc_name(Errc code) {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::TooShort: return "TooShort";
    case Errc::DegenerateTraining: return "DegenerateTraining";
    case Errc::NonPositiveLRV: return "NonPositiveLRV";
    case Errc::WindowNotFull: return "WindowNotFull";
    case Errc::InvalidScenario: return "InvalidScenario";
    case Errc::SourceExhausted: return "SourceExhausted";
    case Errc::ParseError: return "ParseError";
    case Errc::InsufficientReps: return "InsufficientReps";
    case Errc::SearchRangeEmpty: return "SearchRangeEmpty";
    case Errc::NoTransition: return "NoTransition";
  }
  return "Unknown";
}

/// Single exception type for the library. `code()` identifies the failure;
/// `row()` is set for data errors that can be traced to an input row.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what, std::optional<long> row = std::nullopt)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code), row_(row) {}

  Errc code() const noexcept { return code_; }
  std::optional<long> row() const noexcept { return row_; }

 private:
  Errc code_;
  std::optional<long> row_;
};

inline void require(bool condition, const std::string& what) {
  if (!condition) throw Error(Errc::InvalidArgument, what);
}

}  // namespace dmosum
