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

#include <span>
#include <vector>

#include "dmosum/error.hpp"

namespace dmosum {

/// Stream-major d x T matrix. Column t is time index t (0-based), so the
/// first m columns are the training period.
class DataMatrix {
 public:
  DataMatrix() = default;
  DataMatrix(long streams, long length)
      : streams_(streams), length_(length), values_(static_cast<std::size_t>(streams * length), 0.0) {
    require(streams >= 0 && length >= 0, "matrix dimensions must be non-negative");
  }

  long streams() const noexcept { return streams_; }
  long length() const noexcept { return length_; }

  double& operator()(long stream, long t) noexcept { return values_[index(stream, t)]; }
  double operator()(long stream, long t) const noexcept { return values_[index(stream, t)]; }

  std::span<double> stream(long i) noexcept { return {values_.data() + index(i, 0), static_cast<std::size_t>(length_)}; }
  std::span<const double> stream(long i) const noexcept {
    return {values_.data() + index(i, 0), static_cast<std::size_t>(length_)};
  }

  void column(long t, std::span<double> out) const noexcept {
    for (long i = 0; i < streams_; ++i) out[static_cast<std::size_t>(i)] = (*this)(i, t);
  }

  bool operator==(const DataMatrix&) const = default;

 private:
  std::size_t index(long stream, long t) const noexcept { return static_cast<std::size_t>(stream * length_ + t); }

  long streams_ = 0;
  long length_ = 0;
  std::vector<double> values_;
};

}  // namespace dmosum
