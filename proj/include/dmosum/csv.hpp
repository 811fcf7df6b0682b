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

#include <charconv>
#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "dmosum/detection.hpp"
#include "dmosum/error.hpp"

namespace dmosum {

/// Shortest round-trip text for a double; "inf"/"-inf"/"nan" otherwise.
inline std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

/// Parses a full field as a double (accepts a leading '+', "inf", "nan").
inline std::optional<double> parse_double(std::string_view field) {
  field = trim(field);
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  if (field.empty()) return std::nullopt;
  double value = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) return std::nullopt;
  return value;
}

inline std::vector<std::string_view> split(std::string_view line, char delimiter) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(delimiter, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

enum class HeaderMode { Auto, Present, Absent };

/// Reads one numeric record per line. Blank lines are skipped. With
/// HeaderMode::Auto the first line is treated as a header when any of its
/// fields is not a number. row_index() reports 1-based file line numbers.
class CsvRowReader final : public RowSource {
 public:
  explicit CsvRowReader(std::istream& in, char delimiter = ',', HeaderMode header = HeaderMode::Auto)
      : in_(in), delimiter_(delimiter), header_(header) {}

  bool next(std::vector<double>& row) override {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (trim(line).empty()) continue;
      const auto fields = split(line, delimiter_);
      if (first_line_) {
        first_line_ = false;
        if (header_ == HeaderMode::Present) continue;
        if (header_ == HeaderMode::Auto) {
          bool numeric = true;
          for (auto f : fields) numeric = numeric && parse_double(f).has_value();
          if (!numeric) continue;
        }
      }
      row.clear();
      for (std::size_t c = 0; c < fields.size(); ++c) {
        const auto v = parse_double(fields[c]);
        if (!v || !std::isfinite(*v)) {
          throw Error(Errc::ParseError,
                      "line " + std::to_string(line_no_) + ", column " + std::to_string(c + 1) +
                          ": not a finite number: '" + std::string(trim(fields[c])) + "'",
                      line_no_);
        }
        row.push_back(*v);
      }
      return true;
    }
    return false;
  }

  long row_index() const override { return line_no_; }

 private:
  std::istream& in_;
  char delimiter_;
  HeaderMode header_;
  long line_no_ = 0;
  bool first_line_ = true;
};

/// Writes a time-major CSV (one row per time step, one column per stream).
inline void write_matrix_csv(std::ostream& out, const DataMatrix& data, char delimiter = ',', bool header = false) {
  if (header) {
    for (long i = 0; i < data.streams(); ++i) out << (i ? std::string(1, delimiter) : "") << "x" << (i + 1);
    out << '\n';
  }
  for (long t = 0; t < data.length(); ++t) {
    for (long i = 0; i < data.streams(); ++i) {
      if (i) out << delimiter;
      out << format_double(data(i, t));
    }
    out << '\n';
  }
}

inline std::string optional_field(const std::optional<long>& v) { return v ? std::to_string(*v) : ""; }

/// Key-value detection report: header line plus one value line.
inline void write_outcome_csv(std::ostream& out, const DetectionOutcome& outcome) {
  out << "stopped_at_k,alarm_time_abs,total_transmissions,steps_executed\n"
      << optional_field(outcome.stopped_at) << ',' << optional_field(outcome.alarm_time_abs) << ','
      << outcome.total_transmissions << ',' << outcome.steps_executed << '\n';
}

}  // namespace dmosum
