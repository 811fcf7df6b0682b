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

#include <ostream>
#include <string>
#include <vector>

#include "dmosum/csv.hpp"
#include "dmosum/error.hpp"

namespace dmosum {

/// Column-named table of preformatted cells, written as CSV.
class Table {
 public:
  explicit Table(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  void add_row(std::vector<std::string> row) {
    require(row.size() == columns_.size(), "row width differs from the column count");
    rows_.push_back(std::move(row));
  }

  const std::vector<std::string>& columns() const noexcept { return columns_; }
  const std::vector<std::vector<std::string>>& rows() const noexcept { return rows_; }

  void write_csv(std::ostream& out) const {
    write_line(out, columns_);
    for (const auto& row : rows_) write_line(out, row);
  }

  /// Long format: the id columns, then `variable`, `value` for every other column.
  Table to_long(std::size_t id_columns) const {
    require(id_columns <= columns_.size(), "too many id columns");
    std::vector<std::string> cols(columns_.begin(), columns_.begin() + static_cast<long>(id_columns));
    cols.emplace_back("variable");
    cols.emplace_back("value");
    Table out(std::move(cols));
    for (const auto& row : rows_) {
      for (std::size_t c = id_columns; c < columns_.size(); ++c) {
        std::vector<std::string> r(row.begin(), row.begin() + static_cast<long>(id_columns));
        r.push_back(columns_[c]);
        r.push_back(row[c]);
        out.add_row(std::move(r));
      }
    }
    return out;
  }

 private:
  static void write_line(std::ostream& out, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
  }

  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace dmosum
