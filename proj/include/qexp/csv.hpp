// Copyright 2026 The qexp Authors
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

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <initializer_list>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace qexp {

/// Decimal text with 12 significant digits, "inf"/"nan" for non-finite values.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";  // folds -0
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

/// A CSV cell: numbers are formatted with format_number, strings are emitted
/// verbatim (callers keep them free of commas).
class CsvCell {
 public:
  CsvCell(double v) : text_(format_number(v)) {}
  CsvCell(int v) : text_(std::to_string(v)) {}
  CsvCell(long v) : text_(std::to_string(v)) {}
  CsvCell(long long v) : text_(std::to_string(v)) {}
  CsvCell(unsigned v) : text_(std::to_string(v)) {}
  CsvCell(unsigned long v) : text_(std::to_string(v)) {}
  CsvCell(unsigned long long v) : text_(std::to_string(v)) {}
  CsvCell(bool v) : text_(v ? "1" : "0") {}
  CsvCell(std::string s) : text_(std::move(s)) {}
  CsvCell(const char* s) : text_(s) {}

  const std::string& text() const noexcept { return text_; }

 private:
  std::string text_;
};

/// In-memory CSV table: header row plus data rows.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(std::vector<CsvCell> row) {
    std::vector<std::string> r;
    r.reserve(row.size());
    for (auto& c : row) r.push_back(c.text());
    rows_.push_back(std::move(r));
  }

  const std::vector<std::string>& header() const noexcept { return header_; }
  const std::vector<std::vector<std::string>>& rows() const noexcept { return rows_; }

  std::string str() const {
    std::string out;
    append_line(out, header_);
    for (const auto& r : rows_) append_line(out, r);
    return out;
  }

  friend std::ostream& operator<<(std::ostream& os, const CsvTable& t) { return os << t.str(); }

 private:
  static void append_line(std::string& out, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  }

  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace qexp
