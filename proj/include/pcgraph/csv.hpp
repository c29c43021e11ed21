// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The pcgraph Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace pcg {

using CsvCell = std::variant<std::string, double, std::int64_t, std::size_t, bool>;

/// Numbers print in the shortest %g form that round-trips; infinities print as
/// "inf"/"-inf" and NaN as "nan". Booleans print as 0/1.
std::string format_cell(const CsvCell& cell);
/// Quotes fields holding a comma, quote, CR or LF (RFC 4180).
std::string escape_field(std::string_view field);

/// In-memory table with a fixed header. Rows must match the header arity.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  void add_row(std::vector<CsvCell> row);
  const std::vector<std::string>& header() const noexcept { return header_; }
  std::size_t rows() const noexcept { return rows_.size(); }
  const std::vector<std::string>& row(std::size_t i) const { return rows_.at(i); }

  /// CRLF line endings.
  std::string str() const;
  void write(const std::string& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Parses RFC 4180 text back into rows (header included).
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

}  // namespace pcg
