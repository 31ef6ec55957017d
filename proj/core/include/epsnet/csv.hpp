// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace epsnet::csv {

/// Splits one CSV line. Supports double-quoted fields with "" escapes; no embedded newlines.
std::vector<std::string> split_line(std::string_view line);

/// Header-indexed line reader over an input stream.
class Reader {
 public:
  explicit Reader(std::istream& in);

  const std::vector<std::string>& header() const { return header_; }
  std::optional<std::size_t> column(std::string_view name) const;

  /// Reads the next non-empty row. Returns false at end of input.
  bool next(std::vector<std::string>& fields);
  /// 1-based physical line number of the row last returned by next().
  std::size_t line() const { return line_; }

 private:
  std::istream& in_;
  std::vector<std::string> header_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t line_ = 0;
};

/// Shortest text that round-trips to the same double. NaN is written as an empty field.
std::string format_double(double v);
/// Empty text parses to nullopt-as-missing via `missing`; malformed text sets ok=false.
struct ParsedNumber {
  bool ok = true;
  bool missing = false;
  double value = 0.0;
};
ParsedNumber parse_double(std::string_view text);

std::string quote_if_needed(std::string_view field);

}  // namespace epsnet::csv
