#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace rise::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  /// 1-based file line of each row (header is line 1).
  std::vector<std::size_t> lines;

  /// Column position by name; throws SchemaError when absent and required.
  std::optional<std::size_t> find(std::string_view column) const;
  std::size_t column(std::string_view column) const;
};

/// RFC 4180 style reader: comma separated, double-quoted fields may contain
/// commas and doubled quotes. Blank lines are skipped.
Table read(const std::filesystem::path& path);
Table parse(std::string_view text);

std::vector<std::string> split_line(std::string_view line);

/// Quotes a field only when needed.
std::string escape(std::string_view field);

/// Shortest decimal representation that parses back to the same double.
std::string format_number(double value);
std::string format_optional(const std::optional<double>& value);

double parse_number(std::string_view text, std::size_t line, std::string_view column);

void write_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace rise::csv
