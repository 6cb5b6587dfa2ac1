#include "rise/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "rise/error.hpp"

namespace rise::csv {

std::optional<std::size_t> Table::find(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  return std::nullopt;
}

std::size_t Table::column(std::string_view name) const {
  if (auto idx = find(name)) return *idx;
  throw Error(ErrorCode::SchemaError, "missing column '" + std::string(name) + "' (line 1)");
}

std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

Table parse(std::string_view text) {
  Table table;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool have_header = false;
  while (pos <= text.size()) {
    std::size_t next = text.find('\n', pos);
    if (next == std::string_view::npos) next = text.size();
    std::string_view line = text.substr(pos, next - pos);
    ++line_no;
    pos = next + 1;
    if (line.empty() || line == "\r") {
      if (next == text.size()) break;
      continue;
    }
    auto fields = split_line(line);
    if (!have_header) {
      // Tolerate a UTF-8 byte order mark.
      if (!fields.empty() && fields[0].rfind("\xEF\xBB\xBF", 0) == 0) fields[0].erase(0, 3);
      table.header = std::move(fields);
      have_header = true;
    } else {
      if (fields.size() != table.header.size()) {
        throw Error(ErrorCode::SchemaError, "line " + std::to_string(line_no) + ": expected " +
                                                std::to_string(table.header.size()) +
                                                " fields, found " + std::to_string(fields.size()));
      }
      table.rows.push_back(std::move(fields));
      table.lines.push_back(line_no);
    }
    if (next == text.size()) break;
  }
  if (!have_header) throw Error(ErrorCode::SchemaError, "empty file (line 1)");
  return table;
}

Table read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::SchemaError, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string format_number(double value) {
  if (value == 0.0) return "0";  // also folds -0
  char buf[64];
  auto result = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, result.ptr);
}

std::string format_optional(const std::optional<double>& value) {
  return value ? format_number(*value) : std::string();
}

double parse_number(std::string_view text, std::size_t line, std::string_view column) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && text[begin] == ' ') ++begin;
  while (end > begin && text[end - 1] == ' ') --end;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data() + begin, text.data() + end, value);
  if (ec != std::errc() || ptr != text.data() + end || !std::isfinite(value)) {
    throw Error(ErrorCode::SchemaError, "line " + std::to_string(line) + ": column '" +
                                            std::string(column) + "' is not a number: '" +
                                            std::string(text) + "'");
  }
  return value;
}

void write_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) out << ',';
    out << escape(fields[i]);
  }
  out << '\n';
}

}  // namespace rise::csv
