#include "rise/month.hpp"

#include <cstdio>
#include <regex>

#include "rise/error.hpp"

namespace rise {

MonthKey MonthKey::parse(const std::string& text) {
  static const std::regex dashed(R"(^\s*(\d{4})-(\d{1,2})\s*$)");
  static const std::regex compact(R"(^\s*(\d{4})(\d{2})\s*$)");
  std::smatch match;
  if (!std::regex_match(text, match, dashed) && !std::regex_match(text, match, compact)) {
    throw Error(ErrorCode::SchemaError, "cannot parse month '" + text + "'");
  }
  const int year = std::stoi(match[1].str());
  const int month = std::stoi(match[2].str());
  if (month < 1 || month > 12) {
    throw Error(ErrorCode::SchemaError, "month out of range in '" + text + "'");
  }
  return MonthKey(year, month);
}

std::string MonthKey::to_string() const {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02d", year(), month());
  return buf;
}

}  // namespace rise
