#include "rise/io.hpp"

#include <fstream>

#include "rise/csv.hpp"
#include "rise/error.hpp"

namespace rise {

LongSchema arrivals_schema() { return {{"destination"}, "arrivals"}; }
LongSchema keyword_schema() { return {{"destination", "keyword"}, "volume"}; }
LongSchema flight_schema() { return {{"destination"}, "flights"}; }

std::map<SeriesKey, MonthlySeries> load_csv(const std::filesystem::path& path,
                                            const LongSchema& schema) {
  const auto table = csv::read(path);
  std::vector<std::size_t> key_idx;
  for (const auto& k : schema.key_columns) key_idx.push_back(table.column(k));
  const std::size_t year_idx = table.column("year");
  const std::size_t month_idx = table.column("month");
  const std::size_t value_idx = table.column(schema.value_column);

  std::map<SeriesKey, std::map<int, std::optional<double>>> cells;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t line = table.lines[r];
    SeriesKey key;
    for (auto idx : key_idx) {
      if (row[idx].empty()) {
        throw Error(ErrorCode::SchemaError,
                    "line " + std::to_string(line) + ": empty key column '" + table.header[idx] + "'");
      }
      key.push_back(row[idx]);
    }
    const double year = csv::parse_number(row[year_idx], line, "year");
    const double month = csv::parse_number(row[month_idx], line, "month");
    if (year != static_cast<int>(year) || month != static_cast<int>(month) || month < 1 ||
        month > 12) {
      throw Error(ErrorCode::SchemaError, "line " + std::to_string(line) + ": invalid year/month");
    }
    std::optional<double> value;
    if (!row[value_idx].empty()) {
      value = csv::parse_number(row[value_idx], line, schema.value_column);
      if (*value < 0.0) {
        throw Error(ErrorCode::SchemaError, "line " + std::to_string(line) + ": negative " +
                                                schema.value_column);
      }
    }
    const int index = MonthKey(static_cast<int>(year), static_cast<int>(month)).index();
    auto& per_key = cells[key];
    if (!per_key.emplace(index, value).second) {
      throw Error(ErrorCode::DuplicateObservation,
                  "line " + std::to_string(line) + ": duplicate month " +
                      MonthKey::from_index(index).to_string() + " for '" + key.front() + "'");
    }
  }

  std::map<SeriesKey, MonthlySeries> out;
  for (auto& [key, months] : cells) {
    const int first = months.begin()->first;
    const int last = months.rbegin()->first;
    std::vector<std::optional<double>> values(static_cast<std::size_t>(last - first + 1));
    for (const auto& [index, value] : months) values[static_cast<std::size_t>(index - first)] = value;
    std::string name = key.front();
    for (std::size_t i = 1; i < key.size(); ++i) name += "/" + key[i];
    out.emplace(key, MonthlySeries(name, MonthKey::from_index(first), std::move(values)));
  }
  return out;
}

std::map<std::string, MonthlySeries> load_arrivals(const std::filesystem::path& path) {
  std::map<std::string, MonthlySeries> out;
  for (auto& [key, series] : load_csv(path, arrivals_schema())) out.emplace(key.front(), series);
  return out;
}

void write_arrivals(std::ostream& out, const std::map<std::string, MonthlySeries>& series,
                    const std::map<std::string, MonthlySeries>* observed) {
  csv::write_row(out, {"destination", "year", "month", "arrivals", "kind"});
  for (const auto& [destination, s] : series) {
    const MonthlySeries* original = nullptr;
    if (observed) {
      if (auto it = observed->find(destination); it != observed->end()) original = &it->second;
    }
    for (std::size_t i = 0; i < s.size(); ++i) {
      const MonthKey m = s.start() + static_cast<int>(i);
      const bool imputed = original && s[i].has_value() && !original->at(m).has_value();
      csv::write_row(out, {destination, std::to_string(m.year()), std::to_string(m.month()),
                           csv::format_optional(s[i]), imputed ? "imputed" : "actual"});
    }
  }
}

void write_arrivals(const std::filesystem::path& path,
                    const std::map<std::string, MonthlySeries>& series,
                    const std::map<std::string, MonthlySeries>* observed) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::SchemaError, "cannot write " + path.string());
  write_arrivals(out, series, observed);
}

}  // namespace rise
