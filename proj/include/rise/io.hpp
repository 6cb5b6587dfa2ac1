#pragma once

#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "rise/series.hpp"

namespace rise {

/// Long-format CSV layout: one row per (key columns, year, month) with a
/// single value column. An empty value cell is a missing observation.
struct LongSchema {
  std::vector<std::string> key_columns;
  std::string value_column;
};

LongSchema arrivals_schema();  // destination,year,month,arrivals
LongSchema keyword_schema();   // destination,keyword,year,month,volume
LongSchema flight_schema();    // destination,year,month,flights

using SeriesKey = std::vector<std::string>;

/// One contiguous series per key; months absent from the file become missing
/// values. Throws SchemaError (with line number) or DuplicateObservation.
std::map<SeriesKey, MonthlySeries> load_csv(const std::filesystem::path& path,
                                            const LongSchema& schema);

/// Arrivals keyed by destination.
std::map<std::string, MonthlySeries> load_arrivals(const std::filesystem::path& path);

/// Writes `destination,year,month,arrivals,kind`. A value counts as imputed
/// when `observed` is given and lacks it at that month.
void write_arrivals(std::ostream& out, const std::map<std::string, MonthlySeries>& series,
                    const std::map<std::string, MonthlySeries>* observed = nullptr);
void write_arrivals(const std::filesystem::path& path,
                    const std::map<std::string, MonthlySeries>& series,
                    const std::map<std::string, MonthlySeries>* observed = nullptr);

}  // namespace rise
