#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rise/hierarchy.hpp"
#include "rise/recovery.hpp"
#include "rise/series.hpp"
#include "rise/signals.hpp"

namespace rise::synthetic {

enum class RecoveryShape { Linear, Quadratic, Logistic };

std::string_view shape_name(RecoveryShape shape);
std::optional<RecoveryShape> parse_shape(std::string_view name);

struct DestinationProfile {
  std::string name;
  std::string region;
  recovery::DestinationScores scores;
  std::vector<std::string> keywords;
  bool has_flights = true;
};

/// The twenty destinations in six regions with their scores, tabulated
/// coefficients and search keywords.
std::vector<DestinationProfile> default_destinations();
std::vector<Region> regions_of(const std::vector<DestinationProfile>& destinations);

struct SyntheticSpec {
  std::uint64_t seed = 1;
  int years = 8;                      // pre-break years ending December of the year before the break
  MonthKey break_month{2020, 2};
  MonthKey recovery_start{2023, 1};   // first month of the recovery regime
  MonthKey terminal_month{2024, 7};   // recovery reaches `suppression` here
  MonthKey observed_end{2023, 1};     // last month written to arrivals.csv
  MonthKey signal_end{2023, 6};       // last month of keyword and flight data
  MonthKey data_end{2024, 12};        // last month written to actuals.csv
  double suppression = 0.7;           // terminal arrivals / counterfactual
  RecoveryShape shape = RecoveryShape::Linear;
  double seasonal_amplitude = 1.0;    // 0 gives a flat seasonal pattern
  double noise = 0.04;                // multiplicative noise sd
  double keyword_noise = 0.08;
  double collapse = 0.03;             // arrivals / counterfactual during the collapse
  int missing_months = 2;             // dropped per destination inside the collapse
  bool flights = true;
  std::vector<DestinationProfile> destinations = default_destinations();

  MonthKey history_start() const { return MonthKey(break_month.year() - years, 1); }
};

struct SyntheticData {
  std::map<std::string, MonthlySeries> arrivals;        // observed, with gaps
  std::map<std::string, MonthlySeries> actuals;         // complete through data_end
  std::map<std::string, MonthlySeries> counterfactual;  // no-break path
  std::map<std::string, std::vector<double>> fraction;  // actual / counterfactual mean path
  std::map<std::string, std::vector<signals::KeywordSeries>> keywords;
  std::map<std::string, MonthlySeries> flights;
};

/// Fraction of the counterfactual reached `step` months after recovery_start
/// (step = span reaches `suppression`), starting from `initial`.
double recovery_fraction(RecoveryShape shape, int step, int span, double initial, double terminal);

/// Deterministic in the spec; every destination draws from its own named
/// substream so adding destinations never changes the others.
SyntheticData generate(const SyntheticSpec& spec);

/// Writes arrivals.csv, actuals.csv, keywords.csv, flights.csv, scores.csv,
/// truth.csv and config.yaml into `dir`. Returns the files written.
std::vector<std::filesystem::path> write_dataset(const SyntheticData& data, const SyntheticSpec& spec,
                                                 const std::filesystem::path& dir);

/// scores.csv with every tabulated coefficient replaced by `r`.
void write_scores(const std::filesystem::path& path, const std::vector<DestinationProfile>& destinations,
                  std::optional<double> r = std::nullopt);

}  // namespace rise::synthetic
