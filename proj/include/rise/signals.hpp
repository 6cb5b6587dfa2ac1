#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rise/series.hpp"

namespace rise::signals {

struct LagCorrelation {
  int lag = 0;
  double correlation = 0.0;
};

/// Pearson correlation of arrivals_t with index_{t-lag} over the months where
/// both are observed. Throws InsufficientOverlap below 12 common months.
double lagged_correlation(const MonthlySeries& arrivals, const MonthlySeries& index, int lag);

/// Lag in 0..max_lag with the highest correlation, smallest lag on ties.
LagCorrelation best_lag(const MonthlySeries& arrivals, const MonthlySeries& index, int max_lag);

struct KeywordSeries {
  std::string keyword;
  MonthlySeries series;
};

struct CompositeIndex {
  std::string destination;
  std::vector<std::string> included;
  std::vector<std::pair<std::string, double>> correlations;  // every keyword, in input order
  MonthlySeries series;
  int lag = 1;
};

/// Sum of the keyword series whose lagged correlation with arrivals is at
/// least `threshold`. The composite spans the months every included keyword
/// covers. Throws NoKeywordPasses.
CompositeIndex build_composite(const MonthlySeries& arrivals, const std::vector<KeywordSeries>& keywords,
                               double threshold = 0.6, int lag = 1);

/// Composite values feeding the forecast months first_month .. first_month +
/// horizon - 1, i.e. the composite `lag` months earlier. Observed values are
/// used where present, the seasonal-naive continuation otherwise.
std::vector<double> future_index(const CompositeIndex& composite, MonthKey first_month, int horizon);

/// Ratio strategy: arrivals / lagged composite forecast by ses, holt_winters
/// and bchw (averaged over the fits that succeed), times the future
/// composite. Throws ZeroIndex when the composite vanishes in the fit window.
std::vector<double> ratio_forecast(const MonthlySeries& arrivals, const CompositeIndex& composite, int horizon);

struct RegressionSummary {
  double slope = 0.0;  // coefficient on the composite
  double standard_error = 0.0;
  bool regressor_used = true;
};

struct ExogForecast {
  std::vector<double> path;      // mean of the two branches
  std::vector<double> arimax;
  std::vector<double> regression;  // trend + month dummies + composite
  RegressionSummary arimax_fit;
  RegressionSummary regression_fit;
};

/// Regression on the lagged composite with ARIMA errors (two-step), and a
/// linear-trend + monthly-dummy + composite least-squares model. A
/// zero-variance composite drops the regressor. Paths are clamped at 0.
ExogForecast exog_forecast(const MonthlySeries& arrivals, const CompositeIndex& composite, int horizon);

/// baseline arrivals * flights_t / flights_baseline for the months after the
/// last observed arrivals month. Throws NoFlightData when flights are missing
/// over the horizon or at the baseline, or the baseline count is zero.
std::vector<double> flight_forecast(const MonthlySeries& arrivals, const MonthlySeries& flights, int horizon);

struct ReferenceOptions {
  double threshold = 0.6;
  int lag = 1;
};

struct ReferenceForecast {
  std::string destination;
  MonthKey start;  // first forecast month
  std::vector<double> path;
  std::optional<std::vector<double>> index_branch;
  std::optional<std::vector<double>> flight_branch;
  std::optional<std::vector<double>> ratio;
  std::optional<std::vector<double>> exog;
  std::vector<std::string> included_keywords;
  std::vector<std::string> warnings;
};

/// Mean of the available branches; the index branch is itself the mean of
/// the ratio and exogenous strategies. `arrivals` must be complete. Throws
/// NoSignal when neither branch can be built.
ReferenceForecast reference_forecast(const std::string& destination, const MonthlySeries& arrivals,
                                     const std::vector<KeywordSeries>& keywords,
                                     const std::optional<MonthlySeries>& flights, int horizon,
                                     const ReferenceOptions& options = {});

}  // namespace rise::signals
