#pragma once

#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "rise/series.hpp"

namespace rise::eval {

double rmse(std::span<const double> forecast, std::span<const double> actual);

struct MapeResult {
  double value = 0.0;
  std::size_t skipped = 0;  // months with actual == 0
};
/// Mean absolute percentage error as a fraction; zero actuals are skipped.
MapeResult mape(std::span<const double> forecast, std::span<const double> actual);

/// (forecast - actual) / actual per month; nullopt where actual == 0.
std::vector<std::optional<double>> percentage_error(std::span<const double> forecast,
                                                    std::span<const double> actual);

/// Mean absolute error scaled by the in-sample lag-`season` naive MAE.
/// Throws ZeroScale when the denominator vanishes or insample is too short.
double mase(std::span<const double> forecast, std::span<const double> actual,
            std::span<const double> insample, int season = 12);

/// Mean interval score at level 1 - alpha. Throws BadInterval if lower > upper.
double winkler(std::span<const double> lower, std::span<const double> upper,
               std::span<const double> actual, double alpha = 0.2);

/// Winkler divided by the mean actual. Throws ZeroMeanActual.
double standard_winkler(double winkler_score, std::span<const double> actual);

/// Share of actuals with lower <= y <= upper (boundaries covered).
double coverage(std::span<const double> lower, std::span<const double> upper,
                std::span<const double> actual);

struct MetricRow {
  std::string destination;
  double rmse = 0.0;
  double mape = 0.0;
  double mase = 0.0;
  std::vector<std::optional<double>> percentage_error;
  std::size_t mape_skipped = 0;
};

struct IntervalMetricRow {
  std::string destination;
  double winkler = 0.0;
  double standard_winkler = 0.0;
  double coverage = 0.0;
};

struct IntervalPath {
  MonthlySeries lower;
  MonthlySeries upper;
};

struct ReportOptions {
  MonthKey window_start;
  MonthKey window_end;
  int mase_season = 12;
  double alpha = 0.2;
};

/// Per-destination rows followed by "Average" and "Weighted Average" rows.
/// Weights are the mean actual arrivals over the evaluation window.
struct EvaluationReport {
  std::vector<MetricRow> point;
  std::vector<IntervalMetricRow> interval;
  MetricRow point_average;
  MetricRow point_weighted_average;
  std::optional<IntervalMetricRow> interval_average;
  std::optional<IntervalMetricRow> interval_weighted_average;
};

/// Destinations present in `point_paths` are scored against `actuals` over
/// the window; MASE is scaled by `insample`. Throws NoOverlap when a
/// destination's forecasts or actuals do not cover the window.
EvaluationReport report(const std::map<std::string, MonthlySeries>& point_paths,
                        const std::map<std::string, IntervalPath>& interval_paths,
                        const std::map<std::string, MonthlySeries>& actuals,
                        const std::map<std::string, MonthlySeries>& insample,
                        const ReportOptions& options);

void write_point_metrics(std::ostream& out, const EvaluationReport& report);
void write_interval_metrics(std::ostream& out, const EvaluationReport& report);
void write_markdown(std::ostream& out, const EvaluationReport& report);

}  // namespace rise::eval
