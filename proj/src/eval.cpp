#include "rise/eval.hpp"

#include <cmath>
#include <cstdio>

#include "rise/csv.hpp"
#include "rise/error.hpp"

namespace rise::eval {
namespace {

void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw Error(ErrorCode::LengthMismatch, std::string(what) + ": lengths " + std::to_string(a) +
                                               " and " + std::to_string(b) + " differ");
  }
}

double mean_of(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return x.empty() ? 0.0 : s / static_cast<double>(x.size());
}

std::vector<double> window_values(const MonthlySeries& s, MonthKey from, MonthKey to,
                                  const std::string& what) {
  std::vector<double> out;
  for (MonthKey m = from; m <= to; ++m) {
    auto v = s.at(m);
    if (!v) {
      throw Error(ErrorCode::NoOverlap,
                  what + " for '" + s.name() + "' missing at " + m.to_string());
    }
    out.push_back(*v);
  }
  return out;
}

}  // namespace

double rmse(std::span<const double> forecast, std::span<const double> actual) {
  require_same_length(forecast.size(), actual.size(), "rmse");
  if (actual.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double e = forecast[i] - actual[i];
    acc += e * e;
  }
  return std::sqrt(acc / static_cast<double>(actual.size()));
}

MapeResult mape(std::span<const double> forecast, std::span<const double> actual) {
  require_same_length(forecast.size(), actual.size(), "mape");
  MapeResult result;
  double acc = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (actual[i] == 0.0) {
      ++result.skipped;
      continue;
    }
    acc += std::abs((forecast[i] - actual[i]) / actual[i]);
    ++used;
  }
  result.value = used > 0 ? acc / static_cast<double>(used) : 0.0;
  return result;
}

std::vector<std::optional<double>> percentage_error(std::span<const double> forecast,
                                                    std::span<const double> actual) {
  require_same_length(forecast.size(), actual.size(), "percentage_error");
  std::vector<std::optional<double>> out(actual.size());
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (actual[i] != 0.0) out[i] = (forecast[i] - actual[i]) / actual[i];
  }
  return out;
}

double mase(std::span<const double> forecast, std::span<const double> actual,
            std::span<const double> insample, int season) {
  require_same_length(forecast.size(), actual.size(), "mase");
  const auto lag = static_cast<std::size_t>(season);
  if (season < 1 || insample.size() <= lag) {
    throw Error(ErrorCode::ZeroScale, "in-sample series shorter than the scaling lag");
  }
  double scale = 0.0;
  for (std::size_t t = lag; t < insample.size(); ++t) scale += std::abs(insample[t] - insample[t - lag]);
  scale /= static_cast<double>(insample.size() - lag);
  if (!(scale > 0.0)) throw Error(ErrorCode::ZeroScale, "in-sample naive MAE is zero");
  double mae = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) mae += std::abs(forecast[i] - actual[i]);
  if (!actual.empty()) mae /= static_cast<double>(actual.size());
  return mae / scale;
}

double winkler(std::span<const double> lower, std::span<const double> upper,
               std::span<const double> actual, double alpha) {
  require_same_length(lower.size(), upper.size(), "winkler");
  require_same_length(lower.size(), actual.size(), "winkler");
  if (actual.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t t = 0; t < actual.size(); ++t) {
    if (lower[t] > upper[t]) {
      throw Error(ErrorCode::BadInterval, "lower bound exceeds upper bound at position " + std::to_string(t));
    }
    double score = upper[t] - lower[t];
    if (actual[t] < lower[t]) {
      score += 2.0 / alpha * (lower[t] - actual[t]);
    } else if (actual[t] > upper[t]) {
      score += 2.0 / alpha * (actual[t] - upper[t]);
    }
    acc += score;
  }
  return acc / static_cast<double>(actual.size());
}

double standard_winkler(double winkler_score, std::span<const double> actual) {
  const double m = mean_of(actual);
  if (!(m > 0.0)) throw Error(ErrorCode::ZeroMeanActual, "mean actual must be positive");
  return winkler_score / m;
}

double coverage(std::span<const double> lower, std::span<const double> upper,
                std::span<const double> actual) {
  require_same_length(lower.size(), actual.size(), "coverage");
  require_same_length(upper.size(), actual.size(), "coverage");
  if (actual.empty()) return 0.0;
  std::size_t inside = 0;
  for (std::size_t t = 0; t < actual.size(); ++t) {
    if (lower[t] <= actual[t] && actual[t] <= upper[t]) ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(actual.size());
}

EvaluationReport report(const std::map<std::string, MonthlySeries>& point_paths,
                        const std::map<std::string, IntervalPath>& interval_paths,
                        const std::map<std::string, MonthlySeries>& actuals,
                        const std::map<std::string, MonthlySeries>& insample,
                        const ReportOptions& options) {
  if (options.window_end < options.window_start) {
    throw Error(ErrorCode::NoOverlap, "empty evaluation window");
  }
  EvaluationReport out;
  std::vector<double> weights;
  std::vector<double> interval_weights;
  for (const auto& [destination, path] : point_paths) {
    auto actual_it = actuals.find(destination);
    if (actual_it == actuals.end()) {
      throw Error(ErrorCode::NoOverlap, "no actuals for '" + destination + "'");
    }
    const auto actual = window_values(actual_it->second, options.window_start, options.window_end, "actuals");
    const auto forecast = window_values(path, options.window_start, options.window_end, "forecast");
    auto insample_it = insample.find(destination);
    if (insample_it == insample.end()) {
      throw Error(ErrorCode::NoOverlap, "no in-sample history for '" + destination + "'");
    }
    const auto history = insample_it->second.dense();

    MetricRow row;
    row.destination = destination;
    row.rmse = rmse(forecast, actual);
    const auto m = mape(forecast, actual);
    row.mape = m.value;
    row.mape_skipped = m.skipped;
    row.mase = mase(forecast, actual, history, options.mase_season);
    row.percentage_error = percentage_error(forecast, actual);
    out.point.push_back(std::move(row));
    weights.push_back(mean_of(actual));

    if (auto it = interval_paths.find(destination); it != interval_paths.end()) {
      const auto lower = window_values(it->second.lower, options.window_start, options.window_end, "lower bound");
      const auto upper = window_values(it->second.upper, options.window_start, options.window_end, "upper bound");
      IntervalMetricRow irow;
      irow.destination = destination;
      irow.winkler = winkler(lower, upper, actual, options.alpha);
      irow.standard_winkler = standard_winkler(irow.winkler, actual);
      irow.coverage = coverage(lower, upper, actual);
      out.interval.push_back(irow);
      interval_weights.push_back(mean_of(actual));
    }
  }
  if (out.point.empty()) throw Error(ErrorCode::NoOverlap, "no destinations to evaluate");

  auto average_points = [&](const std::vector<double>* w, const char* label) {
    MetricRow avg;
    avg.destination = label;
    double total = 0.0;
    for (std::size_t i = 0; i < out.point.size(); ++i) {
      const double wi = w ? (*w)[i] : 1.0;
      avg.rmse += wi * out.point[i].rmse;
      avg.mape += wi * out.point[i].mape;
      avg.mase += wi * out.point[i].mase;
      total += wi;
    }
    if (total > 0.0) {
      avg.rmse /= total;
      avg.mape /= total;
      avg.mase /= total;
    }
    return avg;
  };
  out.point_average = average_points(nullptr, "Average");
  out.point_weighted_average = average_points(&weights, "Weighted Average");

  if (!out.interval.empty()) {
    auto average_intervals = [&](const std::vector<double>* w, const char* label) {
      IntervalMetricRow avg;
      avg.destination = label;
      double total = 0.0;
      for (std::size_t i = 0; i < out.interval.size(); ++i) {
        const double wi = w ? (*w)[i] : 1.0;
        avg.winkler += wi * out.interval[i].winkler;
        avg.standard_winkler += wi * out.interval[i].standard_winkler;
        avg.coverage += wi * out.interval[i].coverage;
        total += wi;
      }
      if (total > 0.0) {
        avg.winkler /= total;
        avg.standard_winkler /= total;
        avg.coverage /= total;
      }
      return avg;
    };
    out.interval_average = average_intervals(nullptr, "Average");
    out.interval_weighted_average = average_intervals(&interval_weights, "Weighted Average");
  }
  return out;
}

namespace {

std::string join_percentage_errors(const std::vector<std::optional<double>>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ';';
    out += csv::format_optional(values[i]);
  }
  return out;
}

void write_point_row(std::ostream& out, const MetricRow& row) {
  csv::write_row(out, {row.destination, csv::format_number(row.rmse), csv::format_number(row.mape),
                       csv::format_number(row.mase), join_percentage_errors(row.percentage_error)});
}

void write_interval_row(std::ostream& out, const IntervalMetricRow& row) {
  csv::write_row(out, {row.destination, csv::format_number(row.winkler),
                       csv::format_number(row.standard_winkler), csv::format_number(row.coverage)});
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace

void write_point_metrics(std::ostream& out, const EvaluationReport& report) {
  csv::write_row(out, {"destination", "rmse", "mape", "mase", "percentage_error"});
  for (const auto& row : report.point) write_point_row(out, row);
  write_point_row(out, report.point_average);
  write_point_row(out, report.point_weighted_average);
}

void write_interval_metrics(std::ostream& out, const EvaluationReport& report) {
  csv::write_row(out, {"destination", "winkler", "standard_winkler", "coverage"});
  for (const auto& row : report.interval) write_interval_row(out, row);
  if (report.interval_average) write_interval_row(out, *report.interval_average);
  if (report.interval_weighted_average) write_interval_row(out, *report.interval_weighted_average);
}

void write_markdown(std::ostream& out, const EvaluationReport& report) {
  out << "| Destination | RMSE | MAPE | MASE |\n|---|---:|---:|---:|\n";
  auto point_line = [&](const MetricRow& r) {
    out << "| " << r.destination << " | " << fixed(r.rmse, 0) << " | " << fixed(r.mape, 4) << " | "
        << fixed(r.mase, 4) << " |\n";
  };
  for (const auto& r : report.point) point_line(r);
  point_line(report.point_average);
  point_line(report.point_weighted_average);
  if (report.interval.empty()) return;
  out << "\n| Destination | Winkler | Standard Winkler | Coverage |\n|---|---:|---:|---:|\n";
  auto interval_line = [&](const IntervalMetricRow& r) {
    out << "| " << r.destination << " | " << fixed(r.winkler, 0) << " | " << fixed(r.standard_winkler, 2)
        << " | " << fixed(100.0 * r.coverage, 0) << "% |\n";
  };
  for (const auto& r : report.interval) interval_line(r);
  if (report.interval_average) interval_line(*report.interval_average);
  if (report.interval_weighted_average) interval_line(*report.interval_weighted_average);
}

}  // namespace rise::eval
