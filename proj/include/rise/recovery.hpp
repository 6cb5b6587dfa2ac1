#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rise/series.hpp"

namespace rise::recovery {

struct DestinationScores {
  std::string destination;
  int policy = 1;
  int distance = 1;
  int recovery = 1;
  std::optional<double> r;  // tabulated coefficient, when supplied

  double average() const { return (policy + distance + recovery) / 3.0; }
};

enum class CoefficientSource { Table, Formula };

struct RecoveryCoefficient {
  std::string destination;
  double r = 1.0;
  CoefficientSource source = CoefficientSource::Formula;
};

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// The published mapping from scores to a coefficient.
inline constexpr LineFit kScoreLine{0.10, 0.45};

/// r = intercept + slope * average, clamped to (0, 1]. Throws OutOfRange for
/// scores outside 1..5.
RecoveryCoefficient coefficient_from_scores(const DestinationScores& scores, const LineFit& line = kScoreLine);

/// Tabulated r when present and `prefer_table`, the formula otherwise.
RecoveryCoefficient coefficient_for(const DestinationScores& scores, bool prefer_table);

/// Ordinary least squares of r on the score average. Throws DegenerateX
/// with fewer than two distinct averages.
LineFit fit_anchor_regression(std::span<const std::pair<double, double>> average_r);

/// Reads destination,policy,distance,recovery[,average,r[,source]].
std::vector<DestinationScores> load_scores(const std::filesystem::path& path);

void write_coefficients_header(std::ostream& out);
void write_coefficient(std::ostream& out, const DestinationScores& scores, const RecoveryCoefficient& coefficient);

/// Multiplicative seasonal factor per calendar month (index 0 = January).
struct SeasonalProfile {
  std::array<double, 12> factor{};
  double at(MonthKey m) const { return factor[static_cast<std::size_t>(m.month() - 1)]; }
  static SeasonalProfile flat();
};

/// Additive decomposition of log arrivals, exponentiated so the factors act
/// multiplicatively (geometric mean 1). Throws NonPositiveValue, SeriesTooShort.
SeasonalProfile seasonal_profile(const MonthlySeries& history);

struct Anchors {
  double initial = 0.0;   // reference forecast at the initial month
  double terminal = 0.0;  // base forecast at the terminal month times r
  double initial_detrended = 0.0;
  double terminal_detrended = 0.0;
};

/// Throws MissingMonth when a path does not cover its month, NonPositiveValue
/// for non-positive seasonal factors.
Anchors make_anchors(const MonthlySeries& base, const MonthlySeries& reference, double r,
                     const SeasonalProfile& seasonal, MonthKey initial_month, MonthKey terminal_month);

/// T0 + (t / length) * (T_end - T0) for t = 0 .. length - 1.
std::vector<double> trend_linear(double initial, double terminal, int length = 14);

struct QuadraticFit {
  double a = 0.0, b = 0.0, c = 0.0;  // q(s) = a (s - center)^2 + b (s - center) + c
  double center = 0.0;               // 0 unless the normal equations were ill conditioned (> 1e12)
  double condition = 0.0;
  double operator()(double s) const {
    const double u = s - center;
    return (a * u + b) * u + c;
  }
};

/// Weighted least squares: points (s, y_s) for s = 1..n plus `weight` times
/// the squared miss of q(terminal_argument) against `terminal`.
QuadraticFit fit_quadratic(std::span<const double> points, double terminal, double terminal_argument,
                           double weight = 18.0);

/// Path q(t + offset) for t = 0 .. length - 1 where offset = points.size().
std::vector<double> trend_quadratic(std::span<const double> points, double terminal, double weight = 18.0,
                                    int length = 14);

struct LogisticFit {
  double L = 0.0, k = 0.0, t0 = 0.0;
  double sse = 0.0;
  bool converged = false;
  double operator()(double s) const;
};

/// Least-squares logistic through (argument, value) pairs by damped
/// Gauss-Newton from 16 starting points. Flat inputs give L = value with a
/// flat curve. converged is false when no start reached a finite fit.
LogisticFit fit_logistic(std::span<const std::pair<double, double>> points);

struct RecoveryCurve {
  std::string destination;
  MonthKey start;  // initial month, t = 0
  std::vector<double> trend_linear;
  std::vector<double> trend_quadratic;
  std::vector<double> trend_logistic;
  std::vector<double> trend_mean;
  std::vector<double> seasonal;
  std::vector<double> point;
};

/// Averages the three trends and multiplies by the seasonal path. Throws
/// NonPositiveTrend for non-positive or non-finite trend values.
RecoveryCurve synthesize(const std::string& destination, MonthKey start, std::vector<double> linear,
                         std::vector<double> quadratic, std::vector<double> logistic,
                         std::vector<double> seasonal);

struct CurveRequest {
  std::string destination;
  MonthKey initial_month;
  MonthKey terminal_month;
  MonthlySeries history;    // arrivals, complete over the fit window
  MonthlySeries reference;  // reference path from the month after history ends
  MonthlySeries base;       // base path through December of the terminal year
  double r = 1.0;
  SeasonalProfile seasonal;
  double quadratic_weight = 18.0;
};

/// Months before the initial month in the quadratic fit window (argument 1).
inline constexpr int kHistoryMonths = 17;

/// Full trend pipeline for one destination. A quadratic or logistic trend
/// that fails (non-positive values, no convergence) is replaced by the linear
/// trend and reported in `warnings`.
RecoveryCurve build_curve(const CurveRequest& request, std::vector<std::string>* warnings = nullptr);

struct IntervalCurves {
  RecoveryCurve lower;
  RecoveryCurve upper;
  bool reordered = false;  // crossing fits were sorted into lower <= point <= upper
};

/// Runs build_curve with the averaged model bounds in place of the base path,
/// then orders lower <= point <= upper. Throws NoBounds.
IntervalCurves interval_path(const CurveRequest& request, const RecoveryCurve& point,
                             const std::vector<std::pair<MonthlySeries, MonthlySeries>>& model_bounds,
                             std::vector<std::string>* warnings = nullptr);

}  // namespace rise::recovery
