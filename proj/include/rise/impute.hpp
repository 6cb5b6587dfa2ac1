#pragma once

#include "rise/series.hpp"

namespace rise {

/// Disturbance variances of the local linear trend model
///   y_t = level_t + eps_t
///   level_{t+1} = level_t + slope_t + eta_t
///   slope_{t+1} = slope_t + zeta_t
struct LocalTrendVariances {
  double observation = 0.0;  // eps
  double level = 0.0;        // eta
  double slope = 0.0;        // zeta
};

/// Method-of-moments estimate from the autocovariances of second differences
/// taken over runs of present values. Each variance is floored at a small
/// fraction of the series scale so the filter stays well posed.
LocalTrendVariances estimate_local_trend_variances(const MonthlySeries& series);

/// Fills missing values with fixed-interval (RTS) smoothed levels of a local
/// linear trend model. Present values are returned untouched; imputed values
/// are clamped at 0. Throws AllMissing with fewer than two present values.
MonthlySeries impute(const MonthlySeries& series);
MonthlySeries impute(const MonthlySeries& series, const LocalTrendVariances& variances);

/// Smoothed level for every month (present and missing).
std::vector<double> smoothed_levels(const MonthlySeries& series,
                                    const LocalTrendVariances& variances);

}  // namespace rise
