#pragma once

#include <span>
#include <vector>

#include "rise/models/ets.hpp"
#include "rise/models/forecast.hpp"

namespace rise::models {

struct ArimaOrder {
  int p = 0, d = 0, q = 0;
  int seasonal_p = 0, seasonal_d = 0, seasonal_q = 0;
  int period = 12;
  bool include_constant = false;  // mean (d + D = 0) or drift (d + D = 1)
};

/// Seasonal ARIMA estimated by conditional sum of squares.
struct ArimaFit {
  ArimaOrder order;
  std::vector<double> ar, ma, seasonal_ar, seasonal_ma;
  double constant = 0.0;  // mean of the differenced series
  double sigma2 = 0.0;
  double aicc = 0.0;
  int conditioning = 0;              // residuals before this index of the differenced series are fixed at 0
  std::vector<double> data;          // original series
  std::vector<double> differenced;
  std::vector<double> residuals;     // aligned with `differenced`
};

/// `conditioning` is the number of leading differenced observations used only
/// as lags; a common value across candidates keeps AICc comparable.
/// Returns nullopt-like failure via NonConvergence when the fit is not
/// stationary/invertible.
ArimaFit fit_arima(std::span<const double> y, const ArimaOrder& order, int conditioning = -1);

/// Differencing orders by KPSS (d) and seasonal strength (D), then an AICc
/// grid over p, q, P, Q within the option bounds.
ArimaFit auto_arima(std::span<const double> y, const ArimaOptions& options);

MeanVariancePath arima_forecast(const ArimaFit& fit, int horizon);

/// KPSS level-stationarity statistic with a short Newey-West bandwidth.
double kpss_statistic(std::span<const double> y);

}  // namespace rise::models
