#pragma once

#include <span>
#include <vector>

#include "rise/models/forecast.hpp"

namespace rise::models {

struct NnarForecast {
  std::vector<double> mean;
  std::vector<double> residuals;  // one-step errors of the averaged network
};

/// Feed-forward autoregression with one tanh hidden layer. Each repeat is
/// trained from its own seeded initialization; forecasts average the
/// repeats at every step before feeding the average back as a lag.
NnarForecast nnar_forecast(std::span<const double> y, const NnarOptions& options, int horizon);

}  // namespace rise::models
