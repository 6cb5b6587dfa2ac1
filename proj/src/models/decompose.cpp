#include "rise/models/decompose.hpp"

#include <algorithm>
#include <cmath>

#include "rise/error.hpp"

namespace rise::models {
namespace {

constexpr int kPeriod = 12;

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double variance(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return acc / static_cast<double>(v.size() - 1);
}

// Least-squares line through (i, y[i]) for the given index range.
std::pair<double, double> line_fit(const std::vector<double>& y, std::size_t from, std::size_t to) {
  const double n = static_cast<double>(to - from);
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = from; i < to; ++i) {
    const double x = static_cast<double>(i);
    sx += x;
    sy += y[i];
    sxx += x * x;
    sxy += x * y[i];
  }
  const double denom = n * sxx - sx * sx;
  const double slope = denom != 0.0 ? (n * sxy - sx * sy) / denom : 0.0;
  return {slope, (sy - slope * sx) / n};
}

}  // namespace

double Decomposition::detrended(std::size_t t) const {
  return mode == DecompositionMode::Multiplicative ? seasonal[t] * remainder[t]
                                                   : seasonal[t] + remainder[t];
}

Decomposition decompose(const MonthlySeries& series, DecompositionMode mode) {
  const auto y = series.dense();
  const std::size_t n = y.size();
  if (n < 2 * kPeriod + 1) {
    throw Error(ErrorCode::SeriesTooShort, "decomposition of '" + series.name() + "' needs at least 25 months");
  }
  const bool mult = mode == DecompositionMode::Multiplicative;
  if (mult) {
    for (double v : y) {
      if (!(v > 0.0)) {
        throw Error(ErrorCode::NonPositiveValue,
                    "multiplicative decomposition of '" + series.name() + "' needs positive values");
      }
    }
  }

  const std::size_t half = kPeriod / 2;
  std::vector<double> trend(n, 0.0);
  for (std::size_t t = half; t + half < n; ++t) {
    double acc = 0.5 * (y[t - half] + y[t + half]);
    for (std::size_t j = t - half + 1; j < t + half; ++j) acc += y[j];
    trend[t] = acc / kPeriod;
  }
  const std::size_t first = half;
  const std::size_t last = n - half - 1;  // inclusive

  // Extend the trend linearly over the ends using the nearest 12 MA values.
  const auto [slope_lo, icpt_lo] = line_fit(trend, first, first + kPeriod);
  const auto [slope_hi, icpt_hi] = line_fit(trend, last + 1 - kPeriod, last + 1);
  std::vector<double> extended = trend;
  bool extension_ok = true;
  for (std::size_t t = 0; t < first; ++t) extended[t] = icpt_lo + slope_lo * static_cast<double>(t);
  for (std::size_t t = last + 1; t < n; ++t) extended[t] = icpt_hi + slope_hi * static_cast<double>(t);
  if (mult) {
    for (std::size_t t = 0; t < n; ++t) extension_ok = extension_ok && extended[t] > 0.0;
  }
  if (!extension_ok) {
    for (std::size_t t = 0; t < first; ++t) extended[t] = trend[first];
    for (std::size_t t = last + 1; t < n; ++t) extended[t] = trend[last];
  }
  trend = std::move(extended);

  std::array<std::vector<double>, kPeriod> by_month;
  for (std::size_t t = first; t <= last; ++t) {
    const int m = (series.start() + static_cast<int>(t)).month() - 1;
    by_month[static_cast<std::size_t>(m)].push_back(mult ? y[t] / trend[t] : y[t] - trend[t]);
  }
  Decomposition dec;
  dec.start = series.start();
  dec.mode = mode;
  double norm = 0.0;
  for (std::size_t m = 0; m < kPeriod; ++m) {
    dec.seasonal_index[m] = median(by_month[m]);
    norm += dec.seasonal_index[m];
  }
  norm /= kPeriod;
  for (auto& s : dec.seasonal_index) s = mult ? s / norm : s - norm;

  dec.trend = std::move(trend);
  dec.seasonal.resize(n);
  dec.remainder.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    const int m = (series.start() + static_cast<int>(t)).month() - 1;
    dec.seasonal[t] = dec.seasonal_index[static_cast<std::size_t>(m)];
    dec.remainder[t] = mult ? y[t] / (dec.trend[t] * dec.seasonal[t]) : y[t] - dec.trend[t] - dec.seasonal[t];
  }
  return dec;
}

std::vector<double> seasonal_variant(const Decomposition& dec, SeasonalVariant variant, int horizon) {
  const std::size_t n = dec.size();
  const std::size_t required = variant == SeasonalVariant::A ? 36 : variant == SeasonalVariant::B ? 12 : 24;
  if (n < required) {
    throw Error(ErrorCode::InsufficientHistory,
                "seasonal variant needs " + std::to_string(required) + " months, have " + std::to_string(n));
  }
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(std::max(horizon, 0)));
  for (int k = 0; k < horizon; ++k) {
    const std::size_t target = n + static_cast<std::size_t>(k);
    // Chronological factor series for the target's calendar month.
    std::vector<double> factors;
    std::size_t last_index = 0;
    for (std::size_t t = target % kPeriod; t < n; t += kPeriod) {
      factors.push_back(dec.detrended(t));
      last_index = t;
    }
    double value = 0.0;
    switch (variant) {
      case SeasonalVariant::A: {
        const std::size_t take = 3;
        for (std::size_t i = factors.size() - take; i < factors.size(); ++i) value += factors[i];
        value /= static_cast<double>(take);
        break;
      }
      case SeasonalVariant::B:
        value = factors.back();
        break;
      case SeasonalVariant::C: {
        const auto steps = static_cast<int>((target - last_index) / kPeriod);
        double intercept = 0.0;
        double phi = 1.0;
        if (factors.size() >= 3) {
          // AR(1) with intercept by least squares on consecutive pairs.
          double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
          const double m = static_cast<double>(factors.size() - 1);
          for (std::size_t i = 1; i < factors.size(); ++i) {
            sx += factors[i - 1];
            sy += factors[i];
            sxx += factors[i - 1] * factors[i - 1];
            sxy += factors[i - 1] * factors[i];
          }
          const double denom = m * sxx - sx * sx;
          if (std::abs(denom) > 1e-14 * (m * sxx + 1e-300)) {
            phi = (m * sxy - sx * sy) / denom;
            intercept = (sy - phi * sx) / m;
          } else {
            phi = 0.0;
            intercept = sy / m;
          }
        }
        value = factors.back();
        for (int s = 0; s < steps; ++s) value = intercept + phi * value;
        break;
      }
    }
    out.push_back(value);
  }
  return out;
}

double seasonal_strength(std::span<const double> y, int period) {
  const std::size_t n = y.size();
  const auto m = static_cast<std::size_t>(period);
  if (period < 2 || n < 2 * m + 1) return 0.0;
  std::vector<double> x(y.begin(), y.end());
  if (std::all_of(x.begin(), x.end(), [](double v) { return v > 0.0; })) {
    for (auto& v : x) v = std::log(v);
  }
  const std::size_t half = m / 2;
  std::vector<double> detrended;
  std::vector<std::size_t> phase;
  for (std::size_t t = half; t + half < n; ++t) {
    double acc = 0.5 * (x[t - half] + x[t + half]);
    for (std::size_t j = t - half + 1; j < t + half; ++j) acc += x[j];
    detrended.push_back(x[t] - acc / static_cast<double>(m));
    phase.push_back(t % m);
  }
  std::vector<double> sum(m, 0.0), count(m, 0.0);
  for (std::size_t i = 0; i < detrended.size(); ++i) {
    sum[phase[i]] += detrended[i];
    count[phase[i]] += 1.0;
  }
  std::vector<double> remainder(detrended.size());
  for (std::size_t i = 0; i < detrended.size(); ++i) remainder[i] = detrended[i] - sum[phase[i]] / count[phase[i]];
  const double vd = variance(detrended);
  if (!(vd > 0.0)) return 0.0;
  return std::max(0.0, 1.0 - variance(remainder) / vd);
}

double seasonal_strength(const MonthlySeries& series) {
  const auto y = series.dense();
  return seasonal_strength(y, kPeriod);
}

}  // namespace rise::models
