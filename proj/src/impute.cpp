#include "rise/impute.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "rise/error.hpp"

namespace rise {
namespace {

double series_scale(const MonthlySeries& series) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& v : series.values()) {
    if (v) {
      total += std::abs(*v);
      ++count;
    }
  }
  const double mean_abs = count > 0 ? total / static_cast<double>(count) : 0.0;
  return std::max(mean_abs, 1.0);
}

double autocov(const std::vector<double>& x, std::size_t lag) {
  if (x.size() <= lag) return 0.0;
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double acc = 0.0;
  for (std::size_t i = lag; i < x.size(); ++i) acc += (x[i] - mean) * (x[i - lag] - mean);
  return acc / static_cast<double>(x.size());
}

}  // namespace

LocalTrendVariances estimate_local_trend_variances(const MonthlySeries& series) {
  // Second differences over runs of consecutive present values. Their
  // autocovariances satisfy
  //   g0 = zeta + 2 eta + 6 eps,  g1 = -eta - 4 eps,  g2 = eps.
  std::vector<std::vector<double>> runs;
  std::vector<double> current;
  for (const auto& v : series.values()) {
    if (v) {
      current.push_back(*v);
    } else if (!current.empty()) {
      runs.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) runs.push_back(std::move(current));

  // Pool second differences across runs, recording run boundaries so that
  // lagged products never straddle a gap.
  double g[3] = {0.0, 0.0, 0.0};
  double counts[3] = {0.0, 0.0, 0.0};
  double mean = 0.0;
  double n_total = 0.0;
  std::vector<std::vector<double>> diffs;
  for (const auto& run : runs) {
    if (run.size() < 3) continue;
    std::vector<double> d2;
    for (std::size_t i = 2; i < run.size(); ++i) d2.push_back(run[i] - 2.0 * run[i - 1] + run[i - 2]);
    for (double v : d2) mean += v;
    n_total += static_cast<double>(d2.size());
    diffs.push_back(std::move(d2));
  }

  const double scale = series_scale(series);
  const double floor = 1e-6 * scale * scale;
  LocalTrendVariances out{floor, floor, floor};
  if (n_total < 6.0) {
    // Too little data for moments: split the variability of first differences evenly.
    std::vector<double> d1;
    for (const auto& run : runs)
      for (std::size_t i = 1; i < run.size(); ++i) d1.push_back(run[i] - run[i - 1]);
    const double v = std::max(autocov(d1, 0), floor);
    return {v, v, std::max(v * 0.01, floor)};
  }
  mean /= n_total;
  for (const auto& d2 : diffs) {
    for (std::size_t lag = 0; lag < 3; ++lag) {
      for (std::size_t i = lag; i < d2.size(); ++i) {
        g[lag] += (d2[i] - mean) * (d2[i - lag] - mean);
        counts[lag] += 1.0;
      }
    }
  }
  for (int lag = 0; lag < 3; ++lag) g[lag] = counts[lag] > 0 ? g[lag] / counts[lag] : 0.0;

  const double eps = std::max(g[2], 0.0);
  const double eta = std::max(-g[1] - 4.0 * eps, 0.0);
  const double zeta = std::max(g[0] - 2.0 * eta - 6.0 * eps, 0.0);
  out.observation = std::max(eps, floor);
  out.level = std::max(eta, floor);
  out.slope = std::max(zeta, floor);
  return out;
}

std::vector<double> smoothed_levels(const MonthlySeries& series,
                                    const LocalTrendVariances& variances) {
  if (series.present_count() < 2) {
    throw Error(ErrorCode::AllMissing,
                "series '" + series.name() + "' needs at least two present values to impute");
  }
  using Eigen::Matrix2d;
  using Eigen::Vector2d;
  const std::size_t n = series.size();
  const double scale = series_scale(series);
  // Approximately diffuse prior on the initial state.
  const double kappa = 1e7 * scale * scale;

  Matrix2d transition;
  transition << 1.0, 1.0, 0.0, 1.0;
  Matrix2d q = Matrix2d::Zero();
  q(0, 0) = variances.level;
  q(1, 1) = variances.slope;
  const double h = variances.observation;

  double first_value = 0.0;
  for (const auto& v : series.values()) {
    if (v) {
      first_value = *v;
      break;
    }
  }

  std::vector<Vector2d> a_pred(n), a_filt(n);
  std::vector<Matrix2d> p_pred(n), p_filt(n);
  a_pred[0] = Vector2d(first_value, 0.0);
  p_pred[0] = kappa * Matrix2d::Identity();

  for (std::size_t t = 0; t < n; ++t) {
    const auto& obs = series[t];
    if (obs) {
      const double innovation = *obs - a_pred[t](0);
      const double f = p_pred[t](0, 0) + h;
      const Vector2d gain = p_pred[t].col(0) / f;
      a_filt[t] = a_pred[t] + gain * innovation;
      // Joseph form keeps the covariance symmetric and positive under the
      // large initial variance.
      Matrix2d ikz = Matrix2d::Identity();
      ikz.col(0) -= gain;
      p_filt[t] = ikz * p_pred[t] * ikz.transpose() + h * gain * gain.transpose();
    } else {
      a_filt[t] = a_pred[t];
      p_filt[t] = p_pred[t];
    }
    p_filt[t] = 0.5 * (p_filt[t] + p_filt[t].transpose()).eval();
    if (t + 1 < n) {
      a_pred[t + 1] = transition * a_filt[t];
      p_pred[t + 1] = transition * p_filt[t] * transition.transpose() + q;
    }
  }

  std::vector<Vector2d> a_smooth(n);
  a_smooth[n - 1] = a_filt[n - 1];
  for (std::size_t t = n - 1; t-- > 0;) {
    const Matrix2d smoother_gain =
        p_filt[t] * transition.transpose() * p_pred[t + 1].inverse();
    a_smooth[t] = a_filt[t] + smoother_gain * (a_smooth[t + 1] - a_pred[t + 1]);
  }

  std::vector<double> levels(n);
  for (std::size_t t = 0; t < n; ++t) levels[t] = a_smooth[t](0);
  return levels;
}

MonthlySeries impute(const MonthlySeries& series, const LocalTrendVariances& variances) {
  if (series.complete()) return series;
  const auto levels = smoothed_levels(series, variances);
  std::vector<std::optional<double>> filled(series.values());
  for (std::size_t t = 0; t < filled.size(); ++t) {
    if (!filled[t]) filled[t] = std::max(levels[t], 0.0);
  }
  return MonthlySeries(series.name(), series.start(), std::move(filled));
}

MonthlySeries impute(const MonthlySeries& series) {
  if (series.complete()) return series;
  if (series.present_count() < 2) {
    throw Error(ErrorCode::AllMissing,
                "series '" + series.name() + "' needs at least two present values to impute");
  }
  return impute(series, estimate_local_trend_variances(series));
}

}  // namespace rise
