#include "rise/signals.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "rise/error.hpp"
#include "rise/models/arima.hpp"
#include "rise/models/forecast.hpp"

namespace rise::signals {
namespace {

constexpr int kMinOverlap = 12;

// Composite value at month m, nullopt when outside or missing.
std::optional<double> index_at(const CompositeIndex& c, MonthKey m) { return c.series.at(m); }

struct Window {
  MonthKey first;
  MonthKey last;  // inclusive
  int size() const { return last - first + 1; }
};

// Trailing stretch of arrival months whose lagged composite is observed.
Window fit_window(const MonthlySeries& arrivals, const CompositeIndex& composite) {
  MonthKey last = std::min(arrivals.end(), composite.series.end() + composite.lag);
  while (last >= arrivals.start() && (!arrivals.at(last) || !index_at(composite, last - composite.lag))) {
    last = last - 1;
  }
  MonthKey first = last;
  while (first - 1 >= arrivals.start() && arrivals.at(first - 1) && index_at(composite, first - 1 - composite.lag)) {
    first = first - 1;
  }
  if (last < arrivals.start() || last - first + 1 < kMinOverlap) {
    throw Error(ErrorCode::InsufficientOverlap,
                "composite index and arrivals overlap in fewer than 12 months for '" + arrivals.name() + "'");
  }
  return {first, last};
}

std::vector<double> clamp_path(std::vector<double> v) {
  for (auto& x : v) x = std::max(x, 0.0);
  return v;
}

RegressionSummary summarize(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& beta,
                            Eigen::Index column) {
  RegressionSummary s;
  s.slope = beta[column];
  const Eigen::VectorXd resid = y - X * beta;
  const double dof = std::max<double>(1.0, static_cast<double>(X.rows() - X.cols()));
  const double sigma2 = resid.squaredNorm() / dof;
  const Eigen::MatrixXd xtx = X.transpose() * X;
  const Eigen::MatrixXd inv = xtx.colPivHouseholderQr().inverse();
  s.standard_error = std::sqrt(std::max(0.0, sigma2 * inv(column, column)));
  return s;
}

}  // namespace

double lagged_correlation(const MonthlySeries& arrivals, const MonthlySeries& index, int lag) {
  std::vector<double> a, b;
  for (MonthKey m = arrivals.start(); m <= arrivals.end(); ++m) {
    const auto y = arrivals.at(m);
    const auto x = index.at(m - lag);
    if (y && x) {
      a.push_back(*y);
      b.push_back(*x);
    }
  }
  if (a.size() < static_cast<std::size_t>(kMinOverlap)) {
    throw Error(ErrorCode::InsufficientOverlap, "'" + index.name() + "' overlaps arrivals in " +
                                                    std::to_string(a.size()) + " months at lag " + std::to_string(lag));
  }
  const auto n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

LagCorrelation best_lag(const MonthlySeries& arrivals, const MonthlySeries& index, int max_lag) {
  LagCorrelation best{0, -2.0};
  for (int lag = 0; lag <= max_lag; ++lag) {
    const double c = lagged_correlation(arrivals, index, lag);
    if (c > best.correlation) best = {lag, c};
  }
  return best;
}

CompositeIndex build_composite(const MonthlySeries& arrivals, const std::vector<KeywordSeries>& keywords,
                               double threshold, int lag) {
  CompositeIndex out{arrivals.name(), {}, {}, MonthlySeries(arrivals.name(), arrivals.start(), std::vector<double>{0.0}),
                     lag};
  std::vector<const KeywordSeries*> passing;
  for (const auto& kw : keywords) {
    double c = 0.0;
    try {
      c = lagged_correlation(arrivals, kw.series, lag);
    } catch (const Error&) {
      c = 0.0;
    }
    out.correlations.emplace_back(kw.keyword, c);
    if (c >= threshold) {
      passing.push_back(&kw);
      out.included.push_back(kw.keyword);
    }
  }
  if (passing.empty()) {
    throw Error(ErrorCode::NoKeywordPasses, "no keyword for '" + arrivals.name() + "' reaches correlation " +
                                                std::to_string(threshold));
  }
  MonthKey first = passing.front()->series.start();
  MonthKey last = passing.front()->series.end();
  for (const auto* kw : passing) {
    first = std::max(first, kw->series.start());
    last = std::min(last, kw->series.end());
  }
  if (last < first) throw Error(ErrorCode::NoKeywordPasses, "included keywords share no months");
  std::vector<std::optional<double>> values;
  for (MonthKey m = first; m <= last; ++m) {
    std::optional<double> sum = 0.0;
    for (const auto* kw : passing) {
      const auto v = kw->series.at(m);
      if (!v) {
        sum.reset();
        break;
      }
      *sum += *v;
    }
    values.push_back(sum);
  }
  out.series = MonthlySeries(arrivals.name() + "/composite", first, std::move(values));
  return out;
}

std::vector<double> future_index(const CompositeIndex& composite, MonthKey first_month, int horizon) {
  const auto last_observed = composite.series.last_observed();
  if (!last_observed) throw Error(ErrorCode::ZeroIndex, "composite index has no observations");
  std::vector<double> out;
  for (int h = 0; h < horizon; ++h) {
    const MonthKey source = first_month + h - composite.lag;
    std::optional<double> v = composite.series.at(source);
    for (MonthKey back = source - 12; !v && back >= composite.series.start(); back = back - 12) {
      if (back <= *last_observed) v = composite.series.at(back);
    }
    if (!v) {
      throw Error(ErrorCode::ZeroIndex, "composite index cannot be extended to " + source.to_string());
    }
    out.push_back(*v);
  }
  return out;
}

std::vector<double> ratio_forecast(const MonthlySeries& arrivals, const CompositeIndex& composite, int horizon) {
  const Window w = fit_window(arrivals, composite);
  std::vector<double> ratio;
  for (MonthKey m = w.first; m <= w.last; ++m) {
    const double x = *index_at(composite, m - composite.lag);
    if (!(x > 0.0)) {
      throw Error(ErrorCode::ZeroIndex, "composite index is zero at " + (m - composite.lag).to_string());
    }
    ratio.push_back(*arrivals.at(m) / x);
  }
  const MonthlySeries ratio_series(arrivals.name() + "/ratio", w.first, ratio);
  // The fit window may stop short of the last arrivals month; forecast through the gap.
  const int skip = arrivals.end() - w.last;
  const int steps = horizon + skip;
  const auto future = future_index(composite, w.last + 1, steps);
  std::vector<double> acc(static_cast<std::size_t>(steps), 0.0);
  int fitted = 0;
  std::optional<Error> last_error;
  for (auto family : {models::ModelFamily::Ses, models::ModelFamily::HoltWinters,
                      models::ModelFamily::BoxCoxHoltWinters}) {
    try {
      const auto f = models::fit_forecast(ratio_series, models::ModelSpec::of(family), steps);
      for (std::size_t h = 0; h < acc.size(); ++h) acc[h] += f.mean[h];
      ++fitted;
    } catch (const Error& e) {
      last_error = e;
    }
  }
  if (fitted == 0) throw *last_error;
  for (std::size_t h = 0; h < acc.size(); ++h) acc[h] = acc[h] / fitted * future[h];
  acc.erase(acc.begin(), acc.begin() + skip);
  return clamp_path(acc);
}

ExogForecast exog_forecast(const MonthlySeries& arrivals, const CompositeIndex& composite, int horizon) {
  const Window w = fit_window(arrivals, composite);
  const int n = w.size();
  Eigen::VectorXd y(n), x(n);
  for (int i = 0; i < n; ++i) {
    y[i] = *arrivals.at(w.first + i);
    x[i] = *index_at(composite, w.first + i - composite.lag);
  }
  const int skip = arrivals.end() - w.last;
  const int steps = horizon + skip;
  const auto future = future_index(composite, w.last + 1, steps);
  const bool use_x = (x.array() - x.mean()).abs().maxCoeff() > 0.0;

  ExogForecast out;
  // Regression with ARIMA errors, estimated in two steps.
  {
    const Eigen::Index k = use_x ? 2 : 1;
    Eigen::MatrixXd X(n, k);
    X.col(0).setOnes();
    if (use_x) X.col(1) = x;
    const Eigen::VectorXd beta = X.colPivHouseholderQr().solve(y);
    if (use_x) out.arimax_fit = summarize(X, y, beta, 1);
    out.arimax_fit.regressor_used = use_x;
    const Eigen::VectorXd eta = y - X * beta;
    const auto fit = models::auto_arima(std::span<const double>(eta.data(), static_cast<std::size_t>(n)), {});
    const auto path = models::arima_forecast(fit, steps);
    for (int h = skip; h < steps; ++h) {
      double v = beta[0] + path.mean[static_cast<std::size_t>(h)];
      if (use_x) v += beta[1] * future[static_cast<std::size_t>(h)];
      out.arimax.push_back(v);
    }
  }
  // Trend + month dummies + regressor by least squares.
  {
    const Eigen::Index k = 2 + 11 + (use_x ? 1 : 0);
    auto row = [&](int t, MonthKey m, double xv, Eigen::Ref<Eigen::RowVectorXd> r) {
      r.setZero();
      r[0] = 1.0;
      r[1] = t;
      if (m.month() > 1) r[1 + m.month() - 1] = 1.0;
      if (use_x) r[13] = xv;
    };
    Eigen::MatrixXd X(n, k);
    for (int i = 0; i < n; ++i) {
      Eigen::RowVectorXd r(k);
      row(i, w.first + i, x[i], r);
      X.row(i) = r;
    }
    const auto qr = X.colPivHouseholderQr();
    const Eigen::VectorXd beta = qr.solve(y);
    if (use_x) out.regression_fit = summarize(X, y, beta, 13);
    out.regression_fit.regressor_used = use_x;
    for (int h = skip; h < steps; ++h) {
      Eigen::RowVectorXd r(k);
      row(n + h, w.last + 1 + h, future[static_cast<std::size_t>(h)], r);
      out.regression.push_back(r.dot(beta));
    }
  }
  out.arimax = clamp_path(out.arimax);
  out.regression = clamp_path(out.regression);
  for (int h = 0; h < horizon; ++h) {
    const auto i = static_cast<std::size_t>(h);
    out.path.push_back(0.5 * (out.arimax[i] + out.regression[i]));
  }
  for (double v : out.path) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonConvergence, "exogenous forecast diverged");
  }
  return out;
}

std::vector<double> flight_forecast(const MonthlySeries& arrivals, const MonthlySeries& flights, int horizon) {
  const auto baseline_month = arrivals.last_observed();
  if (!baseline_month) throw Error(ErrorCode::AllMissing, "no observed arrivals for '" + arrivals.name() + "'");
  const double baseline = *arrivals.at(*baseline_month);
  const auto base_flights = flights.at(*baseline_month);
  if (!base_flights || *base_flights <= 0.0) {
    throw Error(ErrorCode::NoFlightData, "no flights at the baseline month " + baseline_month->to_string() +
                                             " for '" + arrivals.name() + "'");
  }
  std::vector<double> out;
  for (int h = 1; h <= horizon; ++h) {
    const auto f = flights.at(*baseline_month + h);
    if (!f) {
      throw Error(ErrorCode::NoFlightData, "flights missing at " + (*baseline_month + h).to_string() + " for '" +
                                               arrivals.name() + "'");
    }
    out.push_back(baseline * (*f / *base_flights));
  }
  return out;
}

ReferenceForecast reference_forecast(const std::string& destination, const MonthlySeries& arrivals,
                                     const std::vector<KeywordSeries>& keywords,
                                     const std::optional<MonthlySeries>& flights, int horizon,
                                     const ReferenceOptions& options) {
  ReferenceForecast out;
  out.destination = destination;
  out.start = arrivals.end() + 1;
  if (keywords.empty()) {
    out.warnings.push_back("no keyword data");
  } else {
    try {
      const auto composite = build_composite(arrivals, keywords, options.threshold, options.lag);
      out.included_keywords = composite.included;
      std::vector<std::vector<double>> parts;
      try {
        out.ratio = ratio_forecast(arrivals, composite, horizon);
        parts.push_back(*out.ratio);
      } catch (const Error& e) {
        out.warnings.push_back(std::string("ratio strategy skipped: ") + e.what());
      }
      try {
        out.exog = exog_forecast(arrivals, composite, horizon).path;
        parts.push_back(*out.exog);
      } catch (const Error& e) {
        out.warnings.push_back(std::string("exogenous strategy skipped: ") + e.what());
      }
      if (!parts.empty()) {
        std::vector<double> mean(static_cast<std::size_t>(horizon), 0.0);
        for (const auto& p : parts)
          for (std::size_t h = 0; h < mean.size(); ++h) mean[h] += p[h] / static_cast<double>(parts.size());
        out.index_branch = mean;
      }
    } catch (const Error& e) {
      out.warnings.push_back(std::string("index branch skipped: ") + e.what());
    }
  }
  if (!flights) {
    out.warnings.push_back("no flight data");
  } else {
    try {
      out.flight_branch = flight_forecast(arrivals, *flights, horizon);
    } catch (const Error& e) {
      out.warnings.push_back(std::string("flight branch skipped: ") + e.what());
    }
  }
  if (!out.index_branch && !out.flight_branch) {
    throw Error(ErrorCode::NoSignal, "no reference signal available for '" + destination + "'");
  }
  out.path.assign(static_cast<std::size_t>(horizon), 0.0);
  const double branches = (out.index_branch ? 1.0 : 0.0) + (out.flight_branch ? 1.0 : 0.0);
  for (std::size_t h = 0; h < out.path.size(); ++h) {
    if (out.index_branch) out.path[h] += (*out.index_branch)[h];
    if (out.flight_branch) out.path[h] += (*out.flight_branch)[h];
    out.path[h] /= branches;
  }
  return out;
}

}  // namespace rise::signals
