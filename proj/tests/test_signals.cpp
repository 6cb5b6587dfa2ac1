#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <functional>

#include "rise/error.hpp"
#include "rise/rng.hpp"
#include "rise/signals.hpp"

namespace rise::signals {
namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::ConfigError;
}

const MonthKey kStart{2015, 1};

std::vector<double> seasonal_series(std::uint64_t seed, int n) {
  Rng rng(seed);
  std::vector<double> v;
  for (int t = 0; t < n; ++t) {
    v.push_back(1000.0 + 4.0 * t + 200.0 * std::cos(2.0 * M_PI * t / 12.0) + rng.normal(0.0, 30.0));
  }
  return v;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const Eigen::Map<const Eigen::VectorXd> x(a.data(), static_cast<Eigen::Index>(a.size()));
  const Eigen::Map<const Eigen::VectorXd> y(b.data(), static_cast<Eigen::Index>(b.size()));
  const Eigen::VectorXd xc = x.array() - x.mean();
  const Eigen::VectorXd yc = y.array() - y.mean();
  return xc.dot(yc) / std::sqrt(xc.squaredNorm() * yc.squaredNorm());
}

TEST(Signals, LaggedCorrelationMatchesPearson) {
  const auto a = seasonal_series(1, 48);
  const auto k = seasonal_series(2, 48);
  const MonthlySeries arrivals("A", kStart, a);
  const MonthlySeries index("k", kStart, k);
  // arrivals_t paired with index_{t-2}: a[2..] against k[..n-2].
  const std::vector<double> aa(a.begin() + 2, a.end());
  const std::vector<double> kk(k.begin(), k.end() - 2);
  EXPECT_NEAR(lagged_correlation(arrivals, index, 2), pearson(aa, kk), 1e-12);
}

TEST(Signals, BestLagFindsOneMonthLead) {
  const auto a = seasonal_series(3, 60);
  // The keyword leads arrivals by one month: index_t = arrivals_{t+1}.
  std::vector<double> k(a.begin() + 1, a.end());
  const MonthlySeries arrivals("A", kStart, a);
  const MonthlySeries index("k", kStart, k);
  const auto best = best_lag(arrivals, index, 6);
  EXPECT_EQ(best.lag, 1);
  EXPECT_NEAR(best.correlation, 1.0, 1e-12);
}

TEST(Signals, ShortOverlapIsRejected) {
  const MonthlySeries arrivals("A", kStart, seasonal_series(4, 11));
  const MonthlySeries index("k", kStart, seasonal_series(5, 11));
  EXPECT_EQ(code_of([&] { lagged_correlation(arrivals, index, 0); }), ErrorCode::InsufficientOverlap);
}

TEST(Signals, CompositeKeepsOnlyCorrelatedKeywords) {
  const auto a = seasonal_series(6, 60);
  std::vector<double> good(a.begin() + 1, a.end());
  std::vector<double> scaled;
  for (double v : good) scaled.push_back(0.5 * v + 10.0);
  Rng rng(7);
  std::vector<double> noise;
  for (int t = 0; t < 59; ++t) noise.push_back(rng.uniform(10.0, 20.0));
  const MonthlySeries arrivals("A", kStart, a);
  const std::vector<KeywordSeries> kws{{"good", MonthlySeries("good", kStart, good)},
                                       {"noise", MonthlySeries("noise", kStart, noise)},
                                       {"scaled", MonthlySeries("scaled", kStart, scaled)}};
  const auto c = build_composite(arrivals, kws, 0.6, 1);
  EXPECT_EQ(c.included, (std::vector<std::string>{"good", "scaled"}));
  ASSERT_EQ(c.correlations.size(), 3u);
  EXPECT_LT(c.correlations[1].second, 0.6);
  for (std::size_t t = 0; t < good.size(); ++t) {
    EXPECT_DOUBLE_EQ(*c.series.at(kStart + static_cast<int>(t)), good[t] + scaled[t]);
  }
  EXPECT_EQ(code_of([&] { build_composite(arrivals, {kws[1]}, 0.6, 1); }), ErrorCode::NoKeywordPasses);
}

TEST(Signals, FutureIndexUsesObservedThenSeasonalNaive) {
  std::vector<double> k;
  for (int t = 0; t < 36; ++t) k.push_back(100.0 + t);
  const CompositeIndex c{"c", {}, {}, MonthlySeries("c", kStart, k), 1};
  // First forecast month is one past the composite end, so the first value is the last observation.
  const auto f = future_index(c, kStart + 36, 3);
  ASSERT_EQ(f.size(), 3u);
  EXPECT_EQ(f[0], 135.0);
  EXPECT_EQ(f[1], 124.0);  // month 36 continues from month 24
  EXPECT_EQ(f[2], 125.0);
}

TEST(Signals, RegressionSlopeMatchesLeastSquaresOracle) {
  const int n = 48;
  Rng rng(8);
  std::vector<double> x;
  for (int t = 0; t < n + 1; ++t) x.push_back(rng.uniform(50.0, 150.0));
  std::vector<double> y(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) {
    const MonthKey m = kStart + t + 1;
    y[static_cast<std::size_t>(t)] = 500.0 + 3.0 * t + 40.0 * m.month() + 2.0 * x[static_cast<std::size_t>(t)] +
                                     rng.normal(0.0, 5.0);
  }
  // Arrivals start one month after the index so every arrival month has a lagged index value.
  const MonthlySeries arrivals("A", kStart + 1, y);
  const CompositeIndex c{"c", {}, {}, MonthlySeries("c", kStart, x), 1};
  const auto fit = exog_forecast(arrivals, c, 6);

  // Oracle: normal equations with intercept, trend, 11 month dummies and the regressor.
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, 14);
  Eigen::VectorXd Y(n);
  for (int t = 0; t < n; ++t) {
    const MonthKey m = kStart + t + 1;
    X(t, 0) = 1.0;
    X(t, 1) = t;
    if (m.month() > 1) X(t, m.month()) = 1.0;
    X(t, 13) = x[static_cast<std::size_t>(t)];
    Y[t] = y[static_cast<std::size_t>(t)];
  }
  const Eigen::VectorXd beta = (X.transpose() * X).ldlt().solve(X.transpose() * Y);
  EXPECT_NEAR(fit.regression_fit.slope, beta[13], 1e-8);
  EXPECT_NEAR(fit.regression_fit.slope, 2.0, 0.1);
  EXPECT_GT(fit.regression_fit.standard_error, 0.0);

  // Two-step model: first stage is the simple regression of y on x.
  const Eigen::Map<const Eigen::VectorXd> xv(x.data(), n);
  const Eigen::VectorXd xc = xv.array() - xv.mean();
  const Eigen::VectorXd yc = Y.array() - Y.mean();
  EXPECT_NEAR(fit.arimax_fit.slope, xc.dot(yc) / xc.squaredNorm(), 1e-8);

  ASSERT_EQ(fit.path.size(), 6u);
  for (std::size_t h = 0; h < 6; ++h) {
    EXPECT_DOUBLE_EQ(fit.path[h], 0.5 * (fit.arimax[h] + fit.regression[h]));
    EXPECT_GE(fit.path[h], 0.0);
  }
}

TEST(Signals, ConstantCompositeDropsRegressor) {
  const auto y = seasonal_series(9, 40);
  const CompositeIndex c{"c", {}, {}, MonthlySeries("c", kStart, std::vector<double>(40, 7.0)), 1};
  const auto fit = exog_forecast(MonthlySeries("A", kStart, y), c, 3);
  EXPECT_FALSE(fit.regression_fit.regressor_used);
  EXPECT_FALSE(fit.arimax_fit.regressor_used);
  EXPECT_EQ(fit.path.size(), 3u);
}

TEST(Signals, FlightRatioScalesLastObservedArrivals) {
  const MonthlySeries arrivals("A", kStart, std::vector<double>{100, 200, 300});
  const MonthlySeries flights("A", kStart, std::vector<double>{1, 2, 10, 15, 5});
  const auto f = flight_forecast(arrivals, flights, 2);
  EXPECT_EQ(f, (std::vector<double>{450.0, 150.0}));
  EXPECT_EQ(code_of([&] { flight_forecast(arrivals, flights, 3); }), ErrorCode::NoFlightData);
  const MonthlySeries zero("A", kStart, std::vector<double>{1, 2, 0, 15});
  EXPECT_EQ(code_of([&] { flight_forecast(arrivals, zero, 1); }), ErrorCode::NoFlightData);
}

TEST(Signals, ReferenceAveragesBranchesAndReportsMissingData) {
  const auto a = seasonal_series(10, 60);
  std::vector<double> k(a.begin() + 1, a.end());
  const MonthlySeries arrivals("A", kStart, a);
  std::vector<double> fl(66, 1.0);
  for (int t = 0; t < 66; ++t) fl[static_cast<std::size_t>(t)] = 50.0 + t;
  const MonthlySeries flights("A", kStart, fl);
  const std::vector<KeywordSeries> kws{{"k", MonthlySeries("k", kStart, k)}};

  const auto both = reference_forecast("A", arrivals, kws, flights, 4);
  ASSERT_TRUE(both.index_branch && both.flight_branch);
  for (std::size_t h = 0; h < 4; ++h) {
    EXPECT_DOUBLE_EQ(both.path[h], 0.5 * ((*both.index_branch)[h] + (*both.flight_branch)[h]));
  }
  EXPECT_EQ(both.start, arrivals.end() + 1);

  const auto flights_only = reference_forecast("A", arrivals, {}, flights, 4);
  EXPECT_FALSE(flights_only.index_branch);
  EXPECT_EQ(flights_only.path, *flights_only.flight_branch);
  EXPECT_FALSE(flights_only.warnings.empty());

  const auto index_only = reference_forecast("A", arrivals, kws, std::nullopt, 4);
  EXPECT_EQ(index_only.path, *index_only.index_branch);

  EXPECT_EQ(code_of([&] { reference_forecast("A", arrivals, {}, std::nullopt, 4); }), ErrorCode::NoSignal);
}

TEST(Properties, BestLagIsShiftEquivariant) {
  const auto a = seasonal_series(40, 72);
  const MonthlySeries arrivals("A", kStart, a);
  for (int k = 0; k <= 4; ++k) {
    // index_t = arrivals_{t+1+k}: the keyword leads by k more months.
    std::vector<double> idx(a.begin() + 1, a.end());
    const MonthlySeries index("k", kStart - k, idx);
    EXPECT_EQ(best_lag(arrivals, index, 8).lag, 1 + k) << k;
  }
}

TEST(Properties, RaisingThresholdNeverAddsKeywords) {
  const auto a = seasonal_series(41, 60);
  Rng rng(42);
  std::vector<KeywordSeries> kws;
  for (int j = 0; j < 6; ++j) {
    std::vector<double> v;
    for (std::size_t t = 1; t < a.size(); ++t) v.push_back(a[t] * (1.0 + rng.normal(0.0, 0.05 * j)) + 50.0 * j);
    kws.push_back({"k" + std::to_string(j), MonthlySeries("k" + std::to_string(j), kStart, v)});
  }
  std::size_t previous = kws.size() + 1;
  for (double threshold = -1.0; threshold <= 1.0; threshold += 0.05) {
    std::size_t count = 0;
    try {
      count = build_composite(MonthlySeries("A", kStart, a), kws, threshold, 1).included.size();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::NoKeywordPasses);
    }
    EXPECT_LE(count, previous);
    previous = count;
  }
}

TEST(Properties, FlightPathIsScaleInvariant) {
  const MonthlySeries arrivals("A", kStart, seasonal_series(43, 24));
  std::vector<double> fl, scaled;
  Rng rng(44);
  for (int t = 0; t < 30; ++t) {
    fl.push_back(rng.uniform(10.0, 100.0));
    scaled.push_back(fl.back() * 37.5);
  }
  const auto a = flight_forecast(arrivals, MonthlySeries("A", kStart, fl), 6);
  const auto b = flight_forecast(arrivals, MonthlySeries("A", kStart, scaled), 6);
  for (std::size_t h = 0; h < 6; ++h) EXPECT_NEAR(a[h], b[h], 1e-12 * a[h]);
}

TEST(Properties, ReferenceLiesBetweenItsBranches) {
  const auto a = seasonal_series(45, 60);
  std::vector<double> k(a.begin() + 1, a.end());
  Rng rng(46);
  std::vector<double> fl;
  for (int t = 0; t < 70; ++t) fl.push_back(rng.uniform(20.0, 80.0));
  const auto ref = reference_forecast("A", MonthlySeries("A", kStart, a), {{"k", MonthlySeries("k", kStart, k)}},
                                      MonthlySeries("A", kStart, fl), 6);
  ASSERT_TRUE(ref.index_branch && ref.flight_branch);
  for (std::size_t h = 0; h < 6; ++h) {
    const double lo = std::min((*ref.index_branch)[h], (*ref.flight_branch)[h]);
    const double hi = std::max((*ref.index_branch)[h], (*ref.flight_branch)[h]);
    EXPECT_GE(ref.path[h], lo);
    EXPECT_LE(ref.path[h], hi);
  }
}

}  // namespace
}  // namespace rise::signals
