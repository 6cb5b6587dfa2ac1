#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "rise/error.hpp"
#include "rise/models/arima.hpp"
#include "rise/models/boxcox.hpp"
#include "rise/models/decompose.hpp"
#include "rise/models/ets.hpp"
#include "rise/models/forecast.hpp"
#include "rise/models/nnar.hpp"
#include "rise/rng.hpp"
#include "rise/synthetic.hpp"

namespace rise::models {
namespace {

std::vector<double> seasonal_series(std::uint64_t seed, int n, double noise = 0.03) {
  Rng rng(seed);
  std::vector<double> y;
  for (int t = 0; t < n; ++t) {
    const double season = 0.25 * std::cos(2.0 * std::numbers::pi * (t % 12) / 12.0);
    y.push_back(1000.0 * std::pow(1.004, t) * std::exp(season + noise * rng.normal()));
  }
  return y;
}

MonthlySeries as_series(const std::vector<double>& y) { return MonthlySeries("y", MonthKey(2012, 1), y); }

TEST(Families, NamesRoundTrip) {
  for (auto f : {ModelFamily::SeasonalNaive, ModelFamily::Naive, ModelFamily::Drift, ModelFamily::Arima,
                 ModelFamily::Ses, ModelFamily::Holt, ModelFamily::HoltWinters, ModelFamily::StlA, ModelFamily::StlB,
                 ModelFamily::StlC, ModelFamily::BoxCoxHoltWinters, ModelFamily::Nnar}) {
    EXPECT_EQ(parse_family(family_name(f)), f);
  }
  EXPECT_EQ(parse_family("snaive"), ModelFamily::SeasonalNaive);
  EXPECT_FALSE(parse_family("prophet").has_value());
}

TEST(SeasonalNaive, RepeatsLastYear) {
  const auto y = seasonal_series(1, 48);
  const auto f = fit_forecast(as_series(y), ModelSpec::of(ModelFamily::SeasonalNaive), 18);
  for (int h = 0; h < 18; ++h) EXPECT_EQ(f.mean[static_cast<std::size_t>(h)], y[36 + static_cast<std::size_t>(h % 12)]);
  EXPECT_EQ(f.month_at(0), MonthKey(2016, 1));
  EXPECT_EQ(f.mean_at(MonthKey(2016, 3)), f.mean[2]);
  EXPECT_FALSE(f.mean_at(MonthKey(2015, 12)).has_value());
}

TEST(Drift, ExtendsTheEndpointLine) {
  const std::vector<double> y{10, 12, 11, 15, 14, 18};
  const auto f = fit_forecast(as_series(y), ModelSpec::of(ModelFamily::Drift), 3);
  const double slope = (18.0 - 10.0) / 5.0;
  for (int h = 1; h <= 3; ++h) EXPECT_DOUBLE_EQ(f.mean[static_cast<std::size_t>(h - 1)], 18.0 + h * slope);
}

TEST(Ses, VarianceMatchesClosedForm) {
  Rng rng(3);
  std::vector<double> y;
  double level = 500.0;
  for (int t = 0; t < 120; ++t) {
    level += rng.normal(0.0, 5.0);
    y.push_back(level + rng.normal(0.0, 10.0));
  }
  const auto fit = fit_ets(y, EtsKind::Ses);
  const auto path = ets_forecast(fit, 12);
  for (int h = 1; h <= 12; ++h) {
    const double expected = fit.sigma2 * (1.0 + (h - 1) * fit.alpha * fit.alpha);
    EXPECT_NEAR(path.variance[static_cast<std::size_t>(h - 1)], expected, 1e-9 * expected);
    EXPECT_DOUBLE_EQ(path.mean[static_cast<std::size_t>(h - 1)], fit.level);
  }
}

TEST(Ses, LeastSquaresInitialLevelMatchesScalarSearch) {
  // SSE is quadratic in the initial level; recover it from three evaluations.
  const auto y = seasonal_series(5, 60, 0.1);
  const double alpha = 0.37;
  auto sse_at = [&](double l0) {
    double level = l0, sse = 0.0;
    for (double v : y) {
      const double e = v - level;
      sse += e * e;
      level += alpha * e;
    }
    return sse;
  };
  const double a = sse_at(0.0), b = sse_at(1000.0), c = sse_at(2000.0);
  const double curvature = (a - 2.0 * b + c) / (2.0 * 1000.0 * 1000.0);
  const double l_star = 1000.0 - (c - a) / (2.0 * 1000.0) / (2.0 * curvature);
  const double oracle = sse_at(l_star);
  EXPECT_NEAR(ets_sse(y, EtsKind::Ses, 12, alpha, 0.0, 0.0), oracle, 1e-7 * oracle);
}

TEST(HoltWinters, TracksSeasonalPattern) {
  // Additive trend and season, the structure the model assumes.
  Rng rng(9);
  std::vector<double> y, truth;
  for (int t = 0; t < 108; ++t) {
    truth.push_back(1000.0 + 3.0 * t + 200.0 * std::cos(2.0 * std::numbers::pi * (t % 12) / 12.0));
    y.push_back(truth.back() + rng.normal(0.0, 10.0));
  }
  y.resize(96);
  const auto f = fit_forecast(as_series(y), ModelSpec::of(ModelFamily::HoltWinters), 12);
  for (std::size_t h = 0; h < 12; ++h) EXPECT_NEAR(f.mean[h] / truth[96 + h], 1.0, 0.05);
}

TEST(Arima, RecoversAr1Coefficient) {
  Rng rng(21);
  std::vector<double> y;
  double x = 0.0;
  for (int t = 0; t < 600; ++t) {
    x = 0.6 * x + rng.normal();
    y.push_back(50.0 + x);
  }
  ArimaOrder order;
  order.p = 1;
  order.include_constant = true;
  const auto fit = fit_arima(y, order);
  ASSERT_EQ(fit.ar.size(), 1u);
  EXPECT_NEAR(fit.ar[0], 0.6, 0.07);
  EXPECT_NEAR(fit.constant, 50.0, 0.3);
}

TEST(Arima, Ar1ForecastMatchesHandRecursion) {
  Rng rng(22);
  std::vector<double> y;
  double x = 0.0;
  for (int t = 0; t < 300; ++t) {
    x = 0.5 * x + rng.normal();
    y.push_back(20.0 + x);
  }
  ArimaOrder order;
  order.p = 1;
  order.include_constant = true;
  const auto fit = fit_arima(y, order);
  const auto path = arima_forecast(fit, 6);
  const double phi = fit.ar[0], mu = fit.constant;
  double dev = y.back() - mu, psi_sum = 0.0, psi = 1.0;
  for (int h = 1; h <= 6; ++h) {
    dev *= phi;
    psi_sum += psi * psi;
    EXPECT_NEAR(path.mean[static_cast<std::size_t>(h - 1)], mu + dev, 1e-9);
    EXPECT_NEAR(path.variance[static_cast<std::size_t>(h - 1)], fit.sigma2 * psi_sum, 1e-9);
    psi *= phi;
  }
}

TEST(Arima, RandomWalkForecastIsFlatWithLinearVariance) {
  Rng rng(23);
  std::vector<double> y{100.0};
  for (int t = 1; t < 200; ++t) y.push_back(y.back() + rng.normal());
  ArimaOrder order;
  order.d = 1;
  const auto fit = fit_arima(y, order);
  const auto path = arima_forecast(fit, 5);
  for (int h = 1; h <= 5; ++h) {
    EXPECT_NEAR(path.mean[static_cast<std::size_t>(h - 1)], y.back(), 1e-9);
    EXPECT_NEAR(path.variance[static_cast<std::size_t>(h - 1)], fit.sigma2 * h, 1e-9);
  }
}

TEST(Arima, KpssSeparatesNoiseFromRandomWalk) {
  Rng rng(24);
  std::vector<double> noise, walk{0.0};
  for (int t = 0; t < 200; ++t) noise.push_back(rng.normal());
  for (int t = 1; t < 200; ++t) walk.push_back(walk.back() + rng.normal());
  EXPECT_LT(kpss_statistic(noise), 0.463);
  EXPECT_GT(kpss_statistic(walk), 0.463);
}

TEST(Decompose, ZeroSeasonalityGivesUnitFactors) {
  synthetic::SyntheticSpec spec;
  spec.seasonal_amplitude = 0.0;
  spec.noise = 0.0;
  spec.destinations.resize(1);
  const auto data = synthetic::generate(spec);
  const auto& series = data.actuals.begin()->second;
  const auto dec = decompose(series.slice(series.start(), MonthKey(2019, 12)), DecompositionMode::Multiplicative);
  for (double s : dec.seasonal_index) EXPECT_NEAR(s, 1.0, 1e-3);
}

TEST(Decompose, SeasonalFactorsAverageToOne) {
  const auto dec = decompose(as_series(seasonal_series(2, 72)), DecompositionMode::Multiplicative);
  double mean = 0.0;
  for (double s : dec.seasonal_index) mean += s / 12.0;
  EXPECT_NEAR(mean, 1.0, 1e-9);
  EXPECT_GT(dec.seasonal_index[0], dec.seasonal_index[6]);
}

TEST(Decompose, VariantCMatchesLeastSquaresAr1) {
  const auto dec = decompose(as_series(seasonal_series(4, 84, 0.05)), DecompositionMode::Multiplicative);
  const auto c = seasonal_variant(dec, SeasonalVariant::C, 18);
  const std::size_t n = dec.size();
  for (int k = 0; k < 18; ++k) {
    const std::size_t target = n + static_cast<std::size_t>(k);
    std::vector<double> f;
    for (std::size_t t = target % 12; t < n; t += 12) f.push_back(dec.detrended(t));
    const auto m = static_cast<Eigen::Index>(f.size() - 1);
    Eigen::MatrixXd X(m, 2);
    Eigen::VectorXd Y(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      X(i, 0) = 1.0;
      X(i, 1) = f[static_cast<std::size_t>(i)];
      Y[i] = f[static_cast<std::size_t>(i) + 1];
    }
    const Eigen::Vector2d beta = X.colPivHouseholderQr().solve(Y);
    int steps = 0;
    for (std::size_t idx = target; idx >= n; idx -= 12) ++steps;
    double v = f.back();
    for (int s = 0; s < steps; ++s) v = beta[0] + beta[1] * v;
    EXPECT_NEAR(c[static_cast<std::size_t>(k)], v, 1e-9) << k;
  }
}

TEST(Decompose, VariantsAAndB) {
  const auto dec = decompose(as_series(seasonal_series(6, 60, 0.05)), DecompositionMode::Multiplicative);
  const auto a = seasonal_variant(dec, SeasonalVariant::A, 12);
  const auto b = seasonal_variant(dec, SeasonalVariant::B, 12);
  for (std::size_t k = 0; k < 12; ++k) {
    EXPECT_DOUBLE_EQ(b[k], dec.detrended(48 + k));
    EXPECT_NEAR(a[k], (dec.detrended(24 + k) + dec.detrended(36 + k) + dec.detrended(48 + k)) / 3.0, 1e-12);
  }
  EXPECT_THROW(seasonal_variant(decompose(as_series(seasonal_series(6, 30)), DecompositionMode::Multiplicative),
                                SeasonalVariant::A, 3),
               Error);
}

TEST(BoxCox, RoundTripsAndSelectsLogForMultiplicativeData) {
  for (double lambda : {0.0, 0.3, 1.0, 1.7}) {
    for (double y : {0.5, 3.0, 1234.5}) EXPECT_NEAR(inverse_box_cox(box_cox(y, lambda), lambda), y, 1e-9 * y);
  }
  EXPECT_EQ(guerrero_lambda(std::vector<double>{1.0, 0.0, 2.0}), 1.0);
  Rng rng(8);
  std::vector<double> y;
  for (int t = 0; t < 120; ++t) y.push_back(std::exp(0.03 * t + 0.2 * std::sin(t * 0.5236) + 0.05 * rng.normal()));
  EXPECT_LT(guerrero_lambda(y), 0.5);
}

TEST(Nnar, DeterministicForSeed) {
  const auto y = seasonal_series(12, 72);
  NnarOptions opt;
  opt.repeats = 3;
  opt.epochs = 50;
  opt.seed = 77;
  const auto a = nnar_forecast(y, opt, 6);
  const auto b = nnar_forecast(y, opt, 6);
  EXPECT_EQ(a.mean, b.mean);
  opt.seed = 78;
  EXPECT_NE(nnar_forecast(y, opt, 6).mean, a.mean);
}

TEST(FitForecast, BoundsBracketMeanAndAreNonNegative) {
  const auto s = as_series(seasonal_series(13, 96));
  for (auto f : {ModelFamily::SeasonalNaive, ModelFamily::Drift, ModelFamily::Arima, ModelFamily::Ses,
                 ModelFamily::Holt, ModelFamily::HoltWinters, ModelFamily::StlA, ModelFamily::StlB, ModelFamily::StlC,
                 ModelFamily::BoxCoxHoltWinters}) {
    const auto r = fit_forecast(s, ModelSpec::of(f), 24);
    ASSERT_TRUE(r.has_bounds()) << family_name(f);
    for (std::size_t h = 0; h < 24; ++h) {
      EXPECT_LE((*r.lower80)[h], r.mean[h]) << family_name(f);
      EXPECT_GE((*r.upper80)[h], r.mean[h]) << family_name(f);
      EXPECT_GE((*r.lower80)[h], 0.0);
    }
  }
}

TEST(FitForecast, ShortSeriesRejected) {
  const auto s = as_series(seasonal_series(14, 20));
  try {
    fit_forecast(s, ModelSpec::of(ModelFamily::HoltWinters), 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SeriesTooShort);
  }
}

TEST(FitForecast, SharedFitsMatchIndividualFits) {
  const auto s = as_series(seasonal_series(15, 84));
  const std::vector<ModelSpec> specs{ModelSpec::of(ModelFamily::StlA), ModelSpec::of(ModelFamily::StlB),
                                     ModelSpec::of(ModelFamily::StlC), ModelSpec::of(ModelFamily::Ses)};
  const auto shared = fit_forecasts(s, specs, 12);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto single = fit_forecast(s, specs[i], 12);
    EXPECT_EQ(std::get<ForecastResult>(shared[i]).mean, single.mean) << specs[i].model_id();
  }
}

TEST(Validation, FailedFitsAreRecordedNotThrown) {
  const auto y = seasonal_series(16, 40);
  const MonthlySeries train("y", MonthKey(2012, 1), std::vector<double>(y.begin(), y.begin() + 16));
  const MonthlySeries valid("y", MonthKey(2013, 5), std::vector<double>(y.begin() + 16, y.end()));
  const std::vector<ModelSpec> specs{ModelSpec::of(ModelFamily::Naive), ModelSpec::of(ModelFamily::HoltWinters)};
  const auto rows = validate_models(train, valid, specs);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_FALSE(rows[0].error.has_value());
  EXPECT_TRUE(rows[1].error.has_value());
  EXPECT_TRUE(std::isnan(rows[1].mase));
}

TEST(Properties, HalfWidthsGrowWithHorizon) {
  const auto y = seasonal_series(31, 72);
  for (auto family : {ModelFamily::Ses, ModelFamily::Holt, ModelFamily::Drift}) {
    const auto f = fit_forecast(as_series(y), ModelSpec::of(family), 24);
    ASSERT_TRUE(f.has_bounds());
    double previous = 0.0;
    for (std::size_t h = 0; h < 24; ++h) {
      EXPECT_LE((*f.lower80)[h], f.mean[h]);
      EXPECT_GE((*f.upper80)[h], f.mean[h]);
      const double half = 0.5 * ((*f.upper80)[h] - (*f.lower80)[h]);
      EXPECT_GE(half, previous * (1.0 - 1e-12)) << family_name(family) << " h=" << h;
      previous = half;
    }
  }
}

TEST(Properties, DecompositionReconstructsSeries) {
  const auto y = seasonal_series(32, 96);
  const auto dec = decompose(as_series(y), DecompositionMode::Multiplicative);
  ASSERT_EQ(dec.size(), y.size());
  for (std::size_t t = 0; t < y.size(); ++t) {
    EXPECT_NEAR(dec.trend[t] * dec.seasonal[t] * dec.remainder[t], y[t], 1e-9 * y[t]) << t;
  }
}

}  // namespace
}  // namespace rise::models
