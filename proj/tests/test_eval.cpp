#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <sstream>

#include "rise/error.hpp"
#include "rise/eval.hpp"
#include "rise/rng.hpp"

namespace rise::eval {
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

double pinball(double y, double q, double tau) { return (y - q) * (tau - (y < q ? 1.0 : 0.0)); }

TEST(Metrics, RmseAndMape) {
  const std::vector<double> f{110, 90, 100};
  const std::vector<double> a{100, 100, 0};
  EXPECT_NEAR(rmse(f, a), std::sqrt((100.0 + 100.0 + 10000.0) / 3.0), 1e-12);
  const auto m = mape(f, a);
  EXPECT_NEAR(m.value, 0.1, 1e-12);
  EXPECT_EQ(m.skipped, 1u);
  const auto pe = percentage_error(f, a);
  EXPECT_NEAR(*pe[0], 0.1, 1e-12);
  EXPECT_NEAR(*pe[1], -0.1, 1e-12);
  EXPECT_FALSE(pe[2].has_value());
}

TEST(Metrics, MaseUsesSeasonalNaiveScale) {
  std::vector<double> insample;
  for (int t = 0; t < 24; ++t) insample.push_back(t < 12 ? 100.0 : 104.0);
  const std::vector<double> f{10, 20};
  const std::vector<double> a{12, 16};
  EXPECT_NEAR(mase(f, a, insample, 12), 3.0 / 4.0, 1e-12);
  EXPECT_NEAR(mase(f, a, insample, 1), 3.0 / (4.0 / 23.0), 1e-9);
  EXPECT_EQ(code_of([&] { mase(f, a, std::vector<double>(24, 5.0), 12); }), ErrorCode::ZeroScale);
  EXPECT_EQ(code_of([&] { mase(f, a, std::vector<double>(12, 5.0), 12); }), ErrorCode::ZeroScale);
}

TEST(Winkler, HandCases) {
  const std::vector<double> lo{10}, hi{20};
  EXPECT_DOUBLE_EQ(winkler(lo, hi, std::vector<double>{15}, 0.2), 10.0);
  EXPECT_DOUBLE_EQ(winkler(lo, hi, std::vector<double>{5}, 0.2), 60.0);
  EXPECT_DOUBLE_EQ(winkler(lo, hi, std::vector<double>{25}, 0.2), 60.0);
  EXPECT_DOUBLE_EQ(winkler(lo, hi, std::vector<double>{20}, 0.2), 10.0);
  EXPECT_EQ(code_of([] { winkler(std::vector<double>{3}, std::vector<double>{2}, std::vector<double>{2}); }),
            ErrorCode::BadInterval);
}

TEST(Winkler, MatchesPinballDecomposition) {
  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const double alpha = rng.uniform(0.01, 0.5);
    std::vector<double> lo, hi, y;
    double oracle = 0.0;
    for (int i = 0; i < 12; ++i) {
      const double l = rng.uniform(-100.0, 100.0);
      lo.push_back(l);
      hi.push_back(l + rng.uniform(0.0, 50.0));
      y.push_back(rng.uniform(-150.0, 200.0));
      oracle += 2.0 / alpha * (pinball(y.back(), lo.back(), alpha / 2.0) + pinball(y.back(), hi.back(), 1.0 - alpha / 2.0));
    }
    oracle /= 12.0;
    EXPECT_NEAR(winkler(lo, hi, y, alpha), oracle, 1e-9 * std::max(1.0, std::abs(oracle)));
  }
}

TEST(Winkler, StandardizedAndCoverage) {
  const std::vector<double> lo{10, 10, 10, 10}, hi{20, 20, 20, 20};
  const std::vector<double> y{10, 20, 9, 21};
  EXPECT_DOUBLE_EQ(coverage(lo, hi, y), 0.5);
  EXPECT_DOUBLE_EQ(standard_winkler(30.0, y), 30.0 / 15.0);
  EXPECT_EQ(code_of([] { standard_winkler(1.0, std::vector<double>{1, -1}); }), ErrorCode::ZeroMeanActual);
}

TEST(Report, AveragesAndWeights) {
  const MonthKey s(2024, 1);
  std::map<std::string, MonthlySeries> point{{"a", MonthlySeries("a", s, std::vector<double>{110, 110})},
                                              {"b", MonthlySeries("b", s, std::vector<double>{1000, 1000})}};
  std::map<std::string, MonthlySeries> actual{{"a", MonthlySeries("a", s, std::vector<double>{100, 100})},
                                               {"b", MonthlySeries("b", s, std::vector<double>{1000, 800})}};
  std::vector<double> ins;
  for (int t = 0; t < 24; ++t) ins.push_back(t < 12 ? 100.0 : 110.0);
  std::map<std::string, MonthlySeries> insample{{"a", MonthlySeries("a", s - 24, ins)},
                                                 {"b", MonthlySeries("b", s - 24, ins)}};
  ReportOptions opt{s, s + 1, 12, 0.2};
  const auto r = report(point, {}, actual, insample, opt);
  ASSERT_EQ(r.point.size(), 2u);
  EXPECT_NEAR(r.point[0].mape, 0.1, 1e-12);
  EXPECT_NEAR(r.point[1].mape, 0.125, 1e-12);
  EXPECT_NEAR(r.point_average.mape, 0.1125, 1e-12);
  EXPECT_NEAR(r.point_weighted_average.mape, (100.0 * 0.1 + 900.0 * 0.125) / 1000.0, 1e-12);
  EXPECT_FALSE(r.interval_average.has_value());
  std::ostringstream csv;
  write_point_metrics(csv, r);
  EXPECT_NE(csv.str().find("Weighted Average"), std::string::npos);

  auto short_actual = actual;
  short_actual.at("a") = MonthlySeries("a", s, std::vector<double>{100});
  EXPECT_EQ(code_of([&] { report(point, {}, short_actual, insample, opt); }), ErrorCode::NoOverlap);
}

TEST(Properties, WinklerAtLeastWidth) {
  Rng rng(47);
  for (int c = 0; c < 500; ++c) {
    std::vector<double> lo, hi, y;
    double width = 0.0;
    bool inside = true;
    for (int i = 0; i < 8; ++i) {
      lo.push_back(rng.uniform(0.0, 100.0));
      hi.push_back(lo.back() + rng.uniform(0.0, 40.0));
      y.push_back(rng.uniform() < 0.7 ? rng.uniform(lo.back(), hi.back()) : rng.uniform(-50.0, 200.0));
      width += (hi.back() - lo.back()) / 8.0;
      inside &= lo.back() <= y.back() && y.back() <= hi.back();
    }
    const double w = winkler(lo, hi, y, 0.2);
    EXPECT_GE(w, width * (1.0 - 1e-12));
    if (inside) {
      EXPECT_NEAR(w, width, 1e-12 * width);
    } else {
      EXPECT_GT(w, width);
    }
  }
}

TEST(Properties, MaseIsScaleInvariant) {
  Rng rng(48);
  std::vector<double> f, a, ins;
  for (int t = 0; t < 12; ++t) {
    f.push_back(rng.uniform(50.0, 150.0));
    a.push_back(rng.uniform(50.0, 150.0));
  }
  for (int t = 0; t < 60; ++t) ins.push_back(rng.uniform(50.0, 150.0));
  const double base = mase(f, a, ins, 12);
  for (double lambda : {1e-3, 3.7, 1e6}) {
    std::vector<double> f2, a2, i2;
    for (double v : f) f2.push_back(v * lambda);
    for (double v : a) a2.push_back(v * lambda);
    for (double v : ins) i2.push_back(v * lambda);
    EXPECT_NEAR(mase(f2, a2, i2, 12), base, 1e-12 * base);
  }
}

TEST(Properties, CoverageInvariantUnderMonotoneTransform) {
  Rng rng(49);
  std::vector<double> lo, hi, y, tlo, thi, ty;
  auto g = [](double v) { return std::exp(0.01 * v) + v * v * v; };
  for (int i = 0; i < 200; ++i) {
    lo.push_back(rng.uniform(0.0, 100.0));
    hi.push_back(lo.back() + rng.uniform(0.0, 30.0));
    y.push_back(rng.uniform(-10.0, 140.0));
    tlo.push_back(g(lo.back()));
    thi.push_back(g(hi.back()));
    ty.push_back(g(y.back()));
  }
  EXPECT_EQ(coverage(lo, hi, y), coverage(tlo, thi, ty));
}

}  // namespace
}  // namespace rise::eval
