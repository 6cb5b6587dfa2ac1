#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <limits>

#include "rise/combine.hpp"
#include "rise/error.hpp"
#include "rise/rng.hpp"

namespace rise {
namespace {

models::ValidationRow row(std::string id, double mase) {
  models::ValidationRow r;
  r.model_id = std::move(id);
  r.mase = mase;
  return r;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::ConfigError;
}

TEST(Screening, KeepsFourFifthsOfSeventeen) {
  std::vector<models::ValidationRow> rows;
  for (int i = 0; i < 17; ++i) rows.push_back(row("m" + std::to_string(i), 17.0 - i));
  const auto kept = screen_models(rows, 0.8);
  ASSERT_EQ(kept.size(), 13u);
  EXPECT_EQ(kept.front(), "m16");
  EXPECT_EQ(kept.back(), "m4");
}

TEST(Screening, DropsFailuresAndBreaksTiesById) {
  std::vector<models::ValidationRow> rows{row("b", 1.0), row("a", 1.0), row("c", std::nan(""))};
  rows.push_back(row("d", 0.5));
  rows.back().error = "boom";
  const auto kept = screen_models(rows, 1.0);
  EXPECT_EQ(kept, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(screen_models(std::vector<models::ValidationRow>{row("x", 2.0)}, 0.8).size(), 1u);
  EXPECT_EQ(code_of([] { screen_models(std::vector<models::ValidationRow>{}, 0.8); }), ErrorCode::EmptyTable);
}

TEST(Weights, SimpleAndErrorWeighted) {
  Eigen::MatrixXd F(2, 4);
  F << 11, 22, 33, 44, 12, 24, 36, 48;
  const std::vector<double> y{10, 20, 30, 40};
  const std::vector<std::string> ids{"a", "b"};
  const auto simple = fit_weights(ids, F, y, {CombinationMethod::Simple, 1.0, 0.8});
  EXPECT_EQ(simple.weights, (std::vector<double>{0.5, 0.5}));
  const auto ew = fit_weights(ids, F, y, {CombinationMethod::ErrorWeighted, 1.0, 0.8});
  // MAPE 0.1 and 0.2: inverse weights 10 and 5.
  EXPECT_NEAR(ew.weight("a"), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(ew.weight("b"), 1.0 / 3.0, 1e-12);
  F.row(1) = Eigen::Map<const Eigen::RowVectorXd>(y.data(), 4);
  const auto exact = fit_weights(ids, F, y, {CombinationMethod::ErrorWeighted, 1.0, 0.8});
  EXPECT_EQ(exact.weight("b"), 1.0);
  EXPECT_EQ(exact.weight("a"), 0.0);
}

TEST(Weights, SingleModelClosedForms) {
  Rng rng(1);
  Eigen::MatrixXd F(1, 24);
  std::vector<double> y(24);
  for (int t = 0; t < 24; ++t) {
    F(0, t) = rng.uniform(50.0, 150.0);
    y[static_cast<std::size_t>(t)] = 0.7 * F(0, t) + rng.normal(0.0, 5.0);
  }
  const double xx = F.row(0).squaredNorm();
  const double xy = F.row(0).dot(Eigen::Map<const Eigen::RowVectorXd>(y.data(), 24));
  for (double lambda : {0.0, 1.0, 1e3, 1e6}) {
    const auto lasso = fit_weights({"m"}, F, y, {CombinationMethod::StackLasso, lambda, 0.8});
    EXPECT_NEAR(lasso.weights[0], std::max(0.0, (xy - lambda / 2.0) / xx), 1e-12) << lambda;
    const auto ridge = fit_weights({"m"}, F, y, {CombinationMethod::StackRidge, lambda, 0.8});
    EXPECT_NEAR(ridge.weights[0], std::max(0.0, xy / (xx + lambda)), 1e-12) << lambda;
  }
}

TEST(Weights, TwoModelLassoMatchesGridSearch) {
  Rng rng(2);
  const int T = 24;
  Eigen::MatrixXd F(2, T);
  std::vector<double> y(T);
  for (int t = 0; t < T; ++t) {
    const double truth = 100.0 + 20.0 * std::sin(t * 0.5);
    y[static_cast<std::size_t>(t)] = truth;
    F(0, t) = truth + rng.normal(0.0, 6.0);
    F(1, t) = truth * 1.1 + rng.normal(0.0, 9.0);
  }
  const double lambda = 500.0;
  const auto fit = fit_weights({"a", "b"}, F, y, {CombinationMethod::StackLasso, lambda, 0.8});
  double best = std::numeric_limits<double>::infinity();
  double w0 = 0.0, w1 = 0.0;
  for (double a = 0.0; a <= 1.5; a += 0.002) {
    for (double b = 0.0; b <= 1.5; b += 0.002) {
      const std::vector<double> w{a, b};
      const double v = stacking_objective(F, y, w, CombinationMethod::StackLasso, lambda);
      if (v < best) best = v, w0 = a, w1 = b;
    }
  }
  const double cd = stacking_objective(F, y, fit.weights, CombinationMethod::StackLasso, lambda);
  EXPECT_LE(cd, best + 1e-9 * best);
  EXPECT_NEAR(fit.weights[0], w0, 0.01);
  EXPECT_NEAR(fit.weights[1], w1, 0.01);
}

TEST(Weights, LassoSatisfiesKktConditions) {
  Rng rng(3);
  const int k = 6, T = 24;
  Eigen::MatrixXd F(k, T);
  std::vector<double> y(T);
  for (int t = 0; t < T; ++t) {
    y[static_cast<std::size_t>(t)] = rng.uniform(80.0, 120.0);
    for (int j = 0; j < k; ++j) F(j, t) = y[static_cast<std::size_t>(t)] * rng.uniform(0.7, 1.3);
  }
  const double lambda = 50.0;
  std::vector<double> trace;
  const auto fit = fit_weights({"a", "b", "c", "d", "e", "f"}, F, y, {CombinationMethod::StackLasso, lambda, 0.8},
                               &trace);
  const Eigen::Map<const Eigen::VectorXd> w(fit.weights.data(), k);
  const Eigen::VectorXd r = Eigen::Map<const Eigen::VectorXd>(y.data(), T) - F.transpose() * w;
  for (int j = 0; j < k; ++j) {
    const double grad = -2.0 * F.row(j).dot(r) + lambda;
    if (w[j] > 0.0) {
      EXPECT_NEAR(grad, 0.0, 1e-4 * F.row(j).norm()) << j;
    } else {
      EXPECT_GE(grad, -1e-4 * F.row(j).norm()) << j;
    }
  }
  for (std::size_t i = 1; i < trace.size(); ++i) EXPECT_LE(trace[i], trace[i - 1] * (1.0 + 1e-12));
}

TEST(Weights, Errors) {
  Eigen::MatrixXd F = Eigen::MatrixXd::Ones(2, 3);
  const std::vector<double> y{1, 2, 3};
  F.row(1).setZero();
  EXPECT_EQ(code_of([&] { fit_weights({"a", "b"}, F, y, {}); }), ErrorCode::DegenerateDesign);
  EXPECT_EQ(code_of([&] { fit_weights({"a"}, F, y, {}); }), ErrorCode::ShapeMismatch);
  EXPECT_EQ(code_of([&] { fit_weights({"a", "b"}, Eigen::MatrixXd::Ones(2, 3), y, {CombinationMethod::StackRidge, -1.0, 0.8}); }),
            ErrorCode::ConfigError);
}

TEST(Combine, AppliesWeightsByModelId) {
  CombinationWeights w;
  w.model_ids = {"b", "a"};
  w.weights = {0.25, 0.5};
  Eigen::MatrixXd F(2, 2);
  F << 4, 8, 100, 200;
  const auto out = combine({"a", "b"}, F, w);
  EXPECT_DOUBLE_EQ(out[0], 0.5 * 4 + 0.25 * 100);
  EXPECT_DOUBLE_EQ(out[1], 0.5 * 8 + 0.25 * 200);
  EXPECT_EQ(code_of([&] { combine({"a", "c"}, F, w); }), ErrorCode::ModelSetMismatch);
}

TEST(Combine, MethodNamesRoundTrip) {
  for (auto m : {CombinationMethod::Simple, CombinationMethod::ErrorWeighted, CombinationMethod::StackLasso,
                 CombinationMethod::StackRidge}) {
    EXPECT_EQ(parse_method(method_name(m)), m);
  }
  EXPECT_FALSE(parse_method("median").has_value());
}

TEST(Properties, IdenticalForecastsCombineToThemselves) {
  Rng rng(24);
  const int T = 24, k = 4;
  std::vector<double> y(T), f(T);
  for (int t = 0; t < T; ++t) {
    f[static_cast<std::size_t>(t)] = rng.uniform(50.0, 150.0);
    y[static_cast<std::size_t>(t)] = f[static_cast<std::size_t>(t)] + rng.normal(0.0, 3.0);
  }
  Eigen::MatrixXd F(k, T);
  for (int j = 0; j < k; ++j) F.row(j) = Eigen::Map<const Eigen::RowVectorXd>(f.data(), T);
  const std::vector<std::string> ids{"a", "b", "c", "d"};
  for (auto m : {CombinationMethod::Simple, CombinationMethod::ErrorWeighted, CombinationMethod::StackLasso,
                 CombinationMethod::StackRidge}) {
    auto w = fit_weights(ids, F, y, {m, 0.0, 0.8});
    // Stacking weights need not sum to one; identical inputs combine to the
    // forecast once the weights are normalized, and simple/error-weighted are.
    double total = 0.0;
    for (double v : w.weights) total += v;
    ASSERT_GT(total, 0.0);
    if (m == CombinationMethod::Simple || m == CombinationMethod::ErrorWeighted) {
      EXPECT_NEAR(total, 1.0, 1e-12);
      const auto out = combine(ids, F, w);
      for (int t = 0; t < T; ++t) EXPECT_NEAR(out[static_cast<std::size_t>(t)], f[static_cast<std::size_t>(t)], 1e-9);
    } else {
      const auto out = combine(ids, F, w);
      for (int t = 0; t < T; ++t) {
        EXPECT_NEAR(out[static_cast<std::size_t>(t)], total * f[static_cast<std::size_t>(t)], 1e-9);
      }
    }
  }
}

TEST(Properties, UnpenalizedStackingOfExactForecastsReproducesThem) {
  const int T = 12;
  std::vector<double> f(T);
  for (int t = 0; t < T; ++t) f[static_cast<std::size_t>(t)] = 100.0 + 7.0 * t;
  Eigen::MatrixXd F(3, T);
  for (int j = 0; j < 3; ++j) F.row(j) = Eigen::Map<const Eigen::RowVectorXd>(f.data(), T);
  for (auto m : {CombinationMethod::StackLasso, CombinationMethod::StackRidge}) {
    const auto w = fit_weights({"a", "b", "c"}, F, f, {m, 0.0, 0.8});
    const auto out = combine({"a", "b", "c"}, F, w);
    for (int t = 0; t < T; ++t) EXPECT_NEAR(out[static_cast<std::size_t>(t)], f[static_cast<std::size_t>(t)], 1e-8);
  }
}

}  // namespace
}  // namespace rise
