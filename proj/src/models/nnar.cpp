#include "rise/models/nnar.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "rise/error.hpp"
#include "rise/rng.hpp"

namespace rise::models {
namespace {

struct Network {
  Eigen::MatrixXd w1;  // inputs x hidden
  Eigen::RowVectorXd b1;
  Eigen::VectorXd w2;  // hidden
  double b2 = 0.0;

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const {
    const Eigen::MatrixXd hidden = ((x * w1).rowwise() + b1).array().tanh().matrix();
    return (hidden * w2).array() + b2;
  }
};

Network train(const Eigen::MatrixXd& x, const Eigen::VectorXd& target, int size, int epochs, double rate,
              Rng& rng) {
  const Eigen::Index inputs = x.cols();
  const auto n = static_cast<double>(x.rows());
  Network net;
  net.w1.resize(inputs, size);
  net.b1.resize(size);
  net.w2.resize(size);
  for (Eigen::Index i = 0; i < inputs; ++i)
    for (int j = 0; j < size; ++j) net.w1(i, j) = rng.uniform(-0.5, 0.5);
  for (int j = 0; j < size; ++j) net.b1[j] = rng.uniform(-0.5, 0.5);
  for (int j = 0; j < size; ++j) net.w2[j] = rng.uniform(-0.5, 0.5);
  net.b2 = rng.uniform(-0.5, 0.5);

  for (int epoch = 0; epoch < epochs; ++epoch) {
    const Eigen::MatrixXd hidden = ((x * net.w1).rowwise() + net.b1).array().tanh().matrix();
    const Eigen::VectorXd err = ((hidden * net.w2).array() + net.b2).matrix() - target;
    // Gradient of the mean squared error.
    const Eigen::VectorXd d_out = (2.0 / n) * err;
    const Eigen::VectorXd g_w2 = hidden.transpose() * d_out;
    const double g_b2 = d_out.sum();
    const Eigen::MatrixXd d_hidden =
        ((d_out * net.w2.transpose()).array() * (1.0 - hidden.array().square())).matrix();
    const Eigen::MatrixXd g_w1 = x.transpose() * d_hidden;
    const Eigen::RowVectorXd g_b1 = d_hidden.colwise().sum();
    net.w2 -= rate * g_w2;
    net.b2 -= rate * g_b2;
    net.w1 -= rate * g_w1;
    net.b1 -= rate * g_b1;
  }
  return net;
}

}  // namespace

NnarForecast nnar_forecast(std::span<const double> y, const NnarOptions& options, int horizon) {
  std::set<int> lag_set;
  for (int i = 1; i <= options.p; ++i) lag_set.insert(i);
  for (int i = 1; i <= options.seasonal_p; ++i) lag_set.insert(12 * i);
  const std::vector<int> lags(lag_set.begin(), lag_set.end());
  const int max_lag = lags.empty() ? 0 : lags.back();
  const auto n = static_cast<int>(y.size());
  if (lags.empty() || n - max_lag < static_cast<int>(lags.size()) + 2) {
    throw Error(ErrorCode::SeriesTooShort,
                "nnar needs more than " + std::to_string(max_lag + lags.size() + 1) + " observations");
  }

  double mu = 0.0;
  for (double v : y) mu += v;
  mu /= n;
  double sd = 0.0;
  for (double v : y) sd += (v - mu) * (v - mu);
  sd = std::sqrt(sd / (n - 1));
  if (!(sd > 0.0)) sd = 1.0;
  std::vector<double> z(y.size());
  for (int t = 0; t < n; ++t) z[static_cast<std::size_t>(t)] = (y[static_cast<std::size_t>(t)] - mu) / sd;

  const int rows = n - max_lag;
  const auto cols = static_cast<Eigen::Index>(lags.size());
  Eigen::MatrixXd x(rows, cols);
  Eigen::VectorXd target(rows);
  for (int r = 0; r < rows; ++r) {
    const int t = max_lag + r;
    for (Eigen::Index c = 0; c < cols; ++c) x(r, c) = z[static_cast<std::size_t>(t - lags[static_cast<std::size_t>(c)])];
    target[r] = z[static_cast<std::size_t>(t)];
  }

  std::vector<Network> nets;
  nets.reserve(static_cast<std::size_t>(options.repeats));
  for (int rep = 0; rep < options.repeats; ++rep) {
    Rng rng = Rng::substream(options.seed, "nnar/" + std::to_string(rep));
    nets.push_back(train(x, target, options.size, options.epochs, options.learning_rate, rng));
  }
  auto average = [&](const Eigen::MatrixXd& input) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(input.rows());
    for (const auto& net : nets) acc += net.predict(input);
    return Eigen::VectorXd(acc / static_cast<double>(nets.size()));
  };

  NnarForecast out;
  const Eigen::VectorXd fitted = average(x);
  for (int r = 0; r < rows; ++r) out.residuals.push_back((target[r] - fitted[r]) * sd);

  std::vector<double> path = z;
  Eigen::MatrixXd row(1, cols);
  for (int h = 0; h < horizon; ++h) {
    const int t = n + h;
    for (Eigen::Index c = 0; c < cols; ++c) row(0, c) = path[static_cast<std::size_t>(t - lags[static_cast<std::size_t>(c)])];
    const double next = average(row)[0];
    path.push_back(next);
    out.mean.push_back(mu + sd * next);
  }
  return out;
}

}  // namespace rise::models
