#include "rise/models/boxcox.hpp"

#include <cmath>
#include <limits>

namespace rise::models {

double box_cox(double y, double lambda) {
  if (lambda == 0.0) return std::log(y);
  return (std::pow(y, lambda) - 1.0) / lambda;
}

double inverse_box_cox(double x, double lambda) {
  if (lambda == 0.0) return std::exp(x);
  const double base = lambda * x + 1.0;
  if (!(base > 0.0)) return 0.0;
  return std::pow(base, 1.0 / lambda);
}

double guerrero_lambda(std::span<const double> y, int period) {
  const auto m = static_cast<std::size_t>(period);
  const std::size_t groups = y.size() / m;
  if (groups < 2) return 1.0;
  for (double v : y) {
    if (!(v > 0.0)) return 1.0;
  }
  // Use the most recent complete periods.
  const std::size_t offset = y.size() - groups * m;
  std::vector<double> means(groups), sds(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    double mu = 0.0;
    for (std::size_t i = 0; i < m; ++i) mu += y[offset + g * m + i];
    mu /= static_cast<double>(m);
    double ss = 0.0;
    for (std::size_t i = 0; i < m; ++i) ss += (y[offset + g * m + i] - mu) * (y[offset + g * m + i] - mu);
    means[g] = mu;
    sds[g] = std::sqrt(ss / static_cast<double>(m - 1));
  }
  double best_lambda = 1.0;
  double best_cv = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 40; ++k) {
    const double lambda = k * 0.05;
    std::vector<double> ratio(groups);
    double mu = 0.0;
    for (std::size_t g = 0; g < groups; ++g) {
      ratio[g] = sds[g] / std::pow(means[g], 1.0 - lambda);
      mu += ratio[g];
    }
    mu /= static_cast<double>(groups);
    double ss = 0.0;
    for (double r : ratio) ss += (r - mu) * (r - mu);
    const double cv = std::sqrt(ss / static_cast<double>(groups - 1)) / mu;
    if (cv < best_cv - 1e-12) {
      best_cv = cv;
      best_lambda = lambda;
    }
  }
  return best_lambda;
}

}  // namespace rise::models
