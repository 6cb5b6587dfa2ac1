#include "rise/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace rise::optim {

Result nelder_mead(const std::function<double(const Eigen::VectorXd&)>& objective,
                   const Eigen::VectorXd& start, const NelderMeadOptions& options) {
  const Eigen::Index n = start.size();
  std::vector<Eigen::VectorXd> simplex(static_cast<std::size_t>(n + 1), start);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double step = start[i] != 0.0 ? options.initial_step * std::abs(start[i]) : options.initial_step;
    simplex[static_cast<std::size_t>(i + 1)][i] += step;
  }
  auto safe = [&](const Eigen::VectorXd& x) {
    const double v = objective(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::max();
  };
  std::vector<double> values(simplex.size());
  for (std::size_t i = 0; i < simplex.size(); ++i) values[i] = safe(simplex[i]);

  std::vector<std::size_t> order(simplex.size());
  Result result;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    result.iterations = iter + 1;
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second_worst = order[order.size() - 2];

    const double spread = std::abs(values[worst] - values[best]);
    double x_spread = 0.0;
    for (const auto& p : simplex) x_spread = std::max(x_spread, (p - simplex[best]).cwiseAbs().maxCoeff());
    if (spread <= options.f_tolerance * (std::abs(values[best]) + 1e-20) ||
        (x_spread <= options.x_tolerance && spread <= options.f_tolerance * (std::abs(values[best]) + 1.0))) {
      result.converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (std::size_t i = 0; i < simplex.size(); ++i)
      if (i != worst) centroid += simplex[i];
    centroid /= static_cast<double>(n);

    const Eigen::VectorXd reflected = centroid + (centroid - simplex[worst]);
    const double f_reflected = safe(reflected);
    if (f_reflected < values[best]) {
      const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - simplex[worst]);
      const double f_expanded = safe(expanded);
      if (f_expanded < f_reflected) {
        simplex[worst] = expanded;
        values[worst] = f_expanded;
      } else {
        simplex[worst] = reflected;
        values[worst] = f_reflected;
      }
    } else if (f_reflected < values[second_worst]) {
      simplex[worst] = reflected;
      values[worst] = f_reflected;
    } else {
      const bool outside = f_reflected < values[worst];
      const Eigen::VectorXd contracted = outside ? Eigen::VectorXd(centroid + 0.5 * (reflected - centroid))
                                                 : Eigen::VectorXd(centroid + 0.5 * (simplex[worst] - centroid));
      const double f_contracted = safe(contracted);
      if (f_contracted < std::min(f_reflected, values[worst])) {
        simplex[worst] = contracted;
        values[worst] = f_contracted;
      } else {
        for (std::size_t i = 0; i < simplex.size(); ++i) {
          if (i == best) continue;
          simplex[i] = simplex[best] + 0.5 * (simplex[i] - simplex[best]);
          values[i] = safe(simplex[i]);
        }
      }
    }
  }
  const auto best_it = std::min_element(values.begin(), values.end());
  result.x = simplex[static_cast<std::size_t>(best_it - values.begin())];
  result.value = *best_it;
  return result;
}

namespace {

Eigen::MatrixXd forward_difference(const ResidualFn& residuals, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& r0) {
  Eigen::MatrixXd jac(r0.size(), x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = 1e-7 * std::max(std::abs(x[j]), 1e-3);
    probe[j] = x[j] + h;
    jac.col(j) = (residuals(probe) - r0) / h;
    probe[j] = x[j];
  }
  return jac;
}

}  // namespace

Result levenberg_marquardt(const ResidualFn& residuals, const Eigen::VectorXd& start,
                           const LevenbergMarquardtOptions& options, const JacobianFn& jacobian) {
  Result result;
  Eigen::VectorXd x = start;
  Eigen::VectorXd r = residuals(x);
  double cost = r.squaredNorm();
  if (!std::isfinite(cost)) {
    result.x = x;
    result.value = cost;
    return result;
  }
  double lambda = options.initial_damping;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    result.iterations = iter + 1;
    const Eigen::MatrixXd jac = jacobian ? jacobian(x) : forward_difference(residuals, x, r);
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd gradient = jac.transpose() * r;
    if (gradient.cwiseAbs().maxCoeff() <= options.gradient_tolerance * (1.0 + cost)) {
      result.converged = true;
      break;
    }
    Eigen::VectorXd diag = jtj.diagonal().cwiseMax(1e-12 * (1.0 + jtj.diagonal().maxCoeff()));
    bool improved = false;
    for (int attempt = 0; attempt < 30; ++attempt) {
      Eigen::MatrixXd damped = jtj;
      damped.diagonal() += lambda * diag;
      const Eigen::VectorXd step = damped.ldlt().solve(-gradient);
      const Eigen::VectorXd candidate = x + step;
      const Eigen::VectorXd r_candidate = residuals(candidate);
      const double cost_candidate = r_candidate.squaredNorm();
      if (std::isfinite(cost_candidate) && cost_candidate < cost) {
        const double decrease = cost - cost_candidate;
        const double step_size = step.norm() / (x.norm() + 1e-12);
        x = candidate;
        r = r_candidate;
        cost = cost_candidate;
        lambda = std::max(lambda / 3.0, 1e-15);
        improved = true;
        if (decrease <= options.cost_tolerance * cost || step_size <= options.step_tolerance) {
          result.converged = true;
        }
        break;
      }
      lambda *= 4.0;
      if (lambda > 1e16) break;
    }
    if (!improved) {
      // No descent direction left at machine precision: a stationary point.
      result.converged = true;
      break;
    }
    if (result.converged) break;
  }
  result.x = x;
  result.value = cost;
  return result;
}

double golden_section(const std::function<double(double)>& f, double lo, double hi, double tolerance) {
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double c = b - ratio * (b - a);
  double d = a + ratio * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tolerance) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - ratio * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + ratio * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace rise::optim
