#pragma once

#include <Eigen/Dense>
#include <functional>

namespace rise::optim {

struct Result {
  Eigen::VectorXd x;
  double value = 0.0;  // objective (Nelder-Mead) or sum of squares (LM)
  int iterations = 0;
  bool converged = false;
};

struct NelderMeadOptions {
  int max_iterations = 2000;
  double f_tolerance = 1e-10;  // relative spread of simplex values
  double x_tolerance = 1e-8;
  double initial_step = 0.1;
};

Result nelder_mead(const std::function<double(const Eigen::VectorXd&)>& objective,
                   const Eigen::VectorXd& start, const NelderMeadOptions& options = {});

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using JacobianFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

struct LevenbergMarquardtOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-12;
  double step_tolerance = 1e-12;  // relative
  double cost_tolerance = 1e-15;  // relative decrease
  double initial_damping = 1e-3;
};

/// Minimizes ||r(x)||^2 with Marquardt-scaled damping. Uses forward
/// differences when no Jacobian is supplied.
Result levenberg_marquardt(const ResidualFn& residuals, const Eigen::VectorXd& start,
                           const LevenbergMarquardtOptions& options = {},
                           const JacobianFn& jacobian = nullptr);

/// Golden-section search for a unimodal function on [lo, hi].
double golden_section(const std::function<double(double)>& f, double lo, double hi,
                      double tolerance = 1e-8);

}  // namespace rise::optim
