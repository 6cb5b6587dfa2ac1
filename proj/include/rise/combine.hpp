#pragma once

#include <Eigen/Dense>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "rise/models/forecast.hpp"

namespace rise {

enum class CombinationMethod { Simple, ErrorWeighted, StackLasso, StackRidge };

std::string_view method_name(CombinationMethod method);
std::optional<CombinationMethod> parse_method(std::string_view name);

struct CombinationSpec {
  CombinationMethod method = CombinationMethod::StackLasso;
  double lambda = 1.0;
  double keep_fraction = 0.8;
};

struct CombinationWeights {
  std::vector<std::string> model_ids;
  std::vector<double> weights;  // aligned with model_ids, all >= 0
  int sweeps = 0;               // coordinate-descent sweeps (stacking only)

  double weight(const std::string& model_id) const;
};

/// Keeps the max(1, floor(keep_fraction * k)) models with the lowest
/// validation MASE, ties broken by model id. Rows with non-finite MASE are
/// dropped first. Throws EmptyTable.
std::vector<std::string> screen_models(std::span<const models::ValidationRow> table, double keep_fraction = 0.8);

/// `forecasts` is models x T over the validation window. Stacking minimizes
///   sum_t (y_t - sum_j w_j f_jt)^2 + lambda * penalty(w)   subject to w >= 0
/// with no intercept, by cyclic coordinate descent. Throws DegenerateDesign
/// for an all-zero column, ShapeMismatch on inconsistent sizes.
CombinationWeights fit_weights(const std::vector<std::string>& model_ids, const Eigen::MatrixXd& forecasts,
                               std::span<const double> actuals, const CombinationSpec& spec,
                               std::vector<double>* objective_trace = nullptr);

/// Stacking objective for given weights (exposed for tests).
double stacking_objective(const Eigen::MatrixXd& forecasts, std::span<const double> actuals,
                          std::span<const double> weights, CombinationMethod method, double lambda);

/// weights' * forecasts. `forecasts` rows follow `model_ids`. Throws
/// ModelSetMismatch unless the model sets agree.
std::vector<double> combine(const std::vector<std::string>& model_ids, const Eigen::MatrixXd& forecasts,
                            const CombinationWeights& weights);

void write_weights_header(std::ostream& out);
void write_weights(std::ostream& out, const std::string& destination, const CombinationWeights& weights);

}  // namespace rise
