#include "rise/combine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rise/csv.hpp"
#include "rise/error.hpp"
#include "rise/eval.hpp"

namespace rise {
namespace {

constexpr int kMaxSweeps = 10000;
constexpr double kTolerance = 1e-10;

}  // namespace

std::string_view method_name(CombinationMethod method) {
  switch (method) {
    case CombinationMethod::Simple: return "simple";
    case CombinationMethod::ErrorWeighted: return "error_weighted";
    case CombinationMethod::StackLasso: return "stack_lasso";
    case CombinationMethod::StackRidge: return "stack_ridge";
  }
  return "unknown";
}

std::optional<CombinationMethod> parse_method(std::string_view name) {
  for (auto m : {CombinationMethod::Simple, CombinationMethod::ErrorWeighted, CombinationMethod::StackLasso,
                 CombinationMethod::StackRidge}) {
    if (method_name(m) == name) return m;
  }
  return std::nullopt;
}

double CombinationWeights::weight(const std::string& model_id) const {
  for (std::size_t i = 0; i < model_ids.size(); ++i) {
    if (model_ids[i] == model_id) return weights[i];
  }
  return 0.0;
}

std::vector<std::string> screen_models(std::span<const models::ValidationRow> table, double keep_fraction) {
  std::vector<const models::ValidationRow*> rows;
  for (const auto& row : table) {
    if (!row.error && std::isfinite(row.mase)) rows.push_back(&row);
  }
  if (rows.empty()) throw Error(ErrorCode::EmptyTable, "no model has a finite validation MASE");
  std::sort(rows.begin(), rows.end(), [](const auto* a, const auto* b) {
    if (a->mase != b->mase) return a->mase < b->mase;
    return a->model_id < b->model_id;
  });
  const auto k = static_cast<double>(rows.size());
  const auto keep = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(keep_fraction * k + 1e-9)));
  std::vector<std::string> out;
  for (std::size_t i = 0; i < std::min(keep, rows.size()); ++i) out.push_back(rows[i]->model_id);
  return out;
}

double stacking_objective(const Eigen::MatrixXd& forecasts, std::span<const double> actuals,
                          std::span<const double> weights, CombinationMethod method, double lambda) {
  const Eigen::Map<const Eigen::VectorXd> y(actuals.data(), static_cast<Eigen::Index>(actuals.size()));
  const Eigen::Map<const Eigen::VectorXd> w(weights.data(), static_cast<Eigen::Index>(weights.size()));
  const Eigen::VectorXd r = y - forecasts.transpose() * w;
  const double penalty = method == CombinationMethod::StackRidge ? w.squaredNorm() : w.cwiseAbs().sum();
  return r.squaredNorm() + lambda * penalty;
}

CombinationWeights fit_weights(const std::vector<std::string>& model_ids, const Eigen::MatrixXd& forecasts,
                               std::span<const double> actuals, const CombinationSpec& spec,
                               std::vector<double>* objective_trace) {
  const auto k = static_cast<Eigen::Index>(model_ids.size());
  const auto T = static_cast<Eigen::Index>(actuals.size());
  if (k == 0) throw Error(ErrorCode::EmptyTable, "no models to combine");
  if (forecasts.rows() != k || forecasts.cols() != T) {
    throw Error(ErrorCode::ShapeMismatch, "forecast matrix must be models x validation months");
  }
  if (!(spec.lambda >= 0.0)) throw Error(ErrorCode::ConfigError, "combination lambda must be >= 0");
  CombinationWeights out;
  out.model_ids = model_ids;
  out.weights.assign(static_cast<std::size_t>(k), 0.0);

  switch (spec.method) {
    case CombinationMethod::Simple:
      std::fill(out.weights.begin(), out.weights.end(), 1.0 / static_cast<double>(k));
      return out;
    case CombinationMethod::ErrorWeighted: {
      std::vector<double> mape(static_cast<std::size_t>(k));
      for (Eigen::Index j = 0; j < k; ++j) {
        const Eigen::VectorXd row = forecasts.row(j);
        mape[static_cast<std::size_t>(j)] =
            eval::mape(std::span<const double>(row.data(), static_cast<std::size_t>(T)), actuals).value;
      }
      const auto zeros = std::count(mape.begin(), mape.end(), 0.0);
      for (std::size_t j = 0; j < mape.size(); ++j) {
        if (zeros > 0) {
          out.weights[j] = mape[j] == 0.0 ? 1.0 : 0.0;
        } else {
          out.weights[j] = 1.0 / mape[j];
        }
      }
      const double total = std::accumulate(out.weights.begin(), out.weights.end(), 0.0);
      for (auto& w : out.weights) w /= total;
      return out;
    }
    case CombinationMethod::StackLasso:
    case CombinationMethod::StackRidge:
      break;
  }

  const Eigen::MatrixXd X = forecasts.transpose();  // T x k
  const Eigen::Map<const Eigen::VectorXd> y(actuals.data(), T);
  Eigen::VectorXd norms(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    norms[j] = X.col(j).squaredNorm();
    if (norms[j] == 0.0) {
      throw Error(ErrorCode::DegenerateDesign, "forecast column '" + model_ids[static_cast<std::size_t>(j)] +
                                                   "' is identically zero");
    }
  }
  const bool lasso = spec.method == CombinationMethod::StackLasso;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd residual = y;  // y - X w
  int sweep = 0;
  for (; sweep < kMaxSweeps; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      const double rho = X.col(j).dot(residual) + norms[j] * w[j];
      const double updated = lasso ? std::max(0.0, (rho - 0.5 * spec.lambda) / norms[j])
                                   : std::max(0.0, rho / (norms[j] + spec.lambda));
      const double change = updated - w[j];
      if (change != 0.0) {
        residual -= change * X.col(j);
        w[j] = updated;
      }
      max_change = std::max(max_change, std::abs(change));
    }
    if (objective_trace) {
      objective_trace->push_back(residual.squaredNorm() +
                                 spec.lambda * (lasso ? w.sum() : w.squaredNorm()));
    }
    if (max_change < kTolerance) {
      ++sweep;
      break;
    }
  }
  out.sweeps = sweep;
  for (Eigen::Index j = 0; j < k; ++j) out.weights[static_cast<std::size_t>(j)] = w[j];
  return out;
}

std::vector<double> combine(const std::vector<std::string>& model_ids, const Eigen::MatrixXd& forecasts,
                            const CombinationWeights& weights) {
  auto sorted_a = model_ids;
  auto sorted_b = weights.model_ids;
  std::sort(sorted_a.begin(), sorted_a.end());
  std::sort(sorted_b.begin(), sorted_b.end());
  if (sorted_a != sorted_b || forecasts.rows() != static_cast<Eigen::Index>(model_ids.size())) {
    throw Error(ErrorCode::ModelSetMismatch, "forecast models do not match the fitted weights");
  }
  Eigen::VectorXd w(static_cast<Eigen::Index>(model_ids.size()));
  for (std::size_t i = 0; i < model_ids.size(); ++i) w[static_cast<Eigen::Index>(i)] = weights.weight(model_ids[i]);
  const Eigen::VectorXd combined = forecasts.transpose() * w;
  return {combined.data(), combined.data() + combined.size()};
}

void write_weights_header(std::ostream& out) { out << "destination,model_id,weight\n"; }

void write_weights(std::ostream& out, const std::string& destination, const CombinationWeights& weights) {
  for (std::size_t i = 0; i < weights.model_ids.size(); ++i) {
    csv::write_row(out, {destination, weights.model_ids[i], csv::format_number(weights.weights[i])});
  }
}

}  // namespace rise
