#pragma once

#include <Eigen/Dense>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace rise {

struct Region {
  std::string name;
  std::vector<std::string> destinations;
};

/// Two-level geographic tree: a root, regions, and destination leaves.
struct Hierarchy {
  std::vector<std::string> nodes;  // aggregates first (root at 0), then leaves
  std::vector<int> parent;         // -1 for the root
  Eigen::MatrixXd S;               // nodes x leaves, entries 0/1, identity bottom block

  std::size_t size() const { return nodes.size(); }
  std::size_t bottom_count() const { return static_cast<std::size_t>(S.cols()); }
  std::size_t aggregate_count() const { return size() - bottom_count(); }
  std::vector<std::string> leaves() const;
  /// Position of a node name, or size() when absent.
  std::size_t index_of(const std::string& name) const;
};

/// Builds S for the given regions. An aggregate row identical to an earlier
/// aggregate row (a region holding every leaf) is dropped; single-leaf
/// regions are kept. Throws MalformedTree on empty or duplicate names, empty
/// regions, or a leaf assigned to more than one region.
Hierarchy build_summing_matrix(const std::vector<Region>& regions, const std::string& root = "Total");

/// m x n matrix distributing the root forecast by `proportions`.
/// Throws BadProportions unless p >= 0 and sum p = 1 within 1e-12.
Eigen::MatrixXd top_down_G(std::span<const double> proportions, std::size_t nodes);

/// G = (S' W^-1 S)^-1 S' W^-1. Throws SingularW when W or S' W^-1 S is
/// rank deficient.
Eigen::MatrixXd mint_G(const Hierarchy& hierarchy, const Eigen::MatrixXd& W);

/// Weighted least squares: mint_G with W = diag(variances).
Eigen::MatrixXd wls_G(const Hierarchy& hierarchy, const Eigen::VectorXd& variances);

/// S * G * base for an n x h matrix of base forecasts. Throws ShapeMismatch.
Eigen::MatrixXd reconcile(const Hierarchy& hierarchy, const Eigen::MatrixXd& G, const Eigen::MatrixXd& base);

/// Top-down with a separate proportion vector per horizon step: `proportions`
/// is m x h, `top` has length h. Returns the coherent n x h matrix.
Eigen::MatrixXd reconcile_top_down(const Hierarchy& hierarchy, std::span<const double> top,
                                   const Eigen::MatrixXd& proportions);

/// Per-step shares of each leaf's own forecast (m x h). All-zero steps fall
/// back to equal shares.
Eigen::MatrixXd forecast_proportions(const Eigen::MatrixXd& leaf_forecasts);

/// Mean over the history of each leaf's share of the total (length m).
/// `history` is m x T.
Eigen::VectorXd historical_proportions(const Eigen::MatrixXd& history);

struct ShrinkageEstimate {
  Eigen::MatrixXd W;
  double intensity = 0.0;  // weight on the diagonal target
};

/// Covariance of one-step residuals (T x n, mean assumed zero) shrunk toward
/// its diagonal with the Schafer-Strimmer intensity for correlations.
ShrinkageEstimate shrinkage_covariance(const Eigen::MatrixXd& residuals);

/// Rows "node,<leaf>..." with the 0/1 entries of S.
void write_summing_matrix(std::ostream& out, const Hierarchy& hierarchy);

}  // namespace rise
