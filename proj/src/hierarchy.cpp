#include "rise/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "rise/csv.hpp"
#include "rise/error.hpp"

namespace rise {

std::vector<std::string> Hierarchy::leaves() const {
  return {nodes.begin() + static_cast<std::ptrdiff_t>(aggregate_count()), nodes.end()};
}

std::size_t Hierarchy::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i] == name) return i;
  }
  return nodes.size();
}

Hierarchy build_summing_matrix(const std::vector<Region>& regions, const std::string& root) {
  if (regions.empty()) throw Error(ErrorCode::MalformedTree, "hierarchy has no regions");
  std::set<std::string> names{root};
  std::vector<std::string> leaves;
  std::vector<std::size_t> leaf_region;
  for (std::size_t r = 0; r < regions.size(); ++r) {
    const auto& region = regions[r];
    if (region.name.empty() || !names.insert(region.name).second) {
      throw Error(ErrorCode::MalformedTree, "duplicate or empty region name '" + region.name + "'");
    }
    if (region.destinations.empty()) {
      throw Error(ErrorCode::MalformedTree, "region '" + region.name + "' has no destinations");
    }
  }
  for (std::size_t r = 0; r < regions.size(); ++r) {
    for (const auto& leaf : regions[r].destinations) {
      if (leaf.empty() || !names.insert(leaf).second) {
        throw Error(ErrorCode::MalformedTree,
                    "destination '" + leaf + "' is empty, repeated, or clashes with a region name");
      }
      leaves.push_back(leaf);
      leaf_region.push_back(r);
    }
  }
  const auto m = static_cast<Eigen::Index>(leaves.size());

  Hierarchy h;
  std::vector<Eigen::RowVectorXd> rows;
  h.nodes.push_back(root);
  h.parent.push_back(-1);
  rows.push_back(Eigen::RowVectorXd::Ones(m));
  std::vector<int> region_node(regions.size(), 0);
  for (std::size_t r = 0; r < regions.size(); ++r) {
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(m);
    for (Eigen::Index j = 0; j < m; ++j) {
      if (leaf_region[static_cast<std::size_t>(j)] == r) row[j] = 1.0;
    }
    bool duplicate = false;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      if (rows[k] == row) {
        region_node[r] = static_cast<int>(k);
        duplicate = true;
        break;
      }
    }
    if (duplicate) continue;
    region_node[r] = static_cast<int>(h.nodes.size());
    h.nodes.push_back(regions[r].name);
    h.parent.push_back(0);
    rows.push_back(row);
  }
  for (Eigen::Index j = 0; j < m; ++j) {
    h.nodes.push_back(leaves[static_cast<std::size_t>(j)]);
    h.parent.push_back(region_node[leaf_region[static_cast<std::size_t>(j)]]);
  }
  const auto aggregates = static_cast<Eigen::Index>(rows.size());
  h.S = Eigen::MatrixXd::Zero(aggregates + m, m);
  for (Eigen::Index i = 0; i < aggregates; ++i) h.S.row(i) = rows[static_cast<std::size_t>(i)];
  h.S.bottomRows(m) = Eigen::MatrixXd::Identity(m, m);
  return h;
}

Eigen::MatrixXd top_down_G(std::span<const double> proportions, std::size_t nodes) {
  double sum = 0.0;
  for (double p : proportions) {
    if (!(p >= 0.0)) throw Error(ErrorCode::BadProportions, "top-down proportions must be non-negative");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw Error(ErrorCode::BadProportions, "top-down proportions sum to " + csv::format_number(sum));
  }
  const auto m = static_cast<Eigen::Index>(proportions.size());
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(m, static_cast<Eigen::Index>(nodes));
  for (Eigen::Index i = 0; i < m; ++i) G(i, 0) = proportions[static_cast<std::size_t>(i)];
  return G;
}

Eigen::MatrixXd mint_G(const Hierarchy& hierarchy, const Eigen::MatrixXd& W) {
  const auto n = static_cast<Eigen::Index>(hierarchy.size());
  if (W.rows() != n || W.cols() != n) {
    throw Error(ErrorCode::ShapeMismatch, "W must be " + std::to_string(n) + "x" + std::to_string(n));
  }
  if (!W.allFinite()) throw Error(ErrorCode::SingularW, "W has non-finite entries");
  const auto w_qr = W.colPivHouseholderQr();
  if (w_qr.rank() < n) throw Error(ErrorCode::SingularW, "W is rank deficient");
  const Eigen::MatrixXd WinvS = w_qr.solve(hierarchy.S);
  const Eigen::MatrixXd M = hierarchy.S.transpose() * WinvS;
  const auto m_qr = M.colPivHouseholderQr();
  if (m_qr.rank() < M.rows()) throw Error(ErrorCode::SingularW, "S' W^-1 S is rank deficient");
  return m_qr.solve(WinvS.transpose());
}

Eigen::MatrixXd wls_G(const Hierarchy& hierarchy, const Eigen::VectorXd& variances) {
  for (Eigen::Index i = 0; i < variances.size(); ++i) {
    if (!(variances[i] > 0.0)) throw Error(ErrorCode::SingularW, "WLS variances must be positive");
  }
  return mint_G(hierarchy, Eigen::MatrixXd(variances.asDiagonal()));
}

Eigen::MatrixXd reconcile(const Hierarchy& hierarchy, const Eigen::MatrixXd& G, const Eigen::MatrixXd& base) {
  const auto n = static_cast<Eigen::Index>(hierarchy.size());
  const auto m = static_cast<Eigen::Index>(hierarchy.bottom_count());
  if (G.rows() != m || G.cols() != n || base.rows() != n) {
    throw Error(ErrorCode::ShapeMismatch, "reconcile expects G " + std::to_string(m) + "x" + std::to_string(n) +
                                              " and base forecasts with " + std::to_string(n) + " rows");
  }
  return hierarchy.S * (G * base);
}

Eigen::MatrixXd reconcile_top_down(const Hierarchy& hierarchy, std::span<const double> top,
                                   const Eigen::MatrixXd& proportions) {
  const auto m = static_cast<Eigen::Index>(hierarchy.bottom_count());
  const auto h = static_cast<Eigen::Index>(top.size());
  if (proportions.rows() != m || proportions.cols() != h) {
    throw Error(ErrorCode::ShapeMismatch, "proportions must be leaves x horizon");
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(hierarchy.size()), h);
  for (Eigen::Index k = 0; k < h; ++k) {
    const Eigen::VectorXd p = proportions.col(k);
    const Eigen::MatrixXd G = top_down_G(std::span<const double>(p.data(), static_cast<std::size_t>(m)), hierarchy.size());
    Eigen::VectorXd base = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(hierarchy.size()));
    base[0] = top[static_cast<std::size_t>(k)];
    out.col(k) = hierarchy.S * (G * base);
  }
  return out;
}

namespace {

Eigen::VectorXd normalized_shares(const Eigen::VectorXd& v) {
  const double total = v.sum();
  if (!(total > 0.0)) return Eigen::VectorXd::Constant(v.size(), 1.0 / static_cast<double>(v.size()));
  Eigen::VectorXd p = v / total;
  // Re-normalize so the sum is 1 to the last bit the check cares about.
  p /= p.sum();
  return p;
}

}  // namespace

Eigen::MatrixXd forecast_proportions(const Eigen::MatrixXd& leaf_forecasts) {
  Eigen::MatrixXd out(leaf_forecasts.rows(), leaf_forecasts.cols());
  for (Eigen::Index k = 0; k < leaf_forecasts.cols(); ++k) {
    out.col(k) = normalized_shares(leaf_forecasts.col(k).cwiseMax(0.0));
  }
  return out;
}

Eigen::VectorXd historical_proportions(const Eigen::MatrixXd& history) {
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(history.rows());
  Eigen::Index used = 0;
  for (Eigen::Index t = 0; t < history.cols(); ++t) {
    const double total = history.col(t).sum();
    if (!(total > 0.0)) continue;
    acc += history.col(t) / total;
    ++used;
  }
  if (used == 0) return normalized_shares(Eigen::VectorXd::Zero(history.rows()));
  return normalized_shares(acc / static_cast<double>(used));
}

ShrinkageEstimate shrinkage_covariance(const Eigen::MatrixXd& residuals) {
  const Eigen::Index T = residuals.rows();
  const Eigen::Index n = residuals.cols();
  if (T < 2) throw Error(ErrorCode::SingularW, "need at least two residual rows to estimate W");
  const Eigen::MatrixXd sample = residuals.transpose() * residuals / static_cast<double>(T);
  const Eigen::VectorXd sd = sample.diagonal().cwiseSqrt();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(sd[i] > 0.0)) throw Error(ErrorCode::SingularW, "a node has zero residual variance");
  }
  const Eigen::MatrixXd x = residuals * sd.cwiseInverse().asDiagonal();
  const Eigen::MatrixXd corr = x.transpose() * x / static_cast<double>(T);
  double num = 0.0;
  double den = 0.0;
  const double td = static_cast<double>(T);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const Eigen::ArrayXd w = x.col(i).array() * x.col(j).array();
      const double mean = w.mean();
      const double var = td / std::pow(td - 1.0, 3) * (w - mean).square().sum();
      num += var;
      den += corr(i, j) * corr(i, j);
    }
  }
  ShrinkageEstimate est;
  est.intensity = den > 0.0 ? std::clamp(num / den, 0.0, 1.0) : 1.0;
  est.W = (1.0 - est.intensity) * sample;
  est.W.diagonal() = sample.diagonal();
  return est;
}

void write_summing_matrix(std::ostream& out, const Hierarchy& hierarchy) {
  std::vector<std::string> header{"node"};
  for (const auto& leaf : hierarchy.leaves()) header.push_back(leaf);
  csv::write_row(out, header);
  for (std::size_t i = 0; i < hierarchy.size(); ++i) {
    std::vector<std::string> row{hierarchy.nodes[i]};
    for (Eigen::Index j = 0; j < hierarchy.S.cols(); ++j) {
      row.push_back(hierarchy.S(static_cast<Eigen::Index>(i), j) != 0.0 ? "1" : "0");
    }
    csv::write_row(out, row);
  }
}

}  // namespace rise
