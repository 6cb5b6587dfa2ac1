#include "rise/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "rise/combine.hpp"
#include "rise/csv.hpp"
#include "rise/error.hpp"
#include "rise/eval.hpp"
#include "rise/hierarchy.hpp"
#include "rise/impute.hpp"
#include "rise/io.hpp"
#include "rise/recovery.hpp"
#include "rise/rng.hpp"
#include "rise/signals.hpp"

namespace rise::pipeline {
namespace fs = std::filesystem;

namespace {

constexpr const char* kImputed = "arrivals_imputed.csv";
constexpr const char* kValidation = "validation_metrics.csv";
constexpr const char* kValidationSummary = "validation_summary.csv";
constexpr const char* kWeights = "combination_weights.csv";
constexpr const char* kBase = "base_forecasts.csv";
constexpr const char* kSumming = "hierarchy_S.csv";
constexpr const char* kReference = "reference_forecasts.csv";
constexpr const char* kCoefficients = "coefficients.csv";
constexpr const char* kCurves = "recovery_curves.csv";
constexpr const char* kPoint = "point_forecasts.csv";
constexpr const char* kInterval = "interval_forecasts.csv";
constexpr const char* kPointMetrics = "point_metrics.csv";
constexpr const char* kIntervalMetrics = "interval_metrics.csv";
constexpr const char* kBenchmark = "benchmark.csv";
constexpr const char* kSummary = "summary.md";
constexpr const char* kManifest = "manifest.json";
constexpr const char* kCombined = "combined";

using models::FitOutcome;
using models::ForecastResult;

// Runs fn(i) for i in [0, n) on a small pool. The first failure in index
// order is rethrown after every worker has finished.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads) : std::thread::hardware_concurrency();
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::SchemaError, "cannot write " + path.string());
  return out;
}

std::string year_of(MonthKey m) { return std::to_string(m.year()); }
std::string month_of(MonthKey m) { return std::to_string(m.month()); }

std::vector<std::string> sorted_destinations(const PipelineConfig& config) {
  auto out = config.destinations();
  std::sort(out.begin(), out.end());
  return out;
}

const MonthlySeries& series_for(const std::map<std::string, MonthlySeries>& map, const std::string& destination,
                                Stage stage, const std::string& what) {
  const auto it = map.find(destination);
  if (it == map.end()) throw StageError(stage, destination, "no " + what + " for this destination");
  return it->second;
}

fs::path upstream(const fs::path& out, const char* name, Stage stage) {
  const auto path = out / name;
  if (!fs::exists(path)) {
    throw StageError(stage, "", std::string(name) + " is missing; run the upstream stage first");
  }
  return path;
}

std::string error_text(const std::exception& e) { return e.what(); }

// ---------------------------------------------------------------- base stage

struct NodeFits {
  // Per node: forecast for the phase, or the error message.
  std::vector<std::optional<ForecastResult>> fits;
  std::vector<std::string> errors;
};

struct Phase {
  std::string name;
  MonthKey end;  // last training month
  int horizon = 0;
};

struct DestinationModels {
  // Aligned with model_ids: univariate specs first, then hierarchical ones.
  std::vector<FitOutcome> validation;
  std::vector<FitOutcome> final;
};

Eigen::MatrixXd leaf_history(const std::vector<MonthlySeries>& leaves, MonthKey from, MonthKey to) {
  const auto T = static_cast<Eigen::Index>((to - from) + 1);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(leaves.size()), T);
  for (std::size_t j = 0; j < leaves.size(); ++j) {
    for (Eigen::Index t = 0; t < T; ++t) out(static_cast<Eigen::Index>(j), t) = *leaves[j].at(from + static_cast<int>(t));
  }
  return out;
}

// Trailing block of one-step residuals shared by every node, skipping the
// zero-filled conditioning prefix some families leave.
Eigen::MatrixXd residual_matrix(const std::vector<std::optional<ForecastResult>>& fits) {
  std::size_t common = std::numeric_limits<std::size_t>::max();
  for (const auto& f : fits) {
    const auto& r = f->residuals;
    std::size_t first = 0;
    while (first < r.size() && r[first] == 0.0) ++first;
    common = std::min(common, r.size() - first);
  }
  if (common == std::numeric_limits<std::size_t>::max() || common < 2) {
    throw Error(ErrorCode::SingularW, "not enough one-step residuals to estimate W");
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(common), static_cast<Eigen::Index>(fits.size()));
  for (std::size_t i = 0; i < fits.size(); ++i) {
    const auto& r = fits[i]->residuals;
    for (std::size_t t = 0; t < common; ++t) {
      out(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) = r[r.size() - common + t];
    }
  }
  return out;
}

std::vector<ForecastResult> reconcile_phase(const Hierarchy& h, const HierarchicalSpec& spec, const NodeFits& nodes,
                                            const std::vector<MonthlySeries>& leaves, MonthKey history_start,
                                            const Phase& phase) {
  for (std::size_t i = 0; i < nodes.fits.size(); ++i) {
    if (!nodes.fits[i]) throw Error(ErrorCode::NonConvergence, "base fit for node '" + h.nodes[i] + "' failed: " + nodes.errors[i]);
  }
  const auto n = static_cast<Eigen::Index>(h.size());
  const auto m = static_cast<Eigen::Index>(h.bottom_count());
  const auto H = static_cast<Eigen::Index>(phase.horizon);
  Eigen::MatrixXd base(n, H);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& mean = nodes.fits[static_cast<std::size_t>(i)]->mean;
    for (Eigen::Index k = 0; k < H; ++k) base(i, k) = mean[static_cast<std::size_t>(k)];
  }
  Eigen::MatrixXd reconciled;
  switch (spec.method) {
    case ReconciliationMethod::TopDownForecast: {
      const Eigen::MatrixXd props = forecast_proportions(base.bottomRows(m));
      const Eigen::VectorXd top = base.row(0).transpose();
      reconciled = reconcile_top_down(h, std::span<const double>(top.data(), static_cast<std::size_t>(H)), props);
      break;
    }
    case ReconciliationMethod::TopDownHistory: {
      const Eigen::VectorXd p = historical_proportions(leaf_history(leaves, history_start, phase.end));
      const Eigen::MatrixXd props = p.replicate(1, H);
      const Eigen::VectorXd top = base.row(0).transpose();
      reconciled = reconcile_top_down(h, std::span<const double>(top.data(), static_cast<std::size_t>(H)), props);
      break;
    }
    case ReconciliationMethod::Mint: {
      const auto W = shrinkage_covariance(residual_matrix(nodes.fits)).W;
      reconciled = reconcile(h, mint_G(h, W), base);
      break;
    }
    case ReconciliationMethod::Wls: {
      const Eigen::MatrixXd res = residual_matrix(nodes.fits);
      const Eigen::VectorXd variances = res.colwise().squaredNorm().transpose() / static_cast<double>(res.rows());
      reconciled = reconcile(h, wls_G(h, variances), base);
      break;
    }
  }
  std::vector<ForecastResult> out;
  const auto aggregates = static_cast<Eigen::Index>(h.aggregate_count());
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto& leaf_base = *nodes.fits[static_cast<std::size_t>(aggregates + j)];
    ForecastResult r;
    r.origin = phase.end;
    r.horizon = phase.horizon;
    r.model_id = spec.id;
    r.mean.resize(static_cast<std::size_t>(H));
    for (Eigen::Index k = 0; k < H; ++k) r.mean[static_cast<std::size_t>(k)] = std::max(0.0, reconciled(aggregates + j, k));
    if (leaf_base.has_bounds()) {
      std::vector<double> lo(r.mean.size()), hi(r.mean.size());
      for (std::size_t k = 0; k < r.mean.size(); ++k) {
        const double below = leaf_base.mean[k] - (*leaf_base.lower80)[k];
        const double above = (*leaf_base.upper80)[k] - leaf_base.mean[k];
        lo[k] = std::max(0.0, r.mean[k] - below);
        hi[k] = std::max(lo[k], r.mean[k] + above);
      }
      r.lower80 = std::move(lo);
      r.upper80 = std::move(hi);
    }
    out.push_back(std::move(r));
  }
  return out;
}

struct BaseOutcome {
  std::vector<models::ValidationRow> rows;  // individual models then combination methods
  std::vector<std::string> kinds;
  CombinationWeights weights;
  std::vector<double> combined;
  std::vector<std::string> warnings;
};

models::ValidationRow failed_row(const std::string& id, const std::string& message) {
  models::ValidationRow row;
  row.model_id = id;
  row.rmse = row.mape = row.mase = std::numeric_limits<double>::quiet_NaN();
  row.error = message;
  return row;
}

Eigen::MatrixXd forecast_matrix(const std::vector<std::string>& ids, const std::vector<std::string>& model_ids,
                                const std::vector<FitOutcome>& outcomes, int horizon) {
  Eigen::MatrixXd F(static_cast<Eigen::Index>(ids.size()), horizon);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const auto pos = static_cast<std::size_t>(std::find(model_ids.begin(), model_ids.end(), ids[r]) - model_ids.begin());
    const auto& fit = std::get<ForecastResult>(outcomes[pos]);
    for (int k = 0; k < horizon; ++k) F(static_cast<Eigen::Index>(r), k) = fit.mean[static_cast<std::size_t>(k)];
  }
  return F;
}

StageRecord run_base(const PipelineConfig& cfg, const fs::path& out) {
  StageRecord record{Stage::Base, 0.0, {}, {}};
  const auto observed = load_arrivals(cfg.data.arrivals);
  const Hierarchy h = build_summing_matrix(cfg.regions, cfg.root);
  const auto leaves = h.leaves();
  const auto m = leaves.size();

  std::map<std::string, MonthlySeries> imputed;
  std::vector<MonthlySeries> histories;  // pre-break, leaf order
  MonthKey common_start = MonthKey::from_index(std::numeric_limits<int>::min());
  for (const auto& leaf : leaves) {
    const auto& series = series_for(observed, leaf, Stage::Base, "arrivals");
    if (series.end() < cfg.split.validation_end || !(series.start() < cfg.split.train_end)) {
      throw StageError(Stage::Base, leaf, "arrivals do not cover the training and validation window");
    }
    MonthlySeries filled = series;
    try {
      filled = impute(series);
    } catch (const Error& e) {
      throw StageError(Stage::Base, leaf, error_text(e));
    }
    if (!series.complete()) {
      record.warnings.push_back(leaf + ": imputed " + std::to_string(series.size() - series.present_count()) +
                                " missing month(s)");
    }
    histories.push_back(filled.slice(filled.start(), cfg.split.validation_end));
    common_start = std::max(common_start, filled.start());
    imputed.emplace(leaf, std::move(filled));
  }

  const Phase validation_phase{"validation", cfg.split.train_end, cfg.split.validation_end - cfg.split.train_end};
  const Phase final_phase{"final", cfg.split.validation_end, cfg.base_horizon_end - cfg.split.validation_end};
  const std::array<Phase, 2> phases{validation_phase, final_phase};

  std::vector<std::string> model_ids;
  for (const auto& s : cfg.models) model_ids.push_back(s.model_id());
  for (const auto& s : cfg.hierarchical) model_ids.push_back(s.id);

  // Univariate fits, one work item per leaf.
  std::vector<DestinationModels> fits(m);
  parallel_for(m, cfg.threads, [&](std::size_t j) {
    for (std::size_t p = 0; p < phases.size(); ++p) {
      auto specs = cfg.models;
      for (auto& s : specs) s.nnar.seed = Rng::substream(cfg.seed, "nnar/" + leaves[j] + "/" + phases[p].name).next();
      const auto train = histories[j].slice(histories[j].start(), phases[p].end);
      auto outcomes = models::fit_forecasts(train, specs, phases[p].horizon);
      (p == 0 ? fits[j].validation : fits[j].final) = std::move(outcomes);
    }
  });

  // Base fits on every node for each family the hierarchical models use.
  std::vector<models::ModelFamily> families;
  for (const auto& s : cfg.hierarchical) {
    if (std::find(families.begin(), families.end(), s.family) == families.end()) families.push_back(s.family);
  }
  std::map<std::pair<int, std::size_t>, NodeFits> node_fits;  // (family, phase)
  std::vector<MonthlySeries> node_series;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const Eigen::Index row = static_cast<Eigen::Index>(i);
    std::vector<double> values;
    for (MonthKey t = common_start; t <= cfg.split.validation_end; ++t) {
      double sum = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        if (h.S(row, static_cast<Eigen::Index>(j)) != 0.0) sum += *histories[j].at(t);
      }
      values.push_back(sum);
    }
    node_series.emplace_back(h.nodes[i], common_start, values);
  }
  struct NodeTask {
    std::size_t family;
    std::size_t phase;
    std::size_t node;
  };
  std::vector<NodeTask> tasks;
  for (std::size_t f = 0; f < families.size(); ++f) {
    for (std::size_t p = 0; p < phases.size(); ++p) {
      auto& nf = node_fits[{static_cast<int>(f), p}];
      nf.fits.resize(h.size());
      nf.errors.resize(h.size());
      for (std::size_t i = 0; i < h.size(); ++i) tasks.push_back({f, p, i});
    }
  }
  parallel_for(tasks.size(), cfg.threads, [&](std::size_t t) {
    const auto& task = tasks[t];
    auto& nf = node_fits.at({static_cast<int>(task.family), task.phase});
    const auto& phase = phases[task.phase];
    const auto spec = models::ModelSpec::of(families[task.family]);
    const bool leaf = task.node >= h.aggregate_count();
    const MonthlySeries& source = node_series[task.node];
    // Leaves reuse the univariate fit when it was trained on the same window.
    if (leaf && source.start() == histories[task.node - h.aggregate_count()].start()) {
      const auto& list = task.phase == 0 ? fits[task.node - h.aggregate_count()].validation
                                         : fits[task.node - h.aggregate_count()].final;
      for (std::size_t k = 0; k < cfg.models.size(); ++k) {
        if (cfg.models[k].family == spec.family && cfg.models[k].model_id() == spec.model_id()) {
          if (const auto* r = std::get_if<ForecastResult>(&list[k])) {
            nf.fits[task.node] = *r;
          } else {
            nf.errors[task.node] = std::get<Error>(list[k]).what();
          }
          return;
        }
      }
    }
    try {
      nf.fits[task.node] = models::fit_forecast(source.slice(source.start(), phase.end), spec, phase.horizon);
    } catch (const Error& e) {
      nf.errors[task.node] = e.what();
    }
  });

  for (std::size_t k = 0; k < cfg.hierarchical.size(); ++k) {
    const auto& spec = cfg.hierarchical[k];
    const auto f = static_cast<int>(std::find(families.begin(), families.end(), spec.family) - families.begin());
    for (std::size_t p = 0; p < phases.size(); ++p) {
      std::vector<FitOutcome> per_leaf;
      try {
        for (auto& r : reconcile_phase(h, spec, node_fits.at({f, p}), histories, common_start, phases[p])) {
          per_leaf.emplace_back(std::move(r));
        }
      } catch (const Error& e) {
        record.warnings.push_back(spec.id + ": " + phases[p].name + " reconciliation failed (" + e.what() + ")");
        per_leaf.assign(m, Error(e.code(), e.what()));
      }
      for (std::size_t j = 0; j < m; ++j) {
        (p == 0 ? fits[j].validation : fits[j].final).push_back(per_leaf[j]);
      }
    }
  }

  // Screening, weights and the combined path per destination.
  std::vector<BaseOutcome> outcomes(m);
  parallel_for(m, cfg.threads, [&](std::size_t j) {
    auto& o = outcomes[j];
    const auto [train, valid] = split(histories[j], cfg.split);
    const auto actual = valid.dense();
    for (std::size_t k = 0; k < model_ids.size(); ++k) {
      if (const auto* r = std::get_if<ForecastResult>(&fits[j].validation[k])) {
        o.rows.push_back(models::score_forecast(model_ids[k], r->mean, train, valid));
      } else {
        o.rows.push_back(failed_row(model_ids[k], std::get<Error>(fits[j].validation[k]).what()));
      }
      o.kinds.push_back("individual");
    }
    std::vector<std::string> screened;
    try {
      screened = screen_models(std::span<const models::ValidationRow>(o.rows.data(), model_ids.size()),
                               cfg.combination.keep_fraction);
    } catch (const Error& e) {
      throw StageError(Stage::Base, leaves[j], error_text(e));
    }
    std::vector<std::string> usable;
    for (const auto& id : screened) {
      const auto pos = static_cast<std::size_t>(std::find(model_ids.begin(), model_ids.end(), id) - model_ids.begin());
      if (std::holds_alternative<ForecastResult>(fits[j].final[pos])) {
        usable.push_back(id);
      } else {
        o.warnings.push_back(leaves[j] + ": " + id + " passed screening but its final fit failed; dropped");
      }
    }
    if (usable.empty()) throw StageError(Stage::Base, leaves[j], "no screened model has a final forecast");

    const Eigen::MatrixXd F = forecast_matrix(usable, model_ids, fits[j].validation, validation_phase.horizon);
    for (auto method : {CombinationMethod::Simple, CombinationMethod::ErrorWeighted, CombinationMethod::StackLasso,
                        CombinationMethod::StackRidge}) {
      auto spec = cfg.combination;
      spec.method = method;
      try {
        const auto w = fit_weights(usable, F, actual, spec);
        const auto path = combine(usable, F, w);
        o.rows.push_back(models::score_forecast(std::string(method_name(method)), path, train, valid));
        if (method == cfg.combination.method) o.weights = w;
      } catch (const Error& e) {
        o.rows.push_back(failed_row(std::string(method_name(method)), e.what()));
        if (method == cfg.combination.method) {
          o.warnings.push_back(leaves[j] + ": " + std::string(method_name(method)) + " failed (" + e.what() +
                               "), using the simple average");
          o.weights = fit_weights(usable, F, actual, CombinationSpec{CombinationMethod::Simple, 0.0, 1.0});
        }
      }
      o.kinds.push_back("combination");
    }
  });

  if (cfg.pooled_stacking) {
    // One weight vector for every destination, fitted on the stacked
    // validation windows of the models that are usable everywhere.
    std::map<std::string, std::pair<double, int>> mase_sum;
    for (std::size_t j = 0; j < m; ++j) {
      for (const auto& id : outcomes[j].weights.model_ids) {
        const auto& row = *std::find_if(outcomes[j].rows.begin(), outcomes[j].rows.end(),
                                        [&](const auto& r) { return r.model_id == id; });
        auto& acc = mase_sum[id];
        acc.first += row.mase;
        acc.second += 1;
      }
    }
    std::vector<models::ValidationRow> pooled_rows;
    for (const auto& [id, acc] : mase_sum) {
      if (acc.second == static_cast<int>(m)) {
        models::ValidationRow row;
        row.model_id = id;
        row.mase = acc.first / acc.second;
        pooled_rows.push_back(row);
      }
    }
    if (pooled_rows.empty()) throw StageError(Stage::Base, "", "pooled stacking has no model usable everywhere");
    std::vector<std::string> ids;
    for (const auto& r : pooled_rows) ids.push_back(r.model_id);
    const int hv = validation_phase.horizon;
    Eigen::MatrixXd F(static_cast<Eigen::Index>(ids.size()), hv * static_cast<int>(m));
    std::vector<double> y;
    for (std::size_t j = 0; j < m; ++j) {
      F.middleCols(static_cast<Eigen::Index>(j) * hv, hv) = forecast_matrix(ids, model_ids, fits[j].validation, hv);
      const auto v = split(histories[j], cfg.split).second.dense();
      y.insert(y.end(), v.begin(), v.end());
    }
    const auto w = fit_weights(ids, F, y, cfg.combination);
    for (auto& o : outcomes) o.weights = w;
  }

  for (std::size_t j = 0; j < m; ++j) {
    auto& o = outcomes[j];
    o.combined = combine(o.weights.model_ids,
                         forecast_matrix(o.weights.model_ids, model_ids, fits[j].final, final_phase.horizon), o.weights);
  }

  // Outputs, destinations sorted by name.
  std::vector<std::size_t> order(m);
  for (std::size_t j = 0; j < m; ++j) order[j] = j;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return leaves[a] < leaves[b]; });

  {
    std::map<std::string, MonthlySeries> observed_leaves;
    for (const auto& leaf : leaves) observed_leaves.emplace(leaf, observed.at(leaf));
    write_arrivals(out / kImputed, imputed, &observed_leaves);
  }
  {
    auto f = open_output(out / kValidation);
    csv::write_row(f, {"destination", "model_id", "kind", "rmse", "mape", "mase", "error"});
    for (auto j : order) {
      const auto& o = outcomes[j];
      for (std::size_t r = 0; r < o.rows.size(); ++r) {
        const auto& row = o.rows[r];
        csv::write_row(f, {leaves[j], row.model_id, o.kinds[r], csv::format_number(row.rmse),
                           csv::format_number(row.mape), csv::format_number(row.mase), row.error.value_or("")});
      }
    }
  }
  {
    auto f = open_output(out / kValidationSummary);
    csv::write_row(f, {"model_id", "kind", "rmse", "mape", "mase", "destinations"});
    const auto& first = outcomes.front();
    for (std::size_t r = 0; r < first.rows.size(); ++r) {
      double rmse = 0.0, mape = 0.0, mase = 0.0;
      int count = 0;
      for (const auto& o : outcomes) {
        const auto& row = o.rows[r];
        if (row.error || !std::isfinite(row.mase) || !std::isfinite(row.mape)) continue;
        rmse += row.rmse;
        mape += row.mape;
        mase += row.mase;
        ++count;
      }
      const double nan = std::numeric_limits<double>::quiet_NaN();
      csv::write_row(f, {first.rows[r].model_id, first.kinds[r], csv::format_number(count ? rmse / count : nan),
                         csv::format_number(count ? mape / count : nan), csv::format_number(count ? mase / count : nan),
                         std::to_string(count)});
    }
  }
  {
    auto f = open_output(out / kWeights);
    write_weights_header(f);
    for (auto j : order) write_weights(f, leaves[j], outcomes[j].weights);
  }
  {
    auto f = open_output(out / kBase);
    csv::write_row(f, {"destination", "model_id", "year", "month", "mean", "lower80", "upper80"});
    for (auto j : order) {
      for (std::size_t k = 0; k < model_ids.size(); ++k) {
        const auto* r = std::get_if<ForecastResult>(&fits[j].final[k]);
        if (!r) continue;
        for (int step = 0; step < r->horizon; ++step) {
          const auto s = static_cast<std::size_t>(step);
          const MonthKey month = r->month_at(step);
          csv::write_row(f, {leaves[j], model_ids[k], year_of(month), month_of(month), csv::format_number(r->mean[s]),
                             r->has_bounds() ? csv::format_number((*r->lower80)[s]) : "",
                             r->has_bounds() ? csv::format_number((*r->upper80)[s]) : ""});
        }
      }
      const auto& combined = outcomes[j].combined;
      for (std::size_t s = 0; s < combined.size(); ++s) {
        const MonthKey month = final_phase.end + 1 + static_cast<int>(s);
        csv::write_row(f, {leaves[j], kCombined, year_of(month), month_of(month),
                           csv::format_number(std::max(0.0, combined[s])), "", ""});
      }
    }
  }
  {
    auto f = open_output(out / kSumming);
    write_summing_matrix(f, h);
  }
  for (auto j : order) {
    for (const auto& w : outcomes[j].warnings) record.warnings.push_back(w);
  }
  record.outputs = stage_outputs(Stage::Base);
  return record;
}

// ------------------------------------------------------- upstream readers

struct PathRows {
  MonthKey start;
  std::vector<double> values;
};

// Appends one month to a path, requiring consecutive months.
void append(PathRows& path, MonthKey month, double value, const std::string& what) {
  if (path.values.empty()) {
    path.start = month;
  } else if (month != path.start + static_cast<int>(path.values.size())) {
    throw Error(ErrorCode::SchemaError, what + " has non-consecutive months");
  }
  path.values.push_back(value);
}

MonthKey row_month(const csv::Table& table, std::size_t r, std::size_t year_col, std::size_t month_col) {
  const auto line = table.lines[r];
  return MonthKey(static_cast<int>(csv::parse_number(table.rows[r][year_col], line, "year")),
                  static_cast<int>(csv::parse_number(table.rows[r][month_col], line, "month")));
}

struct BaseModelPath {
  PathRows mean;
  PathRows lower;
  PathRows upper;
  bool bounded = true;
};

std::map<std::string, std::map<std::string, BaseModelPath>> read_base(const fs::path& path) {
  const auto table = csv::read(path);
  const auto dest = table.column("destination"), model = table.column("model_id"), year = table.column("year"),
             month = table.column("month"), mean = table.column("mean"), lower = table.column("lower80"),
             upper = table.column("upper80");
  std::map<std::string, std::map<std::string, BaseModelPath>> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto line = table.lines[r];
    auto& p = out[row[dest]][row[model]];
    const MonthKey mk = row_month(table, r, year, month);
    const std::string what = row[dest] + "/" + row[model];
    append(p.mean, mk, csv::parse_number(row[mean], line, "mean"), what);
    if (row[lower].empty() || row[upper].empty()) {
      p.bounded = false;
    } else if (p.bounded) {
      append(p.lower, mk, csv::parse_number(row[lower], line, "lower80"), what);
      append(p.upper, mk, csv::parse_number(row[upper], line, "upper80"), what);
    }
  }
  return out;
}

std::map<std::string, std::vector<std::string>> read_weight_models(const fs::path& path) {
  const auto table = csv::read(path);
  const auto dest = table.column("destination"), model = table.column("model_id");
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& row : table.rows) out[row[dest]].push_back(row[model]);
  return out;
}

std::map<std::string, PathRows> read_paths(const fs::path& path, const std::string& column) {
  const auto table = csv::read(path);
  const auto dest = table.column("destination"), year = table.column("year"), month = table.column("month"),
             value = table.column(column);
  std::map<std::string, PathRows> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    append(out[row[dest]], row_month(table, r, year, month), csv::parse_number(row[value], table.lines[r], column),
           row[dest]);
  }
  return out;
}

MonthlySeries as_series(const std::string& name, const PathRows& p) { return MonthlySeries(name, p.start, p.values); }

// ----------------------------------------------------------- reference stage

StageRecord run_reference(const PipelineConfig& cfg, const fs::path& out) {
  StageRecord record{Stage::Reference, 0.0, {}, {}};
  const auto imputed = load_arrivals(upstream(out, kImputed, Stage::Reference));
  const auto destinations = sorted_destinations(cfg);

  std::map<std::string, std::vector<signals::KeywordSeries>> keywords;
  if (cfg.data.keywords && fs::exists(*cfg.data.keywords)) {
    for (auto& [key, series] : load_csv(*cfg.data.keywords, keyword_schema())) {
      keywords[key[0]].push_back({key[1], series});
    }
  } else {
    record.warnings.push_back(cfg.data.keywords ? "keywords file " + cfg.data.keywords->string() + " not found"
                                                : std::string("no keywords file configured"));
  }
  std::map<std::string, MonthlySeries> flights;
  if (cfg.data.flights && fs::exists(*cfg.data.flights)) {
    for (auto& [key, series] : load_csv(*cfg.data.flights, flight_schema())) flights.emplace(key[0], series);
  } else {
    record.warnings.push_back(cfg.data.flights ? "flights file " + cfg.data.flights->string() + " not found"
                                               : std::string("no flights file configured"));
  }

  const signals::ReferenceOptions options{cfg.signal_threshold, cfg.signal_lag};
  std::vector<std::optional<signals::ReferenceForecast>> results(destinations.size());
  std::vector<std::vector<std::string>> warnings(destinations.size());
  parallel_for(destinations.size(), cfg.threads, [&](std::size_t i) {
    const auto& dest = destinations[i];
    const auto& arrivals = series_for(imputed, dest, Stage::Reference, "imputed arrivals");
    const int horizon = cfg.initial_month - arrivals.end();
    if (horizon <= 0) return;  // the history already reaches the initial month
    std::optional<MonthlySeries> flight;
    if (auto it = flights.find(dest); it != flights.end()) flight = it->second;
    const auto kw_it = keywords.find(dest);
    const std::vector<signals::KeywordSeries> none;
    try {
      auto rf = signals::reference_forecast(dest, arrivals, kw_it == keywords.end() ? none : kw_it->second, flight,
                                            horizon, options);
      for (const auto& w : rf.warnings) warnings[i].push_back(dest + ": " + w);
      results[i] = std::move(rf);
    } catch (const Error& e) {
      // Carry the last observed month forward.
      warnings[i].push_back(dest + ": no reference signal (" + error_text(e) + "), carrying the last month forward");
      signals::ReferenceForecast rf;
      rf.destination = dest;
      rf.start = arrivals.end() + 1;
      rf.path.assign(static_cast<std::size_t>(horizon), *arrivals.at(arrivals.end()));
      results[i] = std::move(rf);
    }
  });

  auto f = open_output(out / kReference);
  csv::write_row(f, {"destination", "year", "month", "reference", "index_branch", "flight_branch", "ratio", "exog",
                     "source"});
  for (std::size_t i = 0; i < destinations.size(); ++i) {
    for (const auto& w : warnings[i]) record.warnings.push_back(w);
    if (!results[i]) continue;
    const auto& rf = *results[i];
    const bool fallback = !rf.index_branch && !rf.flight_branch;
    auto cell = [](const std::optional<std::vector<double>>& v, std::size_t k) {
      return v ? csv::format_number((*v)[k]) : std::string();
    };
    for (std::size_t k = 0; k < rf.path.size(); ++k) {
      const MonthKey month = rf.start + static_cast<int>(k);
      csv::write_row(f, {rf.destination, year_of(month), month_of(month), csv::format_number(rf.path[k]),
                         cell(rf.index_branch, k), cell(rf.flight_branch, k), cell(rf.ratio, k), cell(rf.exog, k),
                         fallback ? "fallback" : "signals"});
    }
  }
  record.outputs = stage_outputs(Stage::Reference);
  return record;
}

// ------------------------------------------------------------ recovery stage

struct CurveOutcome {
  recovery::DestinationScores scores;
  recovery::RecoveryCoefficient coefficient;
  recovery::RecoveryCurve point;
  std::optional<recovery::IntervalCurves> interval;
  std::vector<std::string> warnings;
};

StageRecord run_recovery(const PipelineConfig& cfg, const fs::path& out) {
  StageRecord record{Stage::Recovery, 0.0, {}, {}};
  const auto imputed = load_arrivals(upstream(out, kImputed, Stage::Recovery));
  const auto references = read_paths(upstream(out, kReference, Stage::Recovery), "reference");
  const auto base = read_base(upstream(out, kBase, Stage::Recovery));
  const auto screened = read_weight_models(upstream(out, kWeights, Stage::Recovery));
  const auto destinations = sorted_destinations(cfg);

  std::map<std::string, recovery::DestinationScores> scores;
  if (cfg.data.scores && fs::exists(*cfg.data.scores)) {
    for (auto& s : recovery::load_scores(*cfg.data.scores)) scores.emplace(s.destination, s);
  } else {
    record.warnings.push_back("no scores file; every recovery coefficient is 1");
  }

  std::vector<CurveOutcome> results(destinations.size());
  parallel_for(destinations.size(), cfg.threads, [&](std::size_t i) {
    const auto& dest = destinations[i];
    auto& o = results[i];
    try {
      if (auto it = scores.find(dest); it != scores.end()) {
        o.scores = it->second;
        o.coefficient = recovery::coefficient_for(o.scores, cfg.prefer_table_coefficients);
      } else {
        o.scores.destination = dest;
        o.coefficient = {dest, 1.0, recovery::CoefficientSource::Formula};
        if (!scores.empty()) o.warnings.push_back(dest + ": no scores, recovery coefficient set to 1");
      }
      const auto& history = series_for(imputed, dest, Stage::Recovery, "imputed arrivals");
      const MonthKey season_end = std::min(cfg.split.validation_end, history.end());
      const auto seasonal = recovery::seasonal_profile(history.slice(history.start(), season_end));

      const auto dest_base = base.find(dest);
      if (dest_base == base.end() || !dest_base->second.count(kCombined)) {
        throw StageError(Stage::Recovery, dest, "no combined base forecast");
      }
      const auto ref_it = references.find(dest);
      recovery::CurveRequest req{
          dest,
          cfg.initial_month,
          cfg.terminal_month,
          history,
          ref_it == references.end() ? history : as_series(dest + "/reference", ref_it->second),
          as_series(dest + "/base", dest_base->second.at(kCombined).mean),
          o.coefficient.r,
          seasonal,
          cfg.quadratic_weight,
      };
      o.point = recovery::build_curve(req, &o.warnings);

      std::vector<std::pair<MonthlySeries, MonthlySeries>> bounds;
      if (auto s = screened.find(dest); s != screened.end()) {
        for (const auto& id : s->second) {
          const auto m = dest_base->second.find(id);
          if (m == dest_base->second.end() || !m->second.bounded || m->second.lower.values.empty()) continue;
          bounds.emplace_back(as_series(dest + "/" + id + "/lower80", m->second.lower),
                              as_series(dest + "/" + id + "/upper80", m->second.upper));
        }
      }
      try {
        o.interval = recovery::interval_path(req, o.point, bounds, &o.warnings);
      } catch (const Error& e) {
        o.warnings.push_back(dest + ": no interval curve (" + error_text(e) + ")");
      }
    } catch (const StageError&) {
      throw;
    } catch (const Error& e) {
      throw StageError(Stage::Recovery, dest, error_text(e));
    }
  });

  auto coefficients = open_output(out / kCoefficients);
  recovery::write_coefficients_header(coefficients);
  auto curves = open_output(out / kCurves);
  csv::write_row(curves, {"destination", "year", "month", "trend_linear", "trend_quadratic", "trend_logistic",
                          "trend_mean", "seasonal", "point", "lower80", "upper80"});
  auto point = open_output(out / kPoint);
  csv::write_row(point, {"destination", "year", "month", "forecast"});
  auto interval = open_output(out / kInterval);
  csv::write_row(interval, {"destination", "year", "month", "lower80", "upper80"});
  for (std::size_t i = 0; i < destinations.size(); ++i) {
    const auto& o = results[i];
    for (const auto& w : o.warnings) record.warnings.push_back(w);
    recovery::write_coefficient(coefficients, o.scores, o.coefficient);
    const auto& c = o.point;
    for (std::size_t t = 0; t < c.point.size(); ++t) {
      const MonthKey month = c.start + static_cast<int>(t);
      const std::string lo = o.interval ? csv::format_number(o.interval->lower.point[t]) : "";
      const std::string hi = o.interval ? csv::format_number(o.interval->upper.point[t]) : "";
      csv::write_row(curves, {c.destination, year_of(month), month_of(month), csv::format_number(c.trend_linear[t]),
                              csv::format_number(c.trend_quadratic[t]), csv::format_number(c.trend_logistic[t]),
                              csv::format_number(c.trend_mean[t]), csv::format_number(c.seasonal[t]),
                              csv::format_number(c.point[t]), lo, hi});
      if (month < cfg.evaluation_start || month > cfg.evaluation_end) continue;
      csv::write_row(point, {c.destination, year_of(month), month_of(month), csv::format_number(c.point[t])});
      if (o.interval) csv::write_row(interval, {c.destination, year_of(month), month_of(month), lo, hi});
    }
  }
  record.outputs = stage_outputs(Stage::Recovery);
  return record;
}

// ------------------------------------------------------------ evaluate stage

std::map<std::string, MonthlySeries> seasonal_naive_benchmark(const std::map<std::string, MonthlySeries>& actuals,
                                                              const std::vector<std::string>& destinations,
                                                              MonthKey start, MonthKey end, int lag) {
  std::map<std::string, MonthlySeries> out;
  for (const auto& dest : destinations) {
    const auto it = actuals.find(dest);
    if (it == actuals.end()) continue;
    const MonthKey last_train = start - 1;
    std::vector<std::optional<double>> values;
    for (MonthKey m = start; m <= end; ++m) {
      const int steps = m - last_train;
      const int back = lag * ((steps + lag - 1) / lag);
      values.push_back(it->second.at(m - back));
    }
    out.emplace(dest, MonthlySeries(dest + "/benchmark", start, std::move(values)));
  }
  return out;
}

StageRecord run_evaluate(const PipelineConfig& cfg, const fs::path& out) {
  StageRecord record{Stage::Evaluate, 0.0, {}, {}};
  if (!cfg.data.actuals || !fs::exists(*cfg.data.actuals)) {
    record.warnings.push_back("no actuals file; evaluation skipped");
    return record;
  }
  const auto actuals = load_arrivals(*cfg.data.actuals);
  const auto insample = load_arrivals(upstream(out, kImputed, Stage::Evaluate));
  std::map<std::string, MonthlySeries> points;
  for (const auto& [dest, p] : read_paths(upstream(out, kPoint, Stage::Evaluate), "forecast")) {
    points.emplace(dest, as_series(dest, p));
  }
  std::map<std::string, eval::IntervalPath> intervals;
  {
    const auto lower = read_paths(upstream(out, kInterval, Stage::Evaluate), "lower80");
    const auto upper = read_paths(out / kInterval, "upper80");
    for (const auto& [dest, lo] : lower) {
      intervals.emplace(dest, eval::IntervalPath{as_series(dest + "/lower80", lo), as_series(dest + "/upper80", upper.at(dest))});
    }
  }
  const eval::ReportOptions options{cfg.evaluation_start, cfg.evaluation_end, cfg.mase_lag, 0.2};
  eval::EvaluationReport report;
  eval::EvaluationReport bench;
  try {
    report = eval::report(points, intervals, actuals, insample, options);
    const auto benchmark = seasonal_naive_benchmark(actuals, sorted_destinations(cfg), cfg.evaluation_start,
                                                    cfg.evaluation_end, cfg.mase_lag);
    bench = eval::report(benchmark, {}, actuals, insample, options);
  } catch (const Error& e) {
    throw StageError(Stage::Evaluate, "", error_text(e));
  }
  {
    auto f = open_output(out / kPointMetrics);
    eval::write_point_metrics(f, report);
  }
  {
    auto f = open_output(out / kIntervalMetrics);
    eval::write_interval_metrics(f, report);
  }
  {
    auto f = open_output(out / kBenchmark);
    csv::write_row(f, {"destination", "rise_rmse", "rise_mape", "rise_mase", "benchmark_rmse", "benchmark_mape",
                       "benchmark_mase"});
    auto line = [&](const eval::MetricRow& a, const eval::MetricRow& b) {
      csv::write_row(f, {a.destination, csv::format_number(a.rmse), csv::format_number(a.mape),
                         csv::format_number(a.mase), csv::format_number(b.rmse), csv::format_number(b.mape),
                         csv::format_number(b.mase)});
    };
    for (const auto& row : report.point) {
      const auto it = std::find_if(bench.point.begin(), bench.point.end(),
                                   [&](const auto& b) { return b.destination == row.destination; });
      if (it != bench.point.end()) line(row, *it);
    }
    line(report.point_average, bench.point_average);
    line(report.point_weighted_average, bench.point_weighted_average);
  }
  {
    auto f = open_output(out / kSummary);
    f << "# Forecast evaluation " << cfg.evaluation_start.to_string() << " to " << cfg.evaluation_end.to_string()
      << "\n\n## Recovery forecasts\n\n";
    eval::write_markdown(f, report);
    f << "\n## Seasonal naive benchmark\n\n";
    eval::write_markdown(f, bench);
  }
  record.outputs = stage_outputs(Stage::Evaluate);
  return record;
}

// ------------------------------------------------------------------ manifest

nlohmann::json to_json(const StageRecord& r) {
  return {{"stage", std::string(stage_name(r.stage))}, {"seconds", r.seconds}, {"outputs", r.outputs},
          {"warnings", r.warnings}};
}

void write_manifest(const fs::path& out, const RunManifest& manifest) {
  nlohmann::json j;
  j["config_hash"] = manifest.config_hash;
  j["seed"] = manifest.seed;
  j["stages"] = nlohmann::json::array();
  for (const auto& s : manifest.stages) j["stages"].push_back(to_json(s));
  j["outputs"] = manifest.outputs();
  j["warnings"] = manifest.warnings();
  auto f = open_output(out / kManifest);
  f << j.dump(2) << "\n";
}

// Stage records from an earlier manifest for the same config and seed.
std::vector<StageRecord> previous_stages(const fs::path& out, const RunManifest& current) {
  std::vector<StageRecord> stages;
  std::ifstream in(out / kManifest);
  if (!in) return stages;
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.at("config_hash") != current.config_hash || j.at("seed") != current.seed) return stages;
    for (const auto& s : j.at("stages")) {
      const auto stage = parse_stage(s.at("stage").get<std::string>());
      if (!stage) continue;
      stages.push_back({*stage, s.at("seconds").get<double>(), s.at("outputs").get<std::vector<std::string>>(),
                        s.at("warnings").get<std::vector<std::string>>()});
    }
  } catch (const nlohmann::json::exception&) {
    stages.clear();
  }
  return stages;
}

}  // namespace

std::string_view stage_name(Stage stage) {
  switch (stage) {
    case Stage::Base: return "base";
    case Stage::Reference: return "reference";
    case Stage::Recovery: return "recovery";
    case Stage::Evaluate: return "evaluate";
  }
  return "unknown";
}

std::optional<Stage> parse_stage(std::string_view name) {
  for (auto s : kAllStages) {
    if (stage_name(s) == name) return s;
  }
  return std::nullopt;
}

StageError::StageError(Stage stage, std::string destination, const std::string& message)
    : std::runtime_error("stage " + std::string(stage_name(stage)) +
                         (destination.empty() ? std::string() : " [" + destination + "]") + ": " + message),
      stage_(stage),
      destination_(std::move(destination)) {}

std::vector<std::string> RunManifest::outputs() const {
  std::vector<std::string> out;
  for (const auto& s : stages) out.insert(out.end(), s.outputs.begin(), s.outputs.end());
  return out;
}

std::vector<std::string> RunManifest::warnings() const {
  std::vector<std::string> out;
  for (const auto& s : stages) {
    for (const auto& w : s.warnings) out.push_back(std::string(stage_name(s.stage)) + ": " + w);
  }
  return out;
}

std::vector<std::string> stage_outputs(Stage stage) {
  switch (stage) {
    case Stage::Base: return {kImputed, kValidation, kValidationSummary, kWeights, kBase, kSumming};
    case Stage::Reference: return {kReference};
    case Stage::Recovery: return {kCoefficients, kCurves, kPoint, kInterval};
    case Stage::Evaluate: return {kPointMetrics, kIntervalMetrics, kBenchmark, kSummary};
  }
  return {};
}

RunManifest run(const PipelineConfig& config, const fs::path& out, std::span<const Stage> stages) {
  fs::create_directories(out);
  RunManifest manifest;
  manifest.config_hash = config.hash;
  manifest.seed = config.seed;
  manifest.stages = previous_stages(out, manifest);
  for (const Stage stage : stages) {
    const auto started = std::chrono::steady_clock::now();
    StageRecord record;
    try {
      switch (stage) {
        case Stage::Base: record = run_base(config, out); break;
        case Stage::Reference: record = run_reference(config, out); break;
        case Stage::Recovery: record = run_recovery(config, out); break;
        case Stage::Evaluate: record = run_evaluate(config, out); break;
      }
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(stage, "", e.what());
    }
    record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    std::erase_if(manifest.stages, [&](const StageRecord& r) { return r.stage == stage; });
    manifest.stages.push_back(std::move(record));
    std::sort(manifest.stages.begin(), manifest.stages.end(),
              [](const StageRecord& a, const StageRecord& b) { return a.stage < b.stage; });
    write_manifest(out, manifest);
  }
  return manifest;
}

RunManifest run(const PipelineConfig& config, const fs::path& out) { return run(config, out, kAllStages); }

}  // namespace rise::pipeline
