#include "rise/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "rise/error.hpp"

namespace rise {
namespace {

[[noreturn]] void fail(const std::string& key, const std::string& message) {
  throw Error(ErrorCode::ConfigError, key + ": " + message);
}

template <typename T>
T scalar(const YAML::Node& node, const std::string& key) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    fail(key, "unexpected value '" + (node.IsScalar() ? node.Scalar() : std::string("<non-scalar>")) + "'");
  }
}

template <typename T>
void read_opt(const YAML::Node& parent, const char* name, const std::string& prefix, T& out) {
  if (const auto node = parent[name]) out = scalar<T>(node, prefix + name);
}

MonthKey month_value(const YAML::Node& node, const std::string& key) {
  try {
    return MonthKey::parse(scalar<std::string>(node, key));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    fail(key, "expected YYYY-MM");
  }
}

void read_month(const YAML::Node& parent, const char* name, const std::string& prefix, MonthKey& out) {
  if (const auto node = parent[name]) out = month_value(node, prefix + name);
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& text) {
  std::filesystem::path p(text);
  return p.is_absolute() ? p : base / p;
}

const YAML::Node section(const YAML::Node& root, const char* name) {
  const auto node = root[name];
  if (node && !node.IsMap()) fail(name, "expected a mapping");
  return node;
}

void check_keys(const YAML::Node& node, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!node || !node.IsMap()) return;
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) fail(where.empty() ? key : where + "." + key, "unknown key");
  }
}

models::ModelSpec model_from(const YAML::Node& node, const std::string& key, const models::NnarOptions& nnar) {
  std::string family_text;
  std::string id;
  if (node.IsScalar()) {
    family_text = node.Scalar();
  } else if (node.IsMap()) {
    check_keys(node, key, {"family", "id"});
    if (!node["family"]) fail(key, "model entry needs a family");
    family_text = scalar<std::string>(node["family"], key + ".family");
    read_opt(node, "id", key + ".", id);
  } else {
    fail(key, "expected a family name or {family, id}");
  }
  const auto family = models::parse_family(family_text);
  if (!family) fail(key, "unknown model family '" + family_text + "'");
  auto spec = models::ModelSpec::of(*family, id);
  spec.nnar = nnar;
  return spec;
}

}  // namespace

std::string_view reconciliation_name(ReconciliationMethod method) {
  switch (method) {
    case ReconciliationMethod::TopDownForecast: return "td_forecast_prop";
    case ReconciliationMethod::TopDownHistory: return "td_hist_prop";
    case ReconciliationMethod::Wls: return "wls";
    case ReconciliationMethod::Mint: return "mint";
  }
  return "unknown";
}

std::optional<ReconciliationMethod> parse_reconciliation(std::string_view name) {
  for (auto m : {ReconciliationMethod::TopDownForecast, ReconciliationMethod::TopDownHistory,
                 ReconciliationMethod::Wls, ReconciliationMethod::Mint}) {
    if (reconciliation_name(m) == name) return m;
  }
  return std::nullopt;
}

std::vector<std::string> PipelineConfig::destinations() const {
  std::vector<std::string> out;
  for (const auto& region : regions) out.insert(out.end(), region.destinations.begin(), region.destinations.end());
  return out;
}

std::vector<models::ModelSpec> default_models() {
  using models::ModelFamily;
  std::vector<models::ModelSpec> out;
  for (auto f : {ModelFamily::SeasonalNaive, ModelFamily::Drift, ModelFamily::Arima, ModelFamily::Ses,
                 ModelFamily::Holt, ModelFamily::HoltWinters, ModelFamily::StlA, ModelFamily::StlB,
                 ModelFamily::StlC, ModelFamily::BoxCoxHoltWinters, ModelFamily::Nnar}) {
    out.push_back(models::ModelSpec::of(f));
  }
  return out;
}

std::vector<HierarchicalSpec> default_hierarchical() {
  using models::ModelFamily;
  return {
      {"td_a_arima", ReconciliationMethod::TopDownForecast, ModelFamily::Arima},
      {"td_a_ets", ReconciliationMethod::TopDownForecast, ModelFamily::HoltWinters},
      {"td_b_arima", ReconciliationMethod::TopDownHistory, ModelFamily::Arima},
      {"td_b_ets", ReconciliationMethod::TopDownHistory, ModelFamily::HoltWinters},
      {"mint_ets", ReconciliationMethod::Mint, ModelFamily::HoltWinters},
      {"wls_ets", ReconciliationMethod::Wls, ModelFamily::HoltWinters},
  };
}

PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    fail("<document>", std::string("YAML parse error: ") + e.what());
  }
  if (!root.IsMap()) fail("<document>", "expected a mapping at the top level");
  check_keys(root, "", {"config_version", "seed", "data", "hierarchy", "split", "base", "models", "nnar",
                        "hierarchical", "combination", "signals", "recovery", "evaluation", "threads"});

  PipelineConfig cfg;
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  cfg.hash = hex;
  if (!root["config_version"]) fail("config_version", "missing");
  cfg.config_version = scalar<int>(root["config_version"], "config_version");
  if (cfg.config_version != kConfigVersion) {
    fail("config_version", "unsupported version " + std::to_string(cfg.config_version));
  }
  read_opt(root, "seed", "", cfg.seed);
  read_opt(root, "threads", "", cfg.threads);
  if (cfg.threads < 0) fail("threads", "must be >= 0");

  const auto data = section(root, "data");
  if (!data || !data["arrivals"]) fail("data.arrivals", "missing");
  check_keys(data, "data", {"arrivals", "keywords", "flights", "scores", "actuals"});
  cfg.data.arrivals = resolve(base_dir, scalar<std::string>(data["arrivals"], "data.arrivals"));
  auto optional_path = [&](const char* name, std::optional<std::filesystem::path>& out) {
    if (const auto node = data[name]) out = resolve(base_dir, scalar<std::string>(node, std::string("data.") + name));
  };
  optional_path("keywords", cfg.data.keywords);
  optional_path("flights", cfg.data.flights);
  optional_path("scores", cfg.data.scores);
  optional_path("actuals", cfg.data.actuals);

  const auto hierarchy = section(root, "hierarchy");
  if (!hierarchy || !hierarchy["regions"]) fail("hierarchy.regions", "missing");
  check_keys(hierarchy, "hierarchy", {"root", "regions"});
  read_opt(hierarchy, "root", "hierarchy.", cfg.root);
  const auto regions = hierarchy["regions"];
  if (!regions.IsSequence()) fail("hierarchy.regions", "expected a list");
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const std::string key = "hierarchy.regions[" + std::to_string(i) + "]";
    const auto node = regions[i];
    if (!node.IsMap() || !node["name"] || !node["destinations"] || !node["destinations"].IsSequence()) {
      fail(key, "expected {name, destinations: [...]}");
    }
    check_keys(node, key, {"name", "destinations"});
    Region region;
    region.name = scalar<std::string>(node["name"], key + ".name");
    for (const auto& d : node["destinations"]) region.destinations.push_back(scalar<std::string>(d, key + ".destinations"));
    cfg.regions.push_back(std::move(region));
  }
  try {
    build_summing_matrix(cfg.regions, cfg.root);
  } catch (const Error& e) {
    fail("hierarchy", e.what());
  }

  if (const auto split_node = section(root, "split")) {
    check_keys(split_node, "split", {"train_end", "validation_end"});
    read_month(split_node, "train_end", "split.", cfg.split.train_end);
    read_month(split_node, "validation_end", "split.", cfg.split.validation_end);
  }
  if (!(cfg.split.train_end < cfg.split.validation_end)) fail("split", "train_end must precede validation_end");

  if (const auto base = section(root, "base")) {
    check_keys(base, "base", {"horizon_end"});
    read_month(base, "horizon_end", "base.", cfg.base_horizon_end);
  }
  if (!(cfg.base_horizon_end > cfg.split.validation_end)) fail("base.horizon_end", "must follow validation_end");

  models::NnarOptions nnar;
  if (const auto n = section(root, "nnar")) {
    check_keys(n, "nnar", {"p", "seasonal_p", "size", "repeats", "epochs", "learning_rate"});
    read_opt(n, "p", "nnar.", nnar.p);
    read_opt(n, "seasonal_p", "nnar.", nnar.seasonal_p);
    read_opt(n, "size", "nnar.", nnar.size);
    read_opt(n, "repeats", "nnar.", nnar.repeats);
    read_opt(n, "epochs", "nnar.", nnar.epochs);
    read_opt(n, "learning_rate", "nnar.", nnar.learning_rate);
    if (nnar.p < 1 || nnar.seasonal_p < 0 || nnar.size < 1 || nnar.repeats < 1 || nnar.epochs < 1 ||
        !(nnar.learning_rate > 0.0)) {
      fail("nnar", "lags, size, repeats and epochs must be positive");
    }
  }

  if (const auto list = root["models"]) {
    if (!list.IsSequence()) fail("models", "expected a list");
    for (std::size_t i = 0; i < list.size(); ++i) {
      cfg.models.push_back(model_from(list[i], "models[" + std::to_string(i) + "]", nnar));
    }
  } else {
    cfg.models = default_models();
    for (auto& m : cfg.models) m.nnar = nnar;
  }

  if (const auto list = root["hierarchical"]) {
    if (!list.IsSequence()) fail("hierarchical", "expected a list");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string key = "hierarchical[" + std::to_string(i) + "]";
      const auto node = list[i];
      if (!node.IsMap() || !node["method"] || !node["base"]) fail(key, "expected {id, method, base}");
      check_keys(node, key, {"id", "method", "base"});
      HierarchicalSpec spec;
      const auto method_text = scalar<std::string>(node["method"], key + ".method");
      const auto method = parse_reconciliation(method_text);
      if (!method) fail(key + ".method", "unknown method '" + method_text + "'");
      spec.method = *method;
      const auto base_text = scalar<std::string>(node["base"], key + ".base");
      const auto family = models::parse_family(base_text);
      if (!family) fail(key + ".base", "unknown model family '" + base_text + "'");
      spec.family = *family;
      spec.id = std::string(reconciliation_name(spec.method)) + "_" + std::string(models::family_name(spec.family));
      read_opt(node, "id", key + ".", spec.id);
      cfg.hierarchical.push_back(std::move(spec));
    }
  } else {
    cfg.hierarchical = default_hierarchical();
  }

  std::set<std::string> ids;
  for (const auto& m : cfg.models) {
    if (!ids.insert(m.model_id()).second) fail("models", "duplicate model id '" + m.model_id() + "'");
  }
  for (const auto& h : cfg.hierarchical) {
    if (!ids.insert(h.id).second) fail("hierarchical", "duplicate model id '" + h.id + "'");
  }
  if (ids.empty()) fail("models", "at least one model is required");
  if (ids.count("combined")) fail("models", "'combined' is reserved");

  if (const auto c = section(root, "combination")) {
    check_keys(c, "combination", {"method", "lambda", "keep_fraction", "pooled"});
    if (const auto m = c["method"]) {
      const auto text = scalar<std::string>(m, "combination.method");
      const auto method = parse_method(text);
      if (!method) fail("combination.method", "unknown method '" + text + "'");
      cfg.combination.method = *method;
    }
    read_opt(c, "lambda", "combination.", cfg.combination.lambda);
    read_opt(c, "keep_fraction", "combination.", cfg.combination.keep_fraction);
    read_opt(c, "pooled", "combination.", cfg.pooled_stacking);
  }
  if (!(cfg.combination.lambda >= 0.0)) fail("combination.lambda", "must be >= 0");
  if (!(cfg.combination.keep_fraction > 0.0 && cfg.combination.keep_fraction <= 1.0)) {
    fail("combination.keep_fraction", "must be in (0, 1]");
  }

  if (const auto s = section(root, "signals")) {
    check_keys(s, "signals", {"threshold", "lag"});
    read_opt(s, "threshold", "signals.", cfg.signal_threshold);
    read_opt(s, "lag", "signals.", cfg.signal_lag);
  }
  if (!(cfg.signal_threshold >= -1.0 && cfg.signal_threshold <= 1.0)) fail("signals.threshold", "must be in [-1, 1]");
  if (cfg.signal_lag < 0) fail("signals.lag", "must be >= 0");

  if (const auto r = section(root, "recovery")) {
    check_keys(r, "recovery", {"initial", "terminal", "coefficient_mode", "quadratic_weight"});
    read_month(r, "initial", "recovery.", cfg.initial_month);
    read_month(r, "terminal", "recovery.", cfg.terminal_month);
    if (const auto mode = r["coefficient_mode"]) {
      const auto text = scalar<std::string>(mode, "recovery.coefficient_mode");
      if (text == "table") {
        cfg.prefer_table_coefficients = true;
      } else if (text == "formula") {
        cfg.prefer_table_coefficients = false;
      } else {
        fail("recovery.coefficient_mode", "expected table or formula");
      }
    }
    read_opt(r, "quadratic_weight", "recovery.", cfg.quadratic_weight);
  }
  if (!(cfg.initial_month < cfg.terminal_month)) fail("recovery", "initial month must precede terminal month");
  if (MonthKey(cfg.terminal_month.year(), 12) > cfg.base_horizon_end) {
    fail("base.horizon_end", "must reach December of the terminal year");
  }
  if (!(cfg.quadratic_weight >= 0.0)) fail("recovery.quadratic_weight", "must be >= 0");

  if (const auto e = section(root, "evaluation")) {
    check_keys(e, "evaluation", {"start", "end", "mase_lag"});
    read_month(e, "start", "evaluation.", cfg.evaluation_start);
    read_month(e, "end", "evaluation.", cfg.evaluation_end);
    read_opt(e, "mase_lag", "evaluation.", cfg.mase_lag);
  }
  if (cfg.evaluation_end < cfg.evaluation_start) fail("evaluation", "end precedes start");
  if (cfg.evaluation_start < cfg.initial_month || cfg.evaluation_end > cfg.terminal_month) {
    fail("evaluation", "window must lie inside the recovery curve window");
  }
  if (cfg.mase_lag < 1) fail("evaluation.mase_lag", "must be >= 1");
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path.string(), "cannot open config file");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.parent_path());
}

std::string default_config_text(std::uint64_t seed, const std::vector<Region>& regions) {
  std::ostringstream out;
  out << "config_version: " << kConfigVersion << "\n"
      << "seed: " << seed << "\n"
      << "data:\n"
      << "  arrivals: arrivals.csv\n"
      << "  keywords: keywords.csv\n"
      << "  flights: flights.csv\n"
      << "  scores: scores.csv\n"
      << "  actuals: actuals.csv\n"
      << "hierarchy:\n"
      << "  root: Total\n"
      << "  regions:\n";
  for (const auto& region : regions) {
    out << "    - name: \"" << region.name << "\"\n      destinations: [";
    for (std::size_t i = 0; i < region.destinations.size(); ++i) {
      out << (i ? ", " : "") << '"' << region.destinations[i] << '"';
    }
    out << "]\n";
  }
  out << "split:\n"
      << "  train_end: 2017-12\n"
      << "  validation_end: 2019-12\n"
      << "base:\n"
      << "  horizon_end: 2024-12\n"
      << "models: [seasonal_naive, drift, arima, ses, holt, holt_winters, stl_a, stl_b, stl_c, bchw, nnar]\n"
      << "hierarchical:\n";
  for (const auto& h : default_hierarchical()) {
    out << "  - {id: " << h.id << ", method: " << reconciliation_name(h.method)
        << ", base: " << models::family_name(h.family) << "}\n";
  }
  out << "combination:\n"
      << "  method: stack_lasso\n"
      << "  lambda: 1\n"
      << "  keep_fraction: 0.8\n"
      << "signals:\n"
      << "  threshold: 0.6\n"
      << "  lag: 1\n"
      << "recovery:\n"
      << "  initial: 2023-06\n"
      << "  terminal: 2024-07\n"
      << "  coefficient_mode: table\n"
      << "  quadratic_weight: 18\n"
      << "evaluation:\n"
      << "  start: 2023-08\n"
      << "  end: 2024-07\n"
      << "  mase_lag: 12\n"
      << "threads: 0\n";
  return out.str();
}

}  // namespace rise
