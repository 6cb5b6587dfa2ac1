#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rise/combine.hpp"
#include "rise/hierarchy.hpp"
#include "rise/models/forecast.hpp"
#include "rise/month.hpp"
#include "rise/series.hpp"

namespace rise {

inline constexpr int kConfigVersion = 1;

enum class ReconciliationMethod { TopDownForecast, TopDownHistory, Wls, Mint };

std::string_view reconciliation_name(ReconciliationMethod method);
std::optional<ReconciliationMethod> parse_reconciliation(std::string_view name);

struct HierarchicalSpec {
  std::string id;
  ReconciliationMethod method = ReconciliationMethod::Mint;
  models::ModelFamily family = models::ModelFamily::HoltWinters;
};

struct DataPaths {
  std::filesystem::path arrivals;
  std::optional<std::filesystem::path> keywords;
  std::optional<std::filesystem::path> flights;
  std::optional<std::filesystem::path> scores;
  std::optional<std::filesystem::path> actuals;
};

struct PipelineConfig {
  int config_version = kConfigVersion;
  std::string hash;  // FNV-1a of the config text, hex
  std::uint64_t seed = 1;
  DataPaths data;
  std::string root = "Total";
  std::vector<Region> regions;
  SplitSpec split{MonthKey(2017, 12), MonthKey(2019, 12)};
  MonthKey base_horizon_end{2024, 12};
  std::vector<models::ModelSpec> models;
  std::vector<HierarchicalSpec> hierarchical;
  CombinationSpec combination;
  bool pooled_stacking = false;
  double signal_threshold = 0.6;
  int signal_lag = 1;
  MonthKey initial_month{2023, 6};
  MonthKey terminal_month{2024, 7};
  bool prefer_table_coefficients = true;  // coefficient_mode: table | formula
  double quadratic_weight = 18.0;
  MonthKey evaluation_start{2023, 8};
  MonthKey evaluation_end{2024, 7};
  int mase_lag = 12;
  int threads = 0;  // 0 = hardware concurrency

  std::vector<std::string> destinations() const;
};

/// Default model lists: the eleven univariate families and six
/// hierarchical variants.
std::vector<models::ModelSpec> default_models();
std::vector<HierarchicalSpec> default_hierarchical();

/// Parses a YAML config; relative data paths resolve against the config's
/// directory. Throws Error(ConfigError) with the offending key.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir);

/// Default config text for a dataset directory written by `generate`.
std::string default_config_text(std::uint64_t seed, const std::vector<Region>& regions);

}  // namespace rise
