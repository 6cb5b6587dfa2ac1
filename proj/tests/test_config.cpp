#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "rise/config.hpp"
#include "rise/error.hpp"
#include "rise/synthetic.hpp"

namespace rise {
namespace {

std::string config_error(const std::string& text) {
  try {
    parse_config(text, "/data");
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigError) << e.what();
    return e.what();
  }
  ADD_FAILURE() << "config accepted";
  return {};
}

std::string base_text() {
  return default_config_text(3, synthetic::regions_of(synthetic::default_destinations()));
}

std::string replace(std::string text, const std::string& from, const std::string& to) {
  const auto pos = text.find(from);
  EXPECT_NE(pos, std::string::npos) << from;
  return text.replace(pos, from.size(), to);
}

TEST(Config, DefaultTextParses) {
  const auto cfg = parse_config(base_text(), "/data");
  EXPECT_EQ(cfg.config_version, 1);
  EXPECT_EQ(cfg.seed, 3u);
  EXPECT_EQ(cfg.data.arrivals, std::filesystem::path("/data/arrivals.csv"));
  EXPECT_EQ(*cfg.data.flights, std::filesystem::path("/data/flights.csv"));
  EXPECT_EQ(cfg.destinations().size(), 20u);
  EXPECT_EQ(cfg.models.size(), 11u);
  EXPECT_EQ(cfg.hierarchical.size(), 6u);
  EXPECT_EQ(cfg.models.size() + cfg.hierarchical.size(), 17u);
  EXPECT_EQ(cfg.combination.method, CombinationMethod::StackLasso);
  EXPECT_EQ(cfg.initial_month, MonthKey(2023, 6));
  EXPECT_EQ(cfg.terminal_month, MonthKey(2024, 7));
  EXPECT_TRUE(cfg.prefer_table_coefficients);
  EXPECT_EQ(cfg.hash.size(), 16u);
  EXPECT_EQ(parse_config(base_text(), "/data").hash, cfg.hash);
  EXPECT_NE(parse_config(base_text() + "# edit\n", "/data").hash, cfg.hash);
}

TEST(Config, RejectsBadInput) {
  const auto text = base_text();
  EXPECT_NE(config_error(text + "colour: blue\n").find("colour"), std::string::npos);
  EXPECT_NE(config_error(replace(text, "config_version: 1", "config_version: 2")).find("config_version"),
            std::string::npos);
  config_error(replace(text, "method: stack_lasso", "method: median"));
  config_error(replace(text, "lambda: 1", "lambda: -1"));
  config_error(replace(text, "initial: 2023-06", "initial: 2024-09"));
  config_error(replace(text, "start: 2023-08", "start: 2023-01"));
  config_error(replace(text, "models: [seasonal_naive,", "models: [seasonal_naive, seasonal_naive,"));
  config_error(replace(text, "\"Canada\", ", "\"Japan\", "));
  config_error("config_version: 1\n");
  config_error("- not\n- a\n- map\n");
}

TEST(Config, LoadsFromFileWithRelativePaths) {
  const auto dir = std::filesystem::temp_directory_path() / "rise_test_config";
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "config.yaml");
    out << base_text();
  }
  const auto cfg = load_config(dir / "config.yaml");
  EXPECT_EQ(cfg.data.arrivals, dir / "arrivals.csv");
  std::filesystem::remove_all(dir);
  try {
    load_config(dir / "missing.yaml");
    ADD_FAILURE() << "missing file accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigError);
  }
}

}  // namespace
}  // namespace rise
