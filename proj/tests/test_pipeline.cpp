#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "rise/config.hpp"
#include "rise/csv.hpp"
#include "rise/pipeline.hpp"
#include "rise/synthetic.hpp"

namespace rise::pipeline {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class SmallRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / "rise_test_pipeline";
    fs::remove_all(root_);
    synthetic::SyntheticSpec spec;
    spec.seed = 5;
    std::vector<synthetic::DestinationProfile> keep;
    for (const auto& d : spec.destinations) {
      if (d.name == "Canada" || d.name == "Chile" || d.name == "Japan" || d.name == "Thailand") keep.push_back(d);
    }
    spec.destinations = keep;
    synthetic::write_dataset(synthetic::generate(spec), spec, root_ / "data");
  }
  static void TearDownTestSuite() { fs::remove_all(root_); }

  static PipelineConfig config() { return load_config(root_ / "data" / "config.yaml"); }

  static fs::path root_;
};

fs::path SmallRun::root_;

TEST_F(SmallRun, WritesEveryStageOutput) {
  const auto out = root_ / "run_a";
  const auto manifest = run(config(), out);
  ASSERT_EQ(manifest.stages.size(), 4u);
  for (auto stage : kAllStages) {
    for (const auto& file : stage_outputs(stage)) EXPECT_TRUE(fs::exists(out / file)) << file;
  }
  EXPECT_TRUE(fs::exists(out / "manifest.json"));
  const auto points = csv::read(out / "point_forecasts.csv");
  EXPECT_EQ(points.header, (std::vector<std::string>{"destination", "year", "month", "forecast"}));
  EXPECT_EQ(points.rows.size(), 4u * 12u);
  const auto curves = csv::read(out / "recovery_curves.csv");
  std::size_t canada = 0;
  for (const auto& row : curves.rows) canada += row[0] == "Canada";
  EXPECT_EQ(canada, 14u);
}

TEST_F(SmallRun, DeterministicAndStageIsolated) {
  const auto a = root_ / "run_b";
  const auto b = root_ / "run_c";
  run(config(), a);
  run(config(), b);
  for (auto stage : kAllStages) {
    for (const auto& file : stage_outputs(stage)) {
      if (file == "summary.md") continue;
      EXPECT_EQ(slurp(a / file), slurp(b / file)) << file;
    }
  }
  const auto before = slurp(a / "point_forecasts.csv");
  for (const auto& file : stage_outputs(Stage::Recovery)) fs::remove(a / file);
  const Stage only[] = {Stage::Recovery};
  run(config(), a, only);
  EXPECT_EQ(slurp(a / "point_forecasts.csv"), before);
}

TEST_F(SmallRun, MissingFlightsFileWarns) {
  auto cfg = config();
  cfg.data.flights = root_ / "data" / "no_such_flights.csv";
  const auto manifest = run(cfg, root_ / "run_d", std::span<const Stage>(kAllStages, 2));
  bool warned = false;
  for (const auto& w : manifest.warnings()) warned |= w.find("flight") != std::string::npos;
  EXPECT_TRUE(warned);
  EXPECT_TRUE(fs::exists(root_ / "run_d" / "reference_forecasts.csv"));
}

TEST_F(SmallRun, MissingUpstreamIsAStageError) {
  const Stage only[] = {Stage::Recovery};
  EXPECT_THROW(run(config(), root_ / "run_empty", only), StageError);
}

}  // namespace
}  // namespace rise::pipeline
