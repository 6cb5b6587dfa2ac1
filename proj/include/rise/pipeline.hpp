#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rise/config.hpp"

namespace rise::pipeline {

enum class Stage { Base, Reference, Recovery, Evaluate };

std::string_view stage_name(Stage stage);
std::optional<Stage> parse_stage(std::string_view name);
inline constexpr Stage kAllStages[] = {Stage::Base, Stage::Reference, Stage::Recovery, Stage::Evaluate};

/// Hard failure inside a stage; aborts the run.
class StageError : public std::runtime_error {
 public:
  StageError(Stage stage, std::string destination, const std::string& message);
  Stage stage() const { return stage_; }
  const std::string& destination() const { return destination_; }

 private:
  Stage stage_;
  std::string destination_;
};

struct StageRecord {
  Stage stage = Stage::Base;
  double seconds = 0.0;
  std::vector<std::string> outputs;   // file names relative to the output directory
  std::vector<std::string> warnings;  // fallbacks taken, in destination order
};

struct RunManifest {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<StageRecord> stages;

  std::vector<std::string> outputs() const;
  std::vector<std::string> warnings() const;
};

/// Runs the given stages in order. Every stage reads its inputs from the
/// configured data files and the CSVs earlier stages left in `out`, so a
/// single stage can be rerun from cached upstream artifacts. The manifest is
/// merged into out/manifest.json.
RunManifest run(const PipelineConfig& config, const std::filesystem::path& out, std::span<const Stage> stages);
RunManifest run(const PipelineConfig& config, const std::filesystem::path& out);

/// Output files a stage writes.
std::vector<std::string> stage_outputs(Stage stage);

}  // namespace rise::pipeline
