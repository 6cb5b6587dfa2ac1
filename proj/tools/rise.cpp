#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "rise/config.hpp"
#include "rise/error.hpp"
#include "rise/pipeline.hpp"
#include "rise/synthetic.hpp"

namespace {

constexpr int kExitStage = 1;
constexpr int kExitConfig = 2;

rise::PipelineConfig load(const std::string& path, const std::optional<std::uint64_t>& seed) {
  auto cfg = rise::load_config(path);
  if (seed) cfg.seed = *seed;
  return cfg;
}

void report(const rise::pipeline::RunManifest& manifest, const std::filesystem::path& out) {
  for (const auto& w : manifest.warnings()) std::cerr << "warning: " << w << "\n";
  for (const auto& s : manifest.stages) {
    std::cout << rise::pipeline::stage_name(s.stage) << ": " << s.seconds << " s, " << s.outputs.size()
              << " file(s)\n";
  }
  std::cout << "outputs in " << out.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Recovery-aware tourism demand forecasting pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";

  auto* generate = app.add_subcommand("generate", "Write a synthetic dataset and default config");
  std::uint64_t gen_seed = 1;
  std::string gen_out = "data/synthetic";
  std::string shape = "linear";
  double suppression = 0.7;
  int years = 8;
  double amplitude = 1.0;
  bool no_flights = false;
  generate->add_option("--seed", gen_seed, "Random seed");
  generate->add_option("--out", gen_out, "Output directory");
  generate->add_option("--shape", shape, "Recovery shape: linear, quadratic or logistic");
  generate->add_option("--suppression", suppression, "Terminal arrivals as a fraction of the no-break path");
  generate->add_option("--years", years, "Years of history before the break");
  generate->add_option("--seasonal-amplitude", amplitude, "Seasonal swing multiplier (0 = none)");
  generate->add_flag("--no-flights", no_flights, "Do not write flights.csv");

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Pipeline config (YAML)")->required();
    cmd->add_option("--seed", seed, "Override the config seed");
    cmd->add_option("--out", out_dir, "Output directory");
  };
  auto* run = app.add_subcommand("run", "Run every stage");
  add_common(run);
  auto* stage = app.add_subcommand("stage", "Run a single stage from cached upstream outputs");
  std::string stage_arg;
  stage->add_option("name", stage_arg, "base, reference, recovery or evaluate")->required();
  add_common(stage);
  auto* evaluate = app.add_subcommand("evaluate", "Score existing forecasts against actuals");
  add_common(evaluate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*generate) {
      rise::synthetic::SyntheticSpec spec;
      spec.seed = gen_seed;
      const auto parsed = rise::synthetic::parse_shape(shape);
      if (!parsed) throw rise::Error(rise::ErrorCode::ConfigError, "unknown recovery shape '" + shape + "'");
      spec.shape = *parsed;
      spec.suppression = suppression;
      spec.years = years;
      spec.seasonal_amplitude = amplitude;
      spec.flights = !no_flights;
      const auto data = rise::synthetic::generate(spec);
      for (const auto& f : rise::synthetic::write_dataset(data, spec, gen_out)) std::cout << f.string() << "\n";
      return 0;
    }
    const auto cfg = load(config_path, seed);
    rise::pipeline::RunManifest manifest;
    if (*run) {
      manifest = rise::pipeline::run(cfg, out_dir);
    } else if (*stage) {
      const auto s = rise::pipeline::parse_stage(stage_arg);
      if (!s) throw rise::Error(rise::ErrorCode::ConfigError, "unknown stage '" + stage_arg + "'");
      const rise::pipeline::Stage one[] = {*s};
      manifest = rise::pipeline::run(cfg, out_dir, one);
    } else {
      const rise::pipeline::Stage one[] = {rise::pipeline::Stage::Evaluate};
      manifest = rise::pipeline::run(cfg, out_dir, one);
    }
    report(manifest, out_dir);
    return 0;
  } catch (const rise::pipeline::StageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStage;
  } catch (const rise::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == rise::ErrorCode::ConfigError ? kExitConfig : kExitStage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStage;
  }
}
