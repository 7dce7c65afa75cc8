#pragma once

#include <memory>
#include <string>
#include <vector>

#include "safespec/config.hpp"
#include "safespec/env.hpp"
#include "safespec/spi.hpp"
#include "safespec/tabular.hpp"

namespace safespec {

struct RunConfig {
  std::string task_path;                      // empty: use the preset's built-in task
  std::string env_preset = "cartpole-balance";
  Algorithm algorithm = Algorithm::smfpi;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::string out_dir = "runs/out";
  SpiConfig spi;
  int policy_hidden = 32;
  int policy_layers = 2;
  double log_std_init = 0.0;
  ConfigFile raw;  // snapshot of the parsed file, reemitted for reproducibility
};

Algorithm algorithm_from_name(const std::string& name);
const char* algorithm_name(Algorithm a);
Shaping shaping_from_name(const std::string& name);

// Reads the config file; CLI flags may override fields afterwards.
RunConfig load_run_config(const std::string& path);

// Task text for the run: the file at task_path, or the preset default.
std::string task_text_for(const RunConfig& cfg);

std::unique_ptr<Env> make_env(const std::string& preset, const ConfigFile& overrides);

MlpConfig policy_config_for(const RunConfig& cfg, const Env& env);

struct SeedArtifacts {
  std::uint64_t seed = 0;
  std::string metrics_path;
  std::string gates_path;
  std::string checkpoint_path;
  TrainResult result;
};

// Trains one seed; writes metrics CSV, gate-decision CSV, and checkpoints
// under out_dir. Deterministic: identical (config, seed) pairs produce
// byte-identical files.
SeedArtifacts run_seed(const RunConfig& cfg, std::uint64_t seed);

// All seeds plus the aggregate statistics file (mean/std across seeds per
// epoch, recomputable from the per-seed CSVs).
std::vector<SeedArtifacts> run_training(const RunConfig& cfg);

// Recomputes the aggregate rows from per-seed metric CSV files.
void write_aggregate(const std::string& out_path, const std::vector<std::string>& seed_csvs);

}  // namespace safespec
