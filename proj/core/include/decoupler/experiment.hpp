#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "decoupler/decouple.hpp"

namespace decoupler {

enum class ExperimentKind { TwoQubitHaar, FourQubitHaar, FourQubitSpindle, Custom };
enum class Method { Decoupling, DirectHst, DirectLhst };

std::string to_string(ExperimentKind kind);
std::string to_string(Method method);

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::TwoQubitHaar;
  std::vector<std::uint64_t> seeds;
  Method method = Method::Decoupling;
  EvaluatorSpec evaluator;
  /// Step-size and decay overrides shared by every phase.
  double alpha = 0.01;
  double beta1 = 0.8;
  double beta2 = 0.9;
  double epsilon = 1e-8;
  int layers_outer = 4;
  int layers_inner = 2;
  double cost_threshold = 1e-4;
  double final_threshold = 1e-8;
  int max_iters = 3000;
  int patience = 200;
  bool joint_final = false;
  std::uint64_t target_seed = 0;
  /// One target for every seed, or target_seed + seed per run.
  bool shared_target = true;
  /// Custom experiments: circuit JSON whose unitary is the target.
  std::filesystem::path target_file;
  std::filesystem::path output_dir = "out";
  /// Worker threads; 0 uses the available hardware parallelism.
  int jobs = 0;
  bool write_wall_time = true;

  static ExperimentConfig from_json(const nlohmann::json& doc);
  /// Reads and validates a config file; syntax errors carry line context.
  static ExperimentConfig load(const std::filesystem::path& path);
  void validate() const;
};

/// Plan with the config's layer counts and stopping rules applied.
DecouplingPlan plan_for(const ExperimentConfig& cfg);
/// ADAM settings of the direct baseline: the plan's final-phase rules with
/// the whole budget of the plan (max_iters times its phase count).
AdamConfig direct_adam_for(const ExperimentConfig& cfg);
UnitaryMatrix target_for(const ExperimentConfig& cfg, std::uint64_t seed);

/// Quantile with linear interpolation between order statistics.
double quantile(std::vector<double> values, double q);

struct QuartileBand {
  std::vector<double> q1;
  std::vector<double> median;
  std::vector<double> q3;
};

/// Per-row quartiles; shorter series are carried forward at their last value.
QuartileBand quartile_band(const std::vector<std::vector<double>>& series);

struct RunSummary {
  ExperimentConfig config;
  std::vector<CompiledResult> results;
  QuartileBand fidelity_band;

  double median_final_fidelity() const;
  nlohmann::json to_json() const;
};

CompiledResult run_single(const ExperimentConfig& cfg, std::uint64_t seed);

/// Runs all seeds (bounded worker pool of cfg.jobs threads), ordered by seed
/// position in the config.
RunSummary run_experiment(const ExperimentConfig& cfg);

/// trace_seed<k>.csv per seed, summary.json and curves.svg under output_dir.
void write_outputs(const RunSummary& summary);

}  // namespace decoupler
