#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "stcooc/eval.hpp"
#include "stcooc/pipeline.hpp"
#include "stcooc/svm.hpp"
#include "stcooc/synth.hpp"

namespace stcooc {

struct TrainingConfig {
  SgdParams sgd;
  int epochs = 5;
  int batch_size = 16;
  double lr_decay = 1.0;
};

struct ExperimentConfig {
  std::filesystem::path work_dir = "work";
  std::uint64_t seed = 1;
  int jobs = 1;
  /// Either a generator spec (dataset goes to work_dir/data) or a manifest.
  std::optional<SynthSpec> synth;
  std::optional<std::filesystem::path> manifest;
  std::vector<System> systems;
  PipelineConfig pipeline;
  TrainingConfig training;
  SvmParams svm;
};

/// Parses a JSON config. Unknown keys and type errors throw ConfigError naming
/// the field path (e.g. "training.epochs"). Relative paths resolve against
/// `base_dir`.
ExperimentConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Applies a new seed to the run and, unless it pins its own, the generator.
void override_seed(ExperimentConfig& config, std::uint64_t seed);

std::filesystem::path manifest_path(const ExperimentConfig& config);
std::filesystem::path flow_dir(const ExperimentConfig& config);
std::filesystem::path model_path(const ExperimentConfig& config, Stream stream);
std::filesystem::path svm_path(const ExperimentConfig& config, System system);
std::filesystem::path feature_dir(const ExperimentConfig& config, System system, const std::string& split);

/// Streams whose networks the configured systems need, in training order.
std::vector<Stream> required_streams(const std::vector<System>& systems);

Manifest stage_gen(const ExperimentConfig& config);
void stage_flow(const ExperimentConfig& config);
/// Returns the per-epoch training loss of each trained stream.
std::vector<std::pair<Stream, TrainReport>> stage_train(const ExperimentConfig& config);
void stage_fuse(const ExperimentConfig& config);
void stage_fit_svm(const ExperimentConfig& config);
std::vector<EvalReport> stage_eval(const ExperimentConfig& config);
/// Re-renders summary.txt / summary.json from reports/<system>.json.
std::vector<EvalReport> stage_report(const ExperimentConfig& config);

/// Every stage in order; returns the per-system reports.
std::vector<EvalReport> run_experiment(const ExperimentConfig& config);

/// Loads the networks and SVMs that exist under work_dir.
Models load_models(const ExperimentConfig& config);

}  // namespace stcooc
