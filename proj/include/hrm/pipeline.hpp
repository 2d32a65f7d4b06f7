#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hrm/analysis.hpp"
#include "hrm/inference.hpp"
#include "hrm/model.hpp"
#include "hrm/training.hpp"

namespace hrm {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kManifestSchema = 1;

/// Everything an end-to-end experiment depends on. Seeds for the dataset,
/// training and evaluation stages are derived from `seed` by name.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  ModelConfig model;
  TrainConfig train;
  int train_count = 500;
  int eval_count = 200;
  int clues = 4;
  int bootstrap_count = 10;
  int relabel_k = 9;
  bool train_unmixed = true;  // also train the no-mixing baseline run
};

nlohmann::json experiment_to_json(const ExperimentConfig& c);
ExperimentConfig experiment_from_json(const nlohmann::json& j);

/// FNV-1a of the canonical JSON of the config; embedded in every artifact.
std::uint64_t manifest_hash(const ExperimentConfig& c);

struct StageSeeds {
  std::uint64_t train_data, eval_data, mixing, training, evaluation, probes;
};
StageSeeds stage_seeds(std::uint64_t root);

struct RunSummary {
  std::string name;
  std::vector<std::string> checkpoints;  // relative to the output directory
  std::vector<double> segment_loss;      // final checkpoint, mean over the eval set
  double final_accuracy = 0.0;           // last segment, no halting
  StabilityReport fully_revealed;
  StabilityReport one_cell;
  StabilityReport one_row;
  std::vector<int> mode_counts;          // indexed by Mode
};

struct PipelineResult {
  EvalReport report;
  std::vector<RunSummary> runs;
  nlohmann::json manifest;
};

using Logger = std::function<void(const std::string&)>;

/// dataset -> train (unmixed and mixed) -> evaluate. Writes under out_dir:
/// data/*.jsonl, runs/<name>/ckpt_*.bin and train_log.jsonl, report.json,
/// report.csv, analysis.json and manifest.json. All paths recorded in the
/// outputs are relative, so two runs from one config match byte for byte.
PipelineResult run_pipeline(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                            const std::string& command_line = {}, const Logger& log = {});

/// Per-segment mean cross entropy over a dataset (no halting).
std::vector<double> segment_losses(const Dataset& data, const ModelParams<float>& params, const ModelConfig& config);

nlohmann::json run_summary_to_json(const RunSummary& r);

}  // namespace hrm
