#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hrm/adam.hpp"
#include "hrm/checkpoint.hpp"
#include "hrm/dataset.hpp"
#include "hrm/model.hpp"

namespace hrm {

/// Reveal counts for simplified replicates are drawn uniformly from
/// [round(min_fraction * blanks), round(max_fraction * blanks)].
struct RevealDistribution {
  double min_fraction = 0.0;
  double max_fraction = 1.0;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  int warmup_steps = 100;
  int batch_size = 32;
  std::int64_t total_steps = 2000;
  std::int64_t checkpoint_interval = 200;
  std::int64_t log_interval = 50;
  int mix_replicates = 4;
  RevealDistribution reveal;
  double q_loss_weight = 0.5;
  bool augment = true;  // random grid symmetry per sample per step
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument on non-positive settings.
  void validate() const;
};

nlohmann::json train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

/// One segment of one sample.
struct SegmentLossRecord {
  double loss = 0.0;  // mean-cell cross entropy
  bool exact = false;
  double q_halt = 0.0;  // logits
  double q_continue = 0.0;
  double halt_target = 0.0;
  double continue_target = 0.0;
};

enum class ActTargetMode {
  /// continue target i = sigmoid(max(q_halt, q_continue) at segment i + 1).
  Bootstrap,
  /// continue target i = max(halt target, continue target) at segment i + 1,
  /// a full backward recursion over the targets themselves.
  Sweep,
};

struct ActTarget {
  double halt = 0.0;
  double cont = 0.0;
};

/// Halt target is the exact-match flag. The last segment is forced to halt:
/// its continue target equals its own halt target. Throws on empty input.
std::vector<ActTarget> act_targets(std::span<const SegmentLossRecord> records,
                                   ActTargetMode mode = ActTargetMode::Bootstrap);

/// Base samples, each followed by `replicates` simplified copies.
Dataset build_mixed_dataset(const Dataset& base, int replicates, const RevealDistribution& reveal,
                            std::uint64_t seed);

/// Optional diagnostics collected by train_step.
template <class T>
struct StepTrace {
  bool keep_gradients = false;
  std::vector<std::size_t> tape_nodes;        // nodes recorded per segment
  std::size_t peak_live_nodes = 0;            // max nodes alive across open tapes
  std::vector<Matrix<T>> entering_states;     // z fed into each segment (detached)
  std::vector<std::vector<Matrix<T>>> segment_gradients;  // per segment, trainable order
  std::vector<Matrix<T>> q_targets;           // per segment, batch x 2
};

struct StepResult {
  std::vector<std::vector<SegmentLossRecord>> records;  // [sample][segment]
  double total_loss = 0.0;
};

/// One optimizer update on the batch. Every sample runs all max_segments
/// segments; the latent entering each segment is detached so each segment
/// loss backpropagates through its own segment only. The summed gradient of
/// (cross entropy + q_loss_weight * Q-loss) over segments drives one Adam step.
/// Throws NonFiniteError naming the first offending sample.
template <class T>
StepResult train_step(std::span<const Sample> batch, ModelParams<T>& params, AdamState<T>& optimizer,
                      const ModelConfig& model, const TrainConfig& train, double learning_rate,
                      StepTrace<T>* trace = nullptr);

/// Batch for a given step: epoch-wise seeded shuffles over the dataset, with
/// a seeded random symmetry per sample when augmentation is on.
std::vector<Sample> batch_for_step(const Dataset& data, const TrainConfig& train, std::int64_t step);

double learning_rate_at(const TrainConfig& train, std::int64_t step);

struct TrainingRun {
  std::vector<std::filesystem::path> checkpoints;
  std::vector<std::int64_t> checkpoint_steps;
  std::filesystem::path log_path;
  ModelParams<float> params;
};

/// Steps at which run_training writes a checkpoint.
std::vector<std::int64_t> checkpoint_schedule(const TrainConfig& train, std::int64_t start_step = 0);

std::string checkpoint_file_name(std::int64_t step);

/// Trains from a fresh init or from `resume` (which must carry optimizer
/// state) up to train.total_steps. Writes ckpt_<step>.bin files and
/// train_log.jsonl under out_dir; every step that is a multiple of
/// log_interval logs that step's per-segment losses and final-segment exact
/// rate, so a resumed run reproduces the same log.
TrainingRun run_training(const Dataset& data, const ModelConfig& model, const TrainConfig& train,
                         const std::filesystem::path& out_dir, std::uint64_t manifest_hash = 0,
                         const std::optional<Checkpoint>& resume = std::nullopt,
                         const std::function<void(const nlohmann::json&)>& on_log = {});

}  // namespace hrm
