#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hrm/checkpoint.hpp"
#include "hrm/dataset.hpp"
#include "hrm/model.hpp"
#include "hrm/rng.hpp"
#include "hrm/symmetry.hpp"

namespace hrm {

// ---------------------------------------------------------------------------
// Batched rollouts.

template <class T>
struct SampleRollout {
  Matrix<T> initial;                 // z entering segment 1 (kept with states)
  std::vector<Matrix<T>> states;     // z after each segment (only when kept)
  std::vector<PuzzleGrid> predictions;
  std::vector<HaltDecision> q;       // halted = q_halt > q_continue
  std::vector<double> loss;          // mean-cell cross entropy, when targets given
};

struct RolloutOptions {
  int segments = -1;  // -1: config.max_segments
  bool keep_states = false;
};

/// Runs every segment for each input without halting. Inputs are processed in
/// fixed-size chunks stacked as rows. `initial` overrides the starting latent
/// per sample (seq_len x width each); `targets` enables the per-segment loss.
template <class T>
std::vector<SampleRollout<T>> rollout(std::span<const PuzzleGrid> inputs, const ModelParams<T>& params,
                                      const ModelConfig& config, const RolloutOptions& options = {},
                                      std::span<const PuzzleGrid> targets = {},
                                      std::span<const Matrix<T>> initial = {});

// ---------------------------------------------------------------------------
// Single passes and voting.

struct PassResult {
  PuzzleGrid prediction = PuzzleGrid(PuzzleGrid::kMinBox);
  bool halted = false;
  int segments_used = 0;
  int energy = 0;
  std::string source;
};

/// Applies the halting rule to a full rollout: the first segment >= m with
/// q_halt > q_continue. Without a halt signal the pass uses segment M and is
/// marked unhalted. With epsilon > 0 and an rng, each eligible decision is
/// replaced by a coin flip with probability epsilon.
template <class T>
PassResult pass_from_rollout(const SampleRollout<T>& r, const ModelConfig& config, std::string source,
                             Rng* rng = nullptr);

/// ACT-halted inference on one grid. epsilon-greedy exploration applies only
/// when config.epsilon > 0, seeded by rng_seed.
template <class T>
PassResult run_inference(const PuzzleGrid& x, const ModelParams<T>& params, const ModelConfig& config,
                         std::uint64_t rng_seed = 0);

struct VoteOutcome {
  PuzzleGrid prediction = PuzzleGrid(PuzzleGrid::kMinBox);
  bool fallback = false;  // no pass halted
  int votes = 0;
  int halted = 0;
  int winner = 0;  // index into the pool
};

/// Most frequent full grid among halted passes; ties go to lower energy, then
/// to the earlier pass. With no halted pass, the first prediction is returned
/// with fallback set. Throws std::invalid_argument on an empty pool.
VoteOutcome majority_vote(std::span<const PassResult> results);

struct VoteReport {
  VoteOutcome outcome;
  std::vector<PassResult> pool;
};

/// Pool over transforms x parameter sets for each input, ordered by
/// (transform index, parameter index). Predictions are mapped back through
/// the inverse transform.
template <class T>
std::vector<std::vector<PassResult>> pass_pools(std::span<const PuzzleGrid> inputs,
                                                std::span<const ModelParams<T>* const> members,
                                                std::span<const GridTransform> transforms,
                                                const ModelConfig& config);

template <class T>
VoteReport multipass_relabel(const PuzzleGrid& x, const ModelParams<T>& params, int k,
                             const ModelConfig& config, std::uint64_t rng_seed);

template <class T>
VoteReport ensemble_bootstrap(const PuzzleGrid& x, std::span<const ModelParams<T>* const> members,
                              const ModelConfig& config);

template <class T>
VoteReport combined_augmented_inference(const PuzzleGrid& x, std::span<const ModelParams<T>* const> members,
                                        int k, const ModelConfig& config, std::uint64_t rng_seed);

/// Loads checkpoints in order; failures name the offending path.
std::vector<Checkpoint> load_checkpoints(std::span<const std::filesystem::path> paths);

/// Up to `count` checkpoints from the later half of a run, evenly spaced and
/// always including the last one. Returns indices into the input.
std::vector<std::size_t> select_bootstrap(std::size_t checkpoints, std::size_t count = 10);

// ---------------------------------------------------------------------------
// Ablation report.

struct EvalSettings {
  int relabel_k = 9;
  std::uint64_t seed = 0;
  bool include_pools = true;
};

struct RunCheckpoints {
  std::vector<ModelParams<float>> members;  // bootstrap set; the last one is the baseline
  std::vector<std::string> names;
};

struct AblationRow {
  std::string label;
  int correct = 0;
  int total = 0;
  int pool_size = 0;
  int fallbacks = 0;
  double accuracy() const { return total > 0 ? static_cast<double>(correct) / total : 0.0; }
};

struct EvalReport {
  std::vector<AblationRow> rows;
  nlohmann::json detail;  // per-member accuracies and per-sample pools
};

/// Exact accuracy (full-grid match, fallbacks counted as returned) for the
/// applicable rows of Baseline, +Bootstrap, +Relabel, +Data Mixing,
/// +Data Mixing+Bootstrap, +Data Mixing+Relabel, +All. `unmixed` or `mixed`
/// may be empty; rows needing a missing run are omitted.
EvalReport evaluate_ablation(const Dataset& data, const RunCheckpoints& unmixed, const RunCheckpoints& mixed,
                             const ModelConfig& config, const EvalSettings& settings);

nlohmann::json report_to_json(const EvalReport& report, const std::string& manifest_hash);
std::string report_to_csv(const EvalReport& report);
/// Fixed-width text table for terminals.
std::string render_table(const EvalReport& report);

}  // namespace hrm
