#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hrm/grid.hpp"
#include "hrm/ops.hpp"
#include "hrm/tape.hpp"

namespace hrm {

/// Architecture and rollout bounds. max_segments is the outer-loop depth;
/// n_cycles x t_low is the low/high schedule inside one segment.
struct ModelConfig {
  int box_size = 2;
  int width = 64;
  int heads = 4;
  int n_cycles = 2;
  int t_low = 3;
  int max_segments = 8;
  int min_segments = 2;
  double epsilon = 0.0;  // epsilon-greedy halting exploration
  std::uint64_t seed = 0;

  int vocab() const { return box_size * box_size + 1; }
  int seq_len() const { return (box_size * box_size) * (box_size * box_size); }
  int hidden() const { return 2 * width; }

  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;

  static ModelConfig desk_scale() { return {}; }
  static ModelConfig full_scale() { return {3, 512, 8, 2, 6, 16, 2, 0.0, 0}; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

nlohmann::json config_to_json(const ModelConfig& c);
ModelConfig config_from_json(const nlohmann::json& j);

/// One single-layer post-norm encoder block (no biases).
template <class T>
struct EncoderParams {
  Matrix<T> wq, wk, wv, wo;
  Matrix<T> norm1;
  Matrix<T> gate, value, output;
  Matrix<T> norm2;
};

/// Every array of the network. z_init seeds the latent state and is never
/// trained.
template <class T>
struct ModelParams {
  Matrix<T> token_embedding;     // vocab x width
  Matrix<T> position_embedding;  // seq_len x width
  EncoderParams<T> low;
  EncoderParams<T> high;
  Matrix<T> output_proj;  // width x vocab
  Matrix<T> q_weight;     // width x 2 (halt, continue)
  Matrix<T> q_bias;       // 1 x 2
  Matrix<T> z_init;       // 1 x width

  /// Arrays in declaration order; z_init last, included only if asked.
  std::vector<std::pair<std::string, Matrix<T>*>> named(bool include_frozen = true);
  std::vector<std::pair<std::string, const Matrix<T>*>> named(bool include_frozen = true) const;
  std::vector<Matrix<T>*> trainable();

  template <class U>
  ModelParams<U> cast() const;
};

/// Seeded initialization: truncated normals (std 1/sqrt(fan_in) for
/// projections, 1 for embeddings and z_init), unit norm gains, a small
/// output head and a zero Q-head.
template <class T>
ModelParams<T> init_params(const ModelConfig& config);

// ---------------------------------------------------------------------------
// Graph construction on a tape.

struct EncoderVars {
  AttentionWeights attention;
  Var norm1;
  GluWeights ffn;
  Var norm2;
};

struct ParamVars {
  Var token_embedding, position_embedding;
  EncoderVars low, high;
  Var output_proj, q_weight, q_bias;

  /// Same order as ModelParams::trainable().
  std::vector<Var> trainable() const;
};

template <class T>
ParamVars bind_params(Tape<T>& tape, const ModelParams<T>& params, bool trainable);

/// Counts encoder applications inside segment_forward.
struct SegmentCounters {
  int low_calls = 0;
  int high_calls = 0;
};

/// x -> rms_norm(h + glu(h)) with h = rms_norm(x + attention(x)).
template <class T>
Var encoder_block(Tape<T>& tape, Var x, const EncoderVars& w, int heads, int seq_len);

/// token_embedding[token] + position_embedding[position] for a batch of
/// grids laid out as consecutive seq_len-row blocks.
template <class T>
Var embed_tokens(Tape<T>& tape, const ParamVars& p, std::span<const int> tokens, int seq_len);

/// One segment: z_L starts at zero; for each of n_cycles, t_low low-level
/// updates z_L <- f_L(z_L + z_H + x) then one high-level update
/// z_H <- f_H(z_H + z_L). Returns the final z_H.
template <class T>
Var segment_graph(Tape<T>& tape, Var z, Var x_emb, const ParamVars& p, const ModelConfig& config,
                  SegmentCounters* counters = nullptr);

template <class T>
Var output_logits(Tape<T>& tape, Var z, const ParamVars& p);

/// Mean-pool over each sequence, then affine to (q_halt, q_continue).
template <class T>
Var q_logits(Tape<T>& tape, Var z, const ParamVars& p, int seq_len);

// ---------------------------------------------------------------------------
// Value-level operations on single grids.

template <class T>
struct LatentState {
  Matrix<T> z;  // seq_len x width
};

struct HaltDecision {
  double q_halt = 0.0;
  double q_continue = 0.0;
  bool halted = false;
};

template <class T>
struct Decoded {
  Matrix<T> logits;
  PuzzleGrid prediction;
};

template <class T>
Matrix<T> embed_input(const PuzzleGrid& x, const ModelParams<T>& params, const ModelConfig& config);

template <class T>
LatentState<T> initial_state(const ModelParams<T>& params, const ModelConfig& config);

template <class T>
LatentState<T> segment_forward(const LatentState<T>& z, const Matrix<T>& x_emb,
                               const ModelParams<T>& params, const ModelConfig& config,
                               SegmentCounters* counters = nullptr);

template <class T>
Decoded<T> decode_output(const LatentState<T>& z, const ModelParams<T>& params,
                         const ModelConfig& config);

/// Scores only; halted is q_halt > q_continue.
template <class T>
HaltDecision q_head(const LatentState<T>& z, const ModelParams<T>& params, const ModelConfig& config);

/// Row-wise argmax (lowest token on ties) of stacked logits, one grid per
/// seq_len rows.
template <class T>
std::vector<PuzzleGrid> argmax_grids(const Matrix<T>& logits, int box_size);

std::vector<int> grid_tokens(const PuzzleGrid& g);

}  // namespace hrm
