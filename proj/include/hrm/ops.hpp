#pragma once

#include <optional>
#include <span>

#include "hrm/tape.hpp"

namespace hrm {

/// x * w (+ bias broadcast over rows).
template <class T>
Var affine(Tape<T>& tape, Var x, Var w, std::optional<Var> bias = std::nullopt);

template <class T>
Var matmul(Tape<T>& tape, Var a, Var b);

template <class T>
Var add(Tape<T>& tape, Var a, Var b);

template <class T>
Var scale(Tape<T>& tape, Var a, T factor);

/// Elementwise product.
template <class T>
Var mul(Tape<T>& tape, Var a, Var b);

template <class T>
Var sigmoid(Tape<T>& tape, Var a);

inline constexpr double kRmsEps = 1e-6;

/// Per row: x / sqrt(mean(x^2) + eps) * gain, gain being 1 x cols.
template <class T>
Var rms_norm(Tape<T>& tape, Var x, Var gain, T eps = static_cast<T>(kRmsEps));

/// out[i] = table[indices[i]].
template <class T>
Var gather_rows(Tape<T>& tape, Var table, std::span<const int> indices);

/// Scaled dot-product attention without masking. Rows are grouped into
/// consecutive sequences of seq_len; attention never crosses a sequence.
/// q, k, v are (batch*seq_len) x width with heads packed along columns.
template <class T>
Var attention(Tape<T>& tape, Var q, Var k, Var v, int heads, int seq_len);

struct AttentionWeights {
  Var wq, wk, wv, wo;
};

template <class T>
Var multi_head_self_attention(Tape<T>& tape, Var x, const AttentionWeights& w, int heads,
                              int seq_len);

struct GluWeights {
  Var gate;    // width x hidden
  Var value;   // width x hidden
  Var output;  // hidden x width
};

/// (sigmoid(x Wg) * (x Wv)) Wo.
template <class T>
Var glu_ffn(Tape<T>& tape, Var x, const GluWeights& w);

/// Mean over rows of -log softmax(logits)[target]. Throws when a target is
/// outside the vocabulary.
template <class T>
Var softmax_cross_entropy(Tape<T>& tape, Var logits, std::span<const int> targets);

/// Mean of each consecutive block of seq_len rows; (rows/seq_len) x cols.
template <class T>
Var mean_pool(Tape<T>& tape, Var x, int seq_len);

/// Binary cross entropy on logits against targets in [0, 1]; summed over
/// columns and averaged over rows.
template <class T>
Var bce_with_logits(Tape<T>& tape, Var logits, const Matrix<T>& targets);

/// Sum of all entries into a 1x1.
template <class T>
Var sum_all(Tape<T>& tape, Var a);

}  // namespace hrm
