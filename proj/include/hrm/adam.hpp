#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hrm/tape.hpp"

namespace hrm {

struct AdamHyper {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <class T>
struct AdamState {
  std::vector<Matrix<T>> first_moment;
  std::vector<Matrix<T>> second_moment;
  std::int64_t step = 0;

  /// Zero moments shaped like params.
  static AdamState zeros_like(std::span<Matrix<T>* const> params);
};

/// One bias-corrected Adam update applied in place. params, grads and the
/// moment buffers are matched by position and must agree in shape.
template <class T>
void adam_step(std::span<Matrix<T>* const> params, std::span<const Matrix<T>> grads,
               AdamState<T>& state, const AdamHyper& hyper);

}  // namespace hrm
