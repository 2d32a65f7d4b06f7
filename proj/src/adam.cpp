#include "hrm/adam.hpp"

#include <cmath>
#include <string>

#include "hrm/errors.hpp"

namespace hrm {

template <class T>
AdamState<T> AdamState<T>::zeros_like(std::span<Matrix<T>* const> params) {
  AdamState<T> s;
  for (const Matrix<T>* p : params) {
    s.first_moment.push_back(Matrix<T>::Zero(p->rows(), p->cols()));
    s.second_moment.push_back(Matrix<T>::Zero(p->rows(), p->cols()));
  }
  return s;
}

template <class T>
void adam_step(std::span<Matrix<T>* const> params, std::span<const Matrix<T>> grads,
               AdamState<T>& state, const AdamHyper& hyper) {
  if (grads.size() != params.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " params, " +
                     std::to_string(grads.size()) + " grads, " +
                     std::to_string(state.first_moment.size()) + " moment buffers");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const T b1 = static_cast<T>(hyper.beta1);
  const T b2 = static_cast<T>(hyper.beta2);
  const T c1 = static_cast<T>(1.0 - std::pow(hyper.beta1, t));
  const T c2 = static_cast<T>(1.0 - std::pow(hyper.beta2, t));
  const T lr = static_cast<T>(hyper.learning_rate);
  const T eps = static_cast<T>(hyper.epsilon);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix<T>& p = *params[i];
    const Matrix<T>& g = grads[i];
    Matrix<T>& m = state.first_moment[i];
    Matrix<T>& v = state.second_moment[i];
    if (g.rows() != p.rows() || g.cols() != p.cols() || m.rows() != p.rows() || m.cols() != p.cols()) {
      throw ShapeError("adam_step: shape mismatch at parameter " + std::to_string(i));
    }
    m = b1 * m + (T(1) - b1) * g;
    v.array() = b2 * v.array() + (T(1) - b2) * g.array().square();
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step<float>(std::span<Matrix<float>* const>, std::span<const Matrix<float>>,
                               AdamState<float>&, const AdamHyper&);
template void adam_step<double>(std::span<Matrix<double>* const>, std::span<const Matrix<double>>,
                                AdamState<double>&, const AdamHyper&);

}  // namespace hrm
