#pragma once

#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace hrm {

/// Dense row-major matrix; the only tensor rank the model needs. A vector is
/// a 1 x n matrix and a scalar is 1 x 1.
template <class T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Handle to a value recorded on a Tape.
struct Var {
  std::uint32_t id = UINT32_MAX;
  bool valid() const { return id != UINT32_MAX; }
};

/// Reverse-mode gradient tape.
///
/// Nodes are appended in evaluation order. A node requires a gradient iff it
/// is a trainable leaf or any of its inputs requires one; only such nodes
/// keep a backward rule. detach() records a fresh constant leaf carrying the
/// same value, which is how segment boundaries cut gradient flow.
///
/// Every recorded value is checked for NaN/Inf.
template <class T>
class Tape {
 public:
  using Backward = std::function<void(Tape&)>;

  Var leaf(Matrix<T> value, bool requires_grad = false);
  Var detach(Var v);
  /// Records an op result; the backward rule is dropped when no input
  /// requires a gradient.
  Var push(Matrix<T> value, std::initializer_list<Var> inputs, Backward backward,
           std::string_view op);

  /// Id the next recorded node will receive; lets a backward rule refer to
  /// its own output.
  Var next() const { return Var{static_cast<std::uint32_t>(nodes_.size())}; }

  const Matrix<T>& value(Var v) const { return nodes_[v.id].value; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  /// Gradient buffer, zero-initialized on first access.
  Matrix<T>& grad(Var v);
  bool has_grad(Var v) const { return nodes_[v.id].grad.size() != 0; }

  /// Seeds d(out)/d(out) = 1 for a 1x1 node (or `seed` for any shape) and
  /// runs every backward rule in reverse order.
  void backward(Var out);
  void backward(Var out, const Matrix<T>& seed);

  std::size_t size() const { return nodes_.size(); }
  std::size_t detach_count() const { return detaches_; }
  void clear();

 private:
  struct Node {
    Matrix<T> value;
    Matrix<T> grad;
    Backward backward;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
  std::size_t detaches_ = 0;
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace hrm
