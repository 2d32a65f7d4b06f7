#include "hrm/tape.hpp"

#include <string>

#include "hrm/errors.hpp"

namespace hrm {

namespace {

template <class T>
void check_finite(const Matrix<T>& m, std::string_view op) {
  if (!m.allFinite()) throw NonFiniteError("non-finite value produced by " + std::string(op));
}

}  // namespace

template <class T>
Var Tape<T>::leaf(Matrix<T> value, bool requires_grad) {
  check_finite(value, "leaf");
  nodes_.push_back(Node{std::move(value), {}, {}, requires_grad});
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <class T>
Var Tape<T>::detach(Var v) {
  ++detaches_;
  Matrix<T> copy = nodes_[v.id].value;
  nodes_.push_back(Node{std::move(copy), {}, {}, false});
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <class T>
Var Tape<T>::push(Matrix<T> value, std::initializer_list<Var> inputs, Backward backward,
                  std::string_view op) {
  check_finite(value, op);
  bool needs = false;
  for (Var in : inputs) needs = needs || nodes_[in.id].requires_grad;
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backward) : Backward{}, needs});
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <class T>
Matrix<T>& Tape<T>::grad(Var v) {
  Node& node = nodes_[v.id];
  if (node.grad.size() == 0) node.grad = Matrix<T>::Zero(node.value.rows(), node.value.cols());
  return node.grad;
}

template <class T>
void Tape<T>::backward(Var out) {
  const Matrix<T>& v = value(out);
  if (v.rows() != 1 || v.cols() != 1) throw ShapeError("backward() without a seed needs a scalar");
  backward(out, Matrix<T>::Ones(1, 1));
}

template <class T>
void Tape<T>::backward(Var out, const Matrix<T>& seed) {
  grad(out) += seed;
  for (std::size_t i = out.id + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (node.backward && node.grad.size() != 0) node.backward(*this);
  }
}

template <class T>
void Tape<T>::clear() {
  nodes_.clear();
  detaches_ = 0;
}

template class Tape<float>;
template class Tape<double>;

}  // namespace hrm
