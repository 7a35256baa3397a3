#include "s2v/autodiff.hpp"

#include "s2v/error.hpp"

namespace s2v {

template <typename T>
const typename Tape<T>::Node& Tape<T>::node(Var v) const {
  if (v.id >= nodes_.size()) {
    throw UsageError("variable " + std::to_string(v.id) + " was not recorded on this tape");
  }
  return nodes_[v.id];
}

template <typename T>
typename Tape<T>::Node& Tape<T>::node(Var v) {
  return const_cast<Node&>(std::as_const(*this).node(v));
}

template <typename T>
Var Tape<T>::constant(Tensor<T> value) {
  Node n;
  n.owned = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

template <typename T>
Var Tape<T>::variable(Tensor<T> value) {
  Node n;
  n.owned = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

template <typename T>
Var Tape<T>::parameter(const Tensor<T>& value, bool trainable) {
  Node n;
  n.borrowed = &value;
  n.requires_grad = trainable;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

template <typename T>
Var Tape<T>::record(Tensor<T> value, std::initializer_list<Var> parents, BackwardFn fn) {
  if (backward_done_) throw UsageError("cannot record on a tape after backward()");
  bool needs = false;
  for (Var p : parents) needs = needs || node(p).requires_grad;
  Node n;
  n.owned = std::move(value);
  n.requires_grad = needs;
  if (needs) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

template <typename T>
const Tensor<T>& Tape<T>::value(Var v) const {
  return node(v).value();
}

template <typename T>
bool Tape<T>::requires_grad(Var v) const {
  return node(v).requires_grad;
}

template <typename T>
Tensor<T>& Tape<T>::grad_buffer(Var v) {
  Node& n = node(v);
  if (!n.has_grad) {
    n.grad = Tensor<T>(n.value().shape());
    n.has_grad = true;
  }
  return n.grad;
}

template <typename T>
void Tape<T>::backward(Var loss) {
  if (nodes_.empty()) throw UsageError("backward() called on an empty tape");
  if (backward_done_) throw UsageError("backward() already ran on this tape");
  Node& out = node(loss);
  if (out.value().size() != 1) {
    throw UsageError("backward() needs a scalar loss, got shape " + to_string(out.value().shape()));
  }
  grad_buffer(loss)[0] = T{1};
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.backward) continue;
    n.backward(*this, n.grad);
  }
  backward_done_ = true;
}

template <typename T>
const Tensor<T>& Tape<T>::grad(Var v) const {
  if (!backward_done_) throw UsageError("grad() requested before backward()");
  const Node& n = node(v);
  if (!n.requires_grad) {
    throw UsageError("variable " + std::to_string(v.id) + " does not require a gradient");
  }
  if (!n.has_grad) {
    auto& mutable_node = const_cast<Node&>(n);
    mutable_node.grad = Tensor<T>(n.value().shape());
    mutable_node.has_grad = true;
  }
  return n.grad;
}

template class Tape<float>;
template class Tape<double>;

}  // namespace s2v
