#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "s2v/tensor.hpp"

namespace s2v {

/// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

/// Reverse-mode differentiation tape.
///
/// Every differentiable operation records its output value together with a closure that maps
/// the output gradient to gradients of its parents. Nodes are appended in evaluation order, so a
/// reverse sweep over the node list is a valid topological order. Nodes whose parents need no
/// gradient carry no closure, which is how frozen parameters and inputs skip their backward work.
///
/// A tape is single-use: record, call backward() once, read grad(). It is not thread safe; run one
/// tape per worker.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor<T>& output_grad)>;

  /// Input that needs no gradient.
  Var constant(Tensor<T> value);
  /// Owned leaf whose gradient is wanted.
  Var variable(Tensor<T> value);
  /// Borrowed leaf (typically a model parameter). `value` must outlive the tape.
  Var parameter(const Tensor<T>& value, bool trainable);

  /// Appends an operation result. `fn` is dropped when no parent requires a gradient.
  Var record(Tensor<T> value, std::initializer_list<Var> parents, BackwardFn fn);

  const Tensor<T>& value(Var v) const;
  bool requires_grad(Var v) const;

  /// Gradient accumulator for `v`, zero-filled on first access. For use inside backward closures.
  Tensor<T>& grad_buffer(Var v);

  /// Seeds d(loss)/d(loss) = 1 and sweeps the tape backwards. `loss` must hold a single value.
  void backward(Var loss);

  /// d(loss)/d(v) after backward(). A leaf that received no gradient reports zeros.
  const Tensor<T>& grad(Var v) const;

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> owned;
    const Tensor<T>* borrowed = nullptr;
    Tensor<T> grad;
    bool requires_grad = false;
    bool has_grad = false;
    BackwardFn backward;

    const Tensor<T>& value() const { return borrowed ? *borrowed : owned; }
  };

  const Node& node(Var v) const;
  Node& node(Var v);

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace s2v
