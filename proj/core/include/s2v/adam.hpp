#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "s2v/tensor.hpp"

namespace s2v {

struct AdamHyperparameters {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moment estimates for one parameter set. Shapes are fixed by the first step.
template <typename T>
struct AdamState {
  AdamHyperparameters hyper;
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
  std::uint64_t t = 0;
};

/// One bias-corrected Adam update:
///   m = b1*m + (1-b1)*g,  v = b2*v + (1-b2)*g^2,
///   p -= lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps).
/// Throws ShapeError when params, grads and state disagree.
template <typename T>
void adam_step(std::span<Tensor<T>* const> params, std::span<const Tensor<T>> grads,
               AdamState<T>& state, double learning_rate);

}  // namespace s2v
