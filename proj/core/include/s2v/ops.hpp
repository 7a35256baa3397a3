#pragma once

#include <cstddef>

#include "s2v/autodiff.hpp"

// Differentiable operations recorded on a Tape. Shapes follow the value-level primitives in
// conv.hpp; scalars are rank-1 tensors of size 1.
namespace s2v::ops {

template <typename T>
Var conv1d(Tape<T>& tape, Var x, Var weights, Var bias, std::size_t stride, std::size_t padding);

template <typename T>
Var transposed_conv1d(Tape<T>& tape, Var x, Var weights, Var bias, std::size_t stride,
                      std::size_t padding);

template <typename T>
Var power(Tape<T>& tape, Var x, int q);

template <typename T>
Var tanh(Tape<T>& tape, Var x);

template <typename T>
Var add(Tape<T>& tape, Var a, Var b);

template <typename T>
Var scale(Tape<T>& tape, Var x, T factor);

template <typename T>
Var sum(Tape<T>& tape, Var x);

/// Channel-wise concatenation of two feature maps of equal length.
template <typename T>
Var concat_channels(Tape<T>& tape, Var a, Var b);

/// Any tensor to rank 1.
template <typename T>
Var flatten(Tape<T>& tape, Var x);

/// weights [out x in] * x [in] + bias [out].
template <typename T>
Var dense(Tape<T>& tape, Var x, Var weights, Var bias);

/// mean(|a - b|) over all elements.
template <typename T>
Var mean_abs_diff(Tape<T>& tape, Var a, Var b);

/// mean((a - b)^2) over all elements.
template <typename T>
Var mean_squared_diff(Tape<T>& tape, Var a, Var b);

}  // namespace s2v::ops
