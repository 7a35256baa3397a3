#pragma once

#include <cstddef>
#include <span>

#include "s2v/tensor.hpp"

namespace s2v {

/// floor((length + 2*padding - kernel)/stride) + 1. Throws ShapeError when the kernel does not fit.
std::size_t conv_output_length(std::size_t length, std::size_t kernel, std::size_t stride,
                               std::size_t padding);

/// (length - 1)*stride + kernel - 2*padding. Throws ShapeError when that is not positive.
std::size_t transposed_output_length(std::size_t length, std::size_t kernel, std::size_t stride,
                                     std::size_t padding);

// Direct-loop primitives. Summation order per output sample is fixed: bias first, then input
// channels outer and taps inner, so results are bit-reproducible.

/// Cross-correlation with symmetric zero padding.
/// x: [C_in x L], weights: [C_out x C_in x K], bias: [C_out] -> [C_out x L_out].
template <typename T>
FeatureMap<T> conv1d(const FeatureMap<T>& x, const Tensor<T>& weights, std::span<const T> bias,
                     std::size_t stride, std::size_t padding);

/// Adjoint of conv1d for the same stride and padding.
/// x: [C_in x L], weights: [C_in x C_out x K], bias: [C_out] -> [C_out x L_out].
template <typename T>
FeatureMap<T> transposed_conv1d(const FeatureMap<T>& x, const Tensor<T>& weights,
                                std::span<const T> bias, std::size_t stride, std::size_t padding);

template <typename T>
FeatureMap<T> elementwise_power(const FeatureMap<T>& x, int q);

template <typename T>
FeatureMap<T> tanh_activation(const FeatureMap<T>& x);

/// Gradients of conv1d. `dx`, `dweights`, `dbias` may be null; non-null targets are accumulated into.
template <typename T>
void conv1d_backward(const FeatureMap<T>& x, const Tensor<T>& weights, const FeatureMap<T>& dy,
                     std::size_t stride, std::size_t padding, FeatureMap<T>* dx,
                     Tensor<T>* dweights, std::span<T> dbias);

template <typename T>
void transposed_conv1d_backward(const FeatureMap<T>& x, const Tensor<T>& weights,
                                const FeatureMap<T>& dy, std::size_t stride, std::size_t padding,
                                FeatureMap<T>* dx, Tensor<T>* dweights, std::span<T> dbias);

/// Unfolds x [C x Lx] into columns [(C*K) x cols] with cols[c*K + r][m] = x[c][m*stride + r - padding]
/// (zero outside the signal).
template <typename T>
void im2col(std::span<const T> x, std::size_t channels, std::size_t length, std::size_t kernel,
            std::size_t stride, std::size_t padding, std::size_t cols, std::span<T> out);

/// Adjoint of im2col: scatter-adds columns back into out [C x Lx].
template <typename T>
void col2im(std::span<const T> columns, std::size_t channels, std::size_t length,
            std::size_t kernel, std::size_t stride, std::size_t padding, std::size_t cols,
            std::span<T> out);

}  // namespace s2v
