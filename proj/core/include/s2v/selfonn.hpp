#pragma once

#include <cstddef>
#include <random>

#include "s2v/autodiff.hpp"
#include "s2v/tensor.hpp"

namespace s2v {

enum class Activation { none, tanh };

/// Shape and geometry of one operational (or transposed operational) layer.
struct OperationalLayerConfig {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel = 1;
  std::size_t q = 3;  ///< Taylor order; q == 1 is an ordinary convolution.
  std::size_t stride = 1;
  std::size_t padding = 0;
  bool transposed = false;
  Activation activation = Activation::tanh;

  /// Throws ConfigError on zero sizes.
  void validate() const;
  /// Throws ShapeError when `input_length` is incompatible with the geometry.
  std::size_t output_length(std::size_t input_length) const;
  /// out*in*K*Q + out.
  std::size_t parameter_count() const;

  friend bool operator==(const OperationalLayerConfig&, const OperationalLayerConfig&) = default;
};

/// Learned Taylor coefficients of a layer of generative neurons.
///
/// `weights` has shape [Q][A][B][K]: slice q (0-based, for power q+1) is an ordinary kernel in the
/// layout of the matching linear primitive, [out][in][K] for forward layers and [in][out][K] for
/// transposed ones. `bias` has shape [out].
template <typename T>
struct GenerativeLayerParams {
  Tensor<T> weights;
  Tensor<T> bias;

  static GenerativeLayerParams zeros(const OperationalLayerConfig& config);
  /// Uniform in [-s, s], s = 1/sqrt(in*K*Q), for every q slice; zero bias.
  static GenerativeLayerParams uniform(const OperationalLayerConfig& config, std::mt19937_64& rng);

  /// The q-th kernel slice (q is 1-based) as a rank-3 tensor.
  Tensor<T> slice(std::size_t q) const;
  void set_slice(std::size_t q, const Tensor<T>& kernel);
};

/// bias + sum_{q=1..Q} conv1d(weights[q], y^q). The constant (q = 0) term is absorbed by the bias.
template <typename T>
FeatureMap<T> generative_forward(const FeatureMap<T>& y, const GenerativeLayerParams<T>& params,
                                 std::size_t stride, std::size_t padding);

/// bias + sum_{q=1..Q} transposed_conv1d(weights[q], y^q).
template <typename T>
FeatureMap<T> transposed_generative_forward(const FeatureMap<T>& y,
                                            const GenerativeLayerParams<T>& params,
                                            std::size_t stride, std::size_t padding);

/// The generative (or transposed generative) sum followed by the configured activation.
template <typename T>
FeatureMap<T> operational_layer_forward(const FeatureMap<T>& y, const OperationalLayerConfig& config,
                                        const GenerativeLayerParams<T>& params);

namespace ops {

/// Differentiable generative sum (no activation). `weights`/`bias` as in GenerativeLayerParams.
template <typename T>
Var generative(Tape<T>& tape, Var y, Var weights, Var bias, std::size_t stride,
               std::size_t padding, bool transposed);

}  // namespace ops

/// Config + parameters. Read-only during forward passes.
template <typename T>
class OperationalLayer {
 public:
  OperationalLayer() = default;
  OperationalLayer(OperationalLayerConfig config, GenerativeLayerParams<T> params);

  const OperationalLayerConfig& config() const noexcept { return config_; }
  const GenerativeLayerParams<T>& params() const noexcept { return params_; }
  GenerativeLayerParams<T>& params() noexcept { return params_; }

  FeatureMap<T> forward(const FeatureMap<T>& y) const;
  /// `weights` and `bias` are this layer's parameters as bound on `tape`.
  Var forward(Tape<T>& tape, Var y, Var weights, Var bias) const;

 private:
  OperationalLayerConfig config_;
  GenerativeLayerParams<T> params_;
};

}  // namespace s2v
