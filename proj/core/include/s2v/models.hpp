#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "s2v/autodiff.hpp"
#include "s2v/label.hpp"
#include "s2v/selfonn.hpp"

namespace s2v {

/// Hyperparameters of the default sound-to-vibration U-Net.
struct OpUNetConfig {
  std::size_t segment_length = 4096;
  double sample_rate_hz = 4096.0;
  std::array<std::size_t, 5> widths{32, 32, 48, 64, 80};
  std::size_t encoder_kernel = 5;
  std::size_t decoder_kernel = 4;
  std::size_t stride = 2;
  std::size_t q = 3;
};

/// 1D operational U-Net: five strided operational encoder layers, five transposed operational
/// decoder layers. Decoder stage d >= 2 consumes [previous decoder output ; encoder stage 6-d]
/// stacked along channels; the last decoder stage is the 1-channel tanh output projection.
class OpUNet {
 public:
  static constexpr std::size_t kStages = 5;

  /// Validates the wiring and that `segment_length` survives the stride chain; throws ConfigError.
  OpUNet(std::vector<OperationalLayerConfig> layers, std::size_t segment_length,
         double sample_rate_hz);

  static std::vector<OperationalLayerConfig> layer_configs(const OpUNetConfig& config);
  static OpUNet build(const OpUNetConfig& config, std::uint64_t seed);
  /// All-zero weights and biases.
  static OpUNet zeros(const OpUNetConfig& config);

  std::size_t segment_length() const noexcept { return segment_length_; }
  double sample_rate_hz() const noexcept { return sample_rate_hz_; }
  const std::vector<OperationalLayer<float>>& layers() const noexcept { return layers_; }
  std::vector<OperationalLayer<float>>& layers() noexcept { return layers_; }

  /// 1 x L sound -> 1 x L synthesized vibration in (-1, 1).
  FeatureMap<float> forward(const FeatureMap<float>& sound) const;

  /// Registers every parameter on `tape` in descriptor order.
  std::vector<Var> bind(Tape<float>& tape, bool trainable) const;
  Var forward(Tape<float>& tape, Var sound, std::span<const Var> bound) const;

  std::vector<Tensor<float>*> parameters();
  std::vector<const Tensor<float>*> parameters() const;

  /// Human-readable per-layer table with parameter counts.
  std::string describe() const;

 private:
  std::vector<OperationalLayer<float>> layers_;
  std::size_t segment_length_;
  double sample_rate_hz_;
};

struct DenseLayerConfig {
  std::size_t in_features = 1;
  std::size_t out_features = 1;
  Activation activation = Activation::tanh;

  std::size_t parameter_count() const { return out_features * in_features + out_features; }
  friend bool operator==(const DenseLayerConfig&, const DenseLayerConfig&) = default;
};

struct DenseLayer {
  DenseLayerConfig config;
  Tensor<float> weights;  ///< [out][in]
  Tensor<float> bias;     ///< [out]
};

/// Hyperparameters of the compact Self-ONN fault detector.
struct FaultClassifierConfig {
  std::size_t segment_length = 4096;
  double sample_rate_hz = 4096.0;
  std::array<std::size_t, 5> kernels{81, 41, 21, 7, 7};
  std::array<std::size_t, 5> strides{8, 4, 2, 2, 2};
  std::size_t channels = 16;
  std::size_t hidden = 32;
  std::size_t q = 3;
};

/// Five operational layers with (K-1)/2 padding, flatten, two dense layers, tanh everywhere.
/// Output index 0 scores "healthy", index 1 scores "faulty".
class FaultClassifier {
 public:
  /// Throws ConfigError unless the flattened feature map matches the first dense layer.
  FaultClassifier(std::vector<OperationalLayerConfig> conv_layers,
                  std::vector<DenseLayerConfig> dense_layers, std::size_t segment_length,
                  double sample_rate_hz);

  static FaultClassifier build(const FaultClassifierConfig& config, std::uint64_t seed);

  std::size_t segment_length() const noexcept { return segment_length_; }
  double sample_rate_hz() const noexcept { return sample_rate_hz_; }
  const std::vector<OperationalLayer<float>>& conv_layers() const noexcept { return conv_; }
  std::vector<OperationalLayer<float>>& conv_layers() noexcept { return conv_; }
  const std::vector<DenseLayer>& dense_layers() const noexcept { return dense_; }
  std::vector<DenseLayer>& dense_layers() noexcept { return dense_; }

  std::array<float, 2> forward(const FeatureMap<float>& vibration) const;

  std::vector<Var> bind(Tape<float>& tape, bool trainable) const;
  /// Returns the rank-1 size-2 score vector.
  Var forward(Tape<float>& tape, Var vibration, std::span<const Var> bound) const;

  std::vector<Tensor<float>*> parameters();
  std::vector<const Tensor<float>*> parameters() const;

  std::string describe() const;

 private:
  std::vector<OperationalLayer<float>> conv_;
  std::vector<DenseLayer> dense_;
  std::size_t segment_length_;
  double sample_rate_hz_;
};

/// Sum of out*in*K*Q + out over operational layers and out*in + out over dense layers.
std::size_t parameter_count(const OpUNet& model);
std::size_t parameter_count(const FaultClassifier& model);

/// Argmax of the two class scores (ties go to healthy).
Label predict_label(const std::array<float, 2>& scores);

/// healthy -> (+1, -1), faulty -> (-1, +1).
std::array<float, 2> target_encoding(Label label);

/// Wraps a sample vector as a 1 x N feature map.
FeatureMap<float> as_feature_map(std::span<const float> samples);

}  // namespace s2v
