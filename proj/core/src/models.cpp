#include "s2v/models.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "s2v/error.hpp"
#include "s2v/ops.hpp"

namespace s2v {
namespace {

std::size_t checked_output_length(const OperationalLayerConfig& c, std::size_t length,
                                  std::size_t index) {
  try {
    return c.output_length(length);
  } catch (const ShapeError& e) {
    throw ConfigError("layer " + std::to_string(index) + ": " + e.what());
  }
}

std::string layer_row(std::size_t index, const OperationalLayerConfig& c, std::size_t in_len,
                      std::size_t out_len) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%3zu  %-12s %5zu %5zu %4zu %6zu %4zu %3zu %7zu -> %-7zu %9zu\n",
                index, c.transposed ? "t-operational" : "operational", c.in_channels,
                c.out_channels, c.kernel, c.stride, c.padding, c.q, in_len, out_len,
                c.parameter_count());
  return buf;
}

const char* kTableHeader =
    "  #  kind            in   out    K stride  pad   Q  length            params\n";

}  // namespace

// ---------------------------------------------------------------------------------------------
// OpUNet

OpUNet::OpUNet(std::vector<OperationalLayerConfig> configs, std::size_t segment_length,
               double sample_rate_hz)
    : segment_length_(segment_length), sample_rate_hz_(sample_rate_hz) {
  if (configs.size() != 2 * kStages) {
    throw ConfigError("Op-UNet needs exactly 10 operational layers, got " +
                      std::to_string(configs.size()));
  }
  for (std::size_t i = 0; i < configs.size(); ++i) {
    configs[i].validate();
    if (configs[i].transposed != (i >= kStages)) {
      throw ConfigError("Op-UNet layer " + std::to_string(i) +
                        (i < kStages ? " must be a forward" : " must be a transposed") +
                        " operational layer");
    }
  }
  if (configs[0].in_channels != 1) throw ConfigError("Op-UNet input must have 1 channel");
  if (configs.back().out_channels != 1) throw ConfigError("Op-UNet output must have 1 channel");
  std::size_t stride_product = 1;
  for (std::size_t i = 0; i < kStages; ++i) stride_product *= configs[i].stride;
  if (segment_length == 0 || segment_length % stride_product != 0) {
    throw ConfigError("segment length " + std::to_string(segment_length) +
                      " is not divisible by the encoder stride product " +
                      std::to_string(stride_product));
  }

  std::vector<std::size_t> enc_len(kStages), enc_ch(kStages);
  std::size_t len = segment_length, ch = 1;
  for (std::size_t i = 0; i < kStages; ++i) {
    if (configs[i].in_channels != ch) {
      throw ConfigError("encoder layer " + std::to_string(i) + " expects " +
                        std::to_string(configs[i].in_channels) + " channels, receives " +
                        std::to_string(ch));
    }
    len = checked_output_length(configs[i], len, i);
    ch = configs[i].out_channels;
    enc_len[i] = len;
    enc_ch[i] = ch;
  }
  for (std::size_t d = 0; d < kStages; ++d) {
    const auto& c = configs[kStages + d];
    if (d > 0) {
      const std::size_t skip = kStages - 1 - d;
      if (len != enc_len[skip]) {
        throw ConfigError("decoder stage " + std::to_string(d) + " length " + std::to_string(len) +
                          " does not match encoder stage " + std::to_string(skip) + " length " +
                          std::to_string(enc_len[skip]));
      }
      ch += enc_ch[skip];
    }
    if (c.in_channels != ch) {
      throw ConfigError("decoder layer " + std::to_string(d) + " expects " +
                        std::to_string(c.in_channels) + " channels, receives " +
                        std::to_string(ch));
    }
    len = checked_output_length(c, len, kStages + d);
    ch = c.out_channels;
  }
  if (len != segment_length) {
    throw ConfigError("Op-UNet maps length " + std::to_string(segment_length) + " to " +
                      std::to_string(len));
  }

  layers_.reserve(configs.size());
  for (const auto& c : configs) {
    layers_.emplace_back(c, GenerativeLayerParams<float>::zeros(c));
  }
}

std::vector<OperationalLayerConfig> OpUNet::layer_configs(const OpUNetConfig& cfg) {
  if (cfg.decoder_kernel < cfg.stride || (cfg.decoder_kernel - cfg.stride) % 2 != 0) {
    throw ConfigError("decoder kernel " + std::to_string(cfg.decoder_kernel) +
                      " cannot double the length exactly with stride " +
                      std::to_string(cfg.stride) + " (kernel - stride must be even)");
  }
  if (cfg.encoder_kernel % 2 == 0) throw ConfigError("encoder kernel must be odd");
  const auto& w = cfg.widths;
  std::vector<OperationalLayerConfig> out;
  for (std::size_t i = 0; i < kStages; ++i) {
    OperationalLayerConfig c;
    c.in_channels = i == 0 ? 1 : w[i - 1];
    c.out_channels = w[i];
    c.kernel = cfg.encoder_kernel;
    c.q = cfg.q;
    c.stride = cfg.stride;
    c.padding = (cfg.encoder_kernel - 1) / 2;
    out.push_back(c);
  }
  for (std::size_t d = 0; d < kStages; ++d) {
    OperationalLayerConfig c;
    c.in_channels = d == 0 ? w[kStages - 1] : 2 * w[kStages - 1 - d];
    c.out_channels = d == kStages - 1 ? 1 : w[kStages - 2 - d];
    c.kernel = cfg.decoder_kernel;
    c.q = cfg.q;
    c.stride = cfg.stride;
    c.padding = (cfg.decoder_kernel - cfg.stride) / 2;
    c.transposed = true;
    out.push_back(c);
  }
  return out;
}

OpUNet OpUNet::build(const OpUNetConfig& config, std::uint64_t seed) {
  OpUNet net(layer_configs(config), config.segment_length, config.sample_rate_hz);
  std::mt19937_64 rng(seed);
  for (auto& layer : net.layers_) {
    layer.params() = GenerativeLayerParams<float>::uniform(layer.config(), rng);
  }
  return net;
}

OpUNet OpUNet::zeros(const OpUNetConfig& config) {
  return OpUNet(layer_configs(config), config.segment_length, config.sample_rate_hz);
}

std::vector<Var> OpUNet::bind(Tape<float>& tape, bool trainable) const {
  std::vector<Var> vars;
  vars.reserve(2 * layers_.size());
  for (const auto& layer : layers_) {
    vars.push_back(tape.parameter(layer.params().weights, trainable));
    vars.push_back(tape.parameter(layer.params().bias, trainable));
  }
  return vars;
}

Var OpUNet::forward(Tape<float>& tape, Var sound, std::span<const Var> bound) const {
  if (bound.size() != 2 * layers_.size()) {
    throw UsageError("OpUNet::forward: expected " + std::to_string(2 * layers_.size()) +
                     " bound parameters, got " + std::to_string(bound.size()));
  }
  const auto& x = tape.value(sound);
  if (x.rank() != 2 || x.channels() != 1 || x.length() != segment_length_) {
    throw ShapeError("OpUNet::forward: expected input [1x" + std::to_string(segment_length_) +
                     "], got " + to_string(x.shape()));
  }
  std::array<Var, kStages> enc{};
  Var h = sound;
  for (std::size_t i = 0; i < kStages; ++i) {
    h = layers_[i].forward(tape, h, bound[2 * i], bound[2 * i + 1]);
    enc[i] = h;
  }
  for (std::size_t d = 0; d < kStages; ++d) {
    if (d > 0) h = ops::concat_channels(tape, h, enc[kStages - 1 - d]);
    const std::size_t li = kStages + d;
    h = layers_[li].forward(tape, h, bound[2 * li], bound[2 * li + 1]);
  }
  return h;
}

FeatureMap<float> OpUNet::forward(const FeatureMap<float>& sound) const {
  Tape<float> tape;
  const auto bound = bind(tape, false);
  return tape.value(forward(tape, tape.constant(sound), bound));
}

std::vector<Tensor<float>*> OpUNet::parameters() {
  std::vector<Tensor<float>*> out;
  for (auto& layer : layers_) {
    out.push_back(&layer.params().weights);
    out.push_back(&layer.params().bias);
  }
  return out;
}

std::vector<const Tensor<float>*> OpUNet::parameters() const {
  std::vector<const Tensor<float>*> out;
  for (const auto& layer : layers_) {
    out.push_back(&layer.params().weights);
    out.push_back(&layer.params().bias);
  }
  return out;
}

std::string OpUNet::describe() const {
  std::string out = "Op-UNet, segment length " + std::to_string(segment_length_) + " @ " +
                    std::to_string(static_cast<long long>(sample_rate_hz_)) + " Hz\n" +
                    kTableHeader;
  std::size_t len = segment_length_;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const std::size_t next = layers_[i].config().output_length(len);
    out += layer_row(i, layers_[i].config(), len, next);
    len = next;
  }
  out += "total parameters: " + std::to_string(parameter_count(*this)) + "\n";
  return out;
}

// ---------------------------------------------------------------------------------------------
// FaultClassifier

FaultClassifier::FaultClassifier(std::vector<OperationalLayerConfig> conv_layers,
                                 std::vector<DenseLayerConfig> dense_layers,
                                 std::size_t segment_length, double sample_rate_hz)
    : segment_length_(segment_length), sample_rate_hz_(sample_rate_hz) {
  if (conv_layers.empty() || dense_layers.empty()) {
    throw ConfigError("classifier needs operational and dense layers");
  }
  if (conv_layers.front().in_channels != 1) throw ConfigError("classifier input must have 1 channel");
  std::size_t len = segment_length, ch = 1;
  for (std::size_t i = 0; i < conv_layers.size(); ++i) {
    const auto& c = conv_layers[i];
    c.validate();
    if (c.transposed) throw ConfigError("classifier layers cannot be transposed");
    if (c.in_channels != ch) {
      throw ConfigError("classifier layer " + std::to_string(i) + " expects " +
                        std::to_string(c.in_channels) + " channels, receives " + std::to_string(ch));
    }
    len = checked_output_length(c, len, i);
    ch = c.out_channels;
  }
  std::size_t features = len * ch;
  for (std::size_t i = 0; i < dense_layers.size(); ++i) {
    if (dense_layers[i].in_features != features) {
      throw ConfigError("dense layer " + std::to_string(i) + " expects " +
                        std::to_string(dense_layers[i].in_features) + " inputs, the " +
                        (i == 0 ? "flattened feature map has " : "previous layer gives ") +
                        std::to_string(features));
    }
    features = dense_layers[i].out_features;
  }
  if (features != 2) throw ConfigError("classifier must output 2 scores");

  for (const auto& c : conv_layers) conv_.emplace_back(c, GenerativeLayerParams<float>::zeros(c));
  for (const auto& d : dense_layers) {
    dense_.push_back({d, Tensor<float>({d.out_features, d.in_features}), Tensor<float>({d.out_features})});
  }
}

FaultClassifier FaultClassifier::build(const FaultClassifierConfig& cfg, std::uint64_t seed) {
  std::vector<OperationalLayerConfig> conv;
  std::size_t len = cfg.segment_length;
  for (std::size_t i = 0; i < cfg.kernels.size(); ++i) {
    OperationalLayerConfig c;
    c.in_channels = i == 0 ? 1 : cfg.channels;
    c.out_channels = cfg.channels;
    c.kernel = cfg.kernels[i];
    c.stride = cfg.strides[i];
    c.padding = (cfg.kernels[i] - 1) / 2;
    c.q = cfg.q;
    len = checked_output_length(c, len, i);
    conv.push_back(c);
  }
  std::vector<DenseLayerConfig> dense{{cfg.channels * len, cfg.hidden, Activation::tanh},
                                      {cfg.hidden, 2, Activation::tanh}};
  FaultClassifier model(std::move(conv), std::move(dense), cfg.segment_length, cfg.sample_rate_hz);

  std::mt19937_64 rng(seed);
  for (auto& layer : model.conv_) {
    layer.params() = GenerativeLayerParams<float>::uniform(layer.config(), rng);
  }
  for (auto& d : model.dense_) {
    const double s = 1.0 / std::sqrt(static_cast<double>(d.config.in_features));
    std::uniform_real_distribution<double> dist(-s, s);
    for (auto& v : d.weights.values()) v = static_cast<float>(dist(rng));
  }
  return model;
}

std::vector<Var> FaultClassifier::bind(Tape<float>& tape, bool trainable) const {
  std::vector<Var> vars;
  for (const auto& layer : conv_) {
    vars.push_back(tape.parameter(layer.params().weights, trainable));
    vars.push_back(tape.parameter(layer.params().bias, trainable));
  }
  for (const auto& d : dense_) {
    vars.push_back(tape.parameter(d.weights, trainable));
    vars.push_back(tape.parameter(d.bias, trainable));
  }
  return vars;
}

Var FaultClassifier::forward(Tape<float>& tape, Var vibration, std::span<const Var> bound) const {
  if (bound.size() != 2 * (conv_.size() + dense_.size())) {
    throw UsageError("FaultClassifier::forward: wrong number of bound parameters");
  }
  const auto& x = tape.value(vibration);
  if (x.rank() != 2 || x.channels() != 1 || x.length() != segment_length_) {
    throw ShapeError("FaultClassifier::forward: expected input [1x" +
                     std::to_string(segment_length_) + "], got " + to_string(x.shape()));
  }
  Var h = vibration;
  std::size_t b = 0;
  for (const auto& layer : conv_) {
    h = layer.forward(tape, h, bound[b], bound[b + 1]);
    b += 2;
  }
  h = ops::flatten(tape, h);
  for (const auto& d : dense_) {
    h = ops::dense(tape, h, bound[b], bound[b + 1]);
    if (d.config.activation == Activation::tanh) h = ops::tanh(tape, h);
    b += 2;
  }
  return h;
}

std::array<float, 2> FaultClassifier::forward(const FeatureMap<float>& vibration) const {
  Tape<float> tape;
  const auto bound = bind(tape, false);
  const auto& out = tape.value(forward(tape, tape.constant(vibration), bound));
  return {out[0], out[1]};
}

std::vector<Tensor<float>*> FaultClassifier::parameters() {
  std::vector<Tensor<float>*> out;
  for (auto& layer : conv_) {
    out.push_back(&layer.params().weights);
    out.push_back(&layer.params().bias);
  }
  for (auto& d : dense_) {
    out.push_back(&d.weights);
    out.push_back(&d.bias);
  }
  return out;
}

std::vector<const Tensor<float>*> FaultClassifier::parameters() const {
  std::vector<const Tensor<float>*> out;
  for (const auto& layer : conv_) {
    out.push_back(&layer.params().weights);
    out.push_back(&layer.params().bias);
  }
  for (const auto& d : dense_) {
    out.push_back(&d.weights);
    out.push_back(&d.bias);
  }
  return out;
}

std::string FaultClassifier::describe() const {
  std::string out = "Self-ONN fault classifier, segment length " + std::to_string(segment_length_) +
                    "\n" + kTableHeader;
  std::size_t len = segment_length_;
  for (std::size_t i = 0; i < conv_.size(); ++i) {
    const std::size_t next = conv_[i].config().output_length(len);
    out += layer_row(i, conv_[i].config(), len, next);
    len = next;
  }
  for (std::size_t i = 0; i < dense_.size(); ++i) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%3zu  %-12s %5zu %5zu %50zu\n", conv_.size() + i, "dense",
                  dense_[i].config.in_features, dense_[i].config.out_features,
                  dense_[i].config.parameter_count());
    out += buf;
  }
  out += "total parameters: " + std::to_string(parameter_count(*this)) + "\n";
  return out;
}

// ---------------------------------------------------------------------------------------------

std::size_t parameter_count(const OpUNet& model) {
  std::size_t n = 0;
  for (const auto& layer : model.layers()) n += layer.config().parameter_count();
  return n;
}

std::size_t parameter_count(const FaultClassifier& model) {
  std::size_t n = 0;
  for (const auto& layer : model.conv_layers()) n += layer.config().parameter_count();
  for (const auto& d : model.dense_layers()) n += d.config.parameter_count();
  return n;
}

Label predict_label(const std::array<float, 2>& scores) {
  return scores[1] > scores[0] ? Label::faulty : Label::healthy;
}

std::array<float, 2> target_encoding(Label label) {
  return label == Label::healthy ? std::array<float, 2>{1.0f, -1.0f}
                                 : std::array<float, 2>{-1.0f, 1.0f};
}

FeatureMap<float> as_feature_map(std::span<const float> samples) {
  return feature_map<float>(1, samples.size(), std::vector<float>(samples.begin(), samples.end()));
}

}  // namespace s2v
