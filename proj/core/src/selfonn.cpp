#include "s2v/selfonn.hpp"

#include <cmath>
#include <memory>

#include "gemm.hpp"
#include "s2v/conv.hpp"
#include "s2v/error.hpp"
#include "s2v/ops.hpp"

namespace s2v {

void OperationalLayerConfig::validate() const {
  if (in_channels == 0 || out_channels == 0 || kernel == 0 || q == 0 || stride == 0) {
    throw ConfigError("operational layer needs positive channels, kernel, q and stride");
  }
}

std::size_t OperationalLayerConfig::output_length(std::size_t input_length) const {
  return transposed ? transposed_output_length(input_length, kernel, stride, padding)
                    : conv_output_length(input_length, kernel, stride, padding);
}

std::size_t OperationalLayerConfig::parameter_count() const {
  return out_channels * in_channels * kernel * q + out_channels;
}

namespace {

Shape weight_shape(const OperationalLayerConfig& c) {
  return c.transposed ? Shape{c.q, c.in_channels, c.out_channels, c.kernel}
                      : Shape{c.q, c.out_channels, c.in_channels, c.kernel};
}

struct Geometry {
  std::size_t q, in, out, k, len, out_len;
};

template <typename T>
Geometry geometry(const FeatureMap<T>& y, const Tensor<T>& w, const Tensor<T>& b,
                  std::size_t stride, std::size_t padding, bool transposed) {
  if (y.rank() != 2 || w.rank() != 4) {
    throw ShapeError("generative layer: input " + to_string(y.shape()) + ", weights " +
                     to_string(w.shape()));
  }
  Geometry g{};
  g.q = w.dim(0);
  g.k = w.dim(3);
  g.in = transposed ? w.dim(1) : w.dim(2);
  g.out = transposed ? w.dim(2) : w.dim(1);
  if (y.channels() != g.in) {
    throw ShapeError("generative layer: weights " + to_string(w.shape()) + " expect " +
                     std::to_string(g.in) + " input channels, input is " + to_string(y.shape()));
  }
  if (b.size() != g.out) {
    throw ShapeError("generative layer: bias " + to_string(b.shape()) + " for " +
                     std::to_string(g.out) + " output channels");
  }
  g.len = y.length();
  g.out_len = transposed ? transposed_output_length(g.len, g.k, stride, padding)
                         : conv_output_length(g.len, g.k, stride, padding);
  return g;
}

// Powers y^1..y^Q stacked along channels: [(q, c) x L].
template <typename T>
std::vector<T> power_stack(const FeatureMap<T>& y, std::size_t q) {
  const std::size_t n = y.size();
  std::vector<T> p(q * n);
  std::copy(y.values().begin(), y.values().end(), p.begin());
  for (std::size_t k = 1; k < q; ++k) {
    const T* prev = p.data() + (k - 1) * n;
    T* cur = p.data() + k * n;
    for (std::size_t i = 0; i < n; ++i) cur[i] = prev[i] * y[i];
  }
  return p;
}

// Forward layers: packed[o][(q, i, r)] = w[q][o][i][r].
// Transposed layers: packed[(o, r)][(q, i)] = w[q][i][o][r].
template <typename T>
std::vector<T> pack_weights(const Tensor<T>& w, const Geometry& g, bool transposed) {
  std::vector<T> packed(w.size());
  const std::size_t qi = g.q * g.in;
  for (std::size_t q = 0; q < g.q; ++q)
    for (std::size_t a = 0; a < w.dim(1); ++a)
      for (std::size_t b = 0; b < w.dim(2); ++b)
        for (std::size_t r = 0; r < g.k; ++r) {
          const T v = w[((q * w.dim(1) + a) * w.dim(2) + b) * g.k + r];
          if (!transposed) {
            const std::size_t o = a, i = b;
            packed[o * qi * g.k + (q * g.in + i) * g.k + r] = v;
          } else {
            const std::size_t i = a, o = b;
            packed[(o * g.k + r) * qi + q * g.in + i] = v;
          }
        }
  return packed;
}

template <typename T>
void unpack_add(const std::vector<T>& packed, Tensor<T>& dw, const Geometry& g, bool transposed) {
  const std::size_t qi = g.q * g.in;
  for (std::size_t q = 0; q < g.q; ++q)
    for (std::size_t a = 0; a < dw.dim(1); ++a)
      for (std::size_t b = 0; b < dw.dim(2); ++b)
        for (std::size_t r = 0; r < g.k; ++r) {
          T& dst = dw[((q * dw.dim(1) + a) * dw.dim(2) + b) * g.k + r];
          if (!transposed) dst += packed[a * qi * g.k + (q * g.in + b) * g.k + r];
          else dst += packed[(b * g.k + r) * qi + q * g.in + a];
        }
}

template <typename T>
struct ForwardState {
  Geometry g;
  std::vector<T> powers;
  std::vector<T> packed;
  std::vector<T> columns;  // forward layers only
};

template <typename T>
FeatureMap<T> run_forward(const FeatureMap<T>& y, const Tensor<T>& w, const Tensor<T>& b,
                          std::size_t stride, std::size_t padding, bool transposed,
                          ForwardState<T>& st) {
  st.g = geometry(y, w, b, stride, padding, transposed);
  const Geometry& g = st.g;
  st.powers = power_stack(y, g.q);
  st.packed = pack_weights(w, g, transposed);
  FeatureMap<T> out({g.out, g.out_len});
  const std::size_t qi = g.q * g.in;
  if (!transposed) {
    st.columns.assign(qi * g.k * g.out_len, T{0});
    im2col<T>(st.powers, qi, g.len, g.k, stride, padding, g.out_len, st.columns);
    detail::gemm(st.packed.data(), st.columns.data(), out.data(), g.out, qi * g.k, g.out_len);
  } else {
    std::vector<T> z(g.out * g.k * g.len);
    detail::gemm(st.packed.data(), st.powers.data(), z.data(), g.out * g.k, qi, g.len);
    col2im<T>(z, g.out, g.out_len, g.k, stride, padding, g.len, out.values());
  }
  for (std::size_t o = 0; o < g.out; ++o) {
    T* row = out.row(o).data();
    const T bo = b[o];
    for (std::size_t n = 0; n < g.out_len; ++n) row[n] += bo;
  }
  return out;
}

}  // namespace

template <typename T>
GenerativeLayerParams<T> GenerativeLayerParams<T>::zeros(const OperationalLayerConfig& config) {
  config.validate();
  return {Tensor<T>(weight_shape(config)), Tensor<T>({config.out_channels})};
}

template <typename T>
GenerativeLayerParams<T> GenerativeLayerParams<T>::uniform(const OperationalLayerConfig& config,
                                                           std::mt19937_64& rng) {
  auto params = zeros(config);
  const double s = 1.0 / std::sqrt(static_cast<double>(config.in_channels * config.kernel * config.q));
  std::uniform_real_distribution<double> dist(-s, s);
  for (auto& v : params.weights.values()) v = static_cast<T>(dist(rng));
  return params;
}

template <typename T>
Tensor<T> GenerativeLayerParams<T>::slice(std::size_t q) const {
  if (q == 0 || q > weights.dim(0)) throw UsageError("slice: q out of range");
  const std::size_t n = weights.dim(1) * weights.dim(2) * weights.dim(3);
  auto first = weights.values().begin() + static_cast<std::ptrdiff_t>((q - 1) * n);
  return Tensor<T>({weights.dim(1), weights.dim(2), weights.dim(3)},
                   std::vector<T>(first, first + static_cast<std::ptrdiff_t>(n)));
}

template <typename T>
void GenerativeLayerParams<T>::set_slice(std::size_t q, const Tensor<T>& kernel) {
  if (q == 0 || q > weights.dim(0)) throw UsageError("set_slice: q out of range");
  require_shape(kernel, {weights.dim(1), weights.dim(2), weights.dim(3)}, "set_slice");
  std::copy(kernel.values().begin(), kernel.values().end(),
            weights.values().begin() + static_cast<std::ptrdiff_t>((q - 1) * kernel.size()));
}

template <typename T>
FeatureMap<T> generative_forward(const FeatureMap<T>& y, const GenerativeLayerParams<T>& params,
                                 std::size_t stride, std::size_t padding) {
  ForwardState<T> st;
  return run_forward(y, params.weights, params.bias, stride, padding, false, st);
}

template <typename T>
FeatureMap<T> transposed_generative_forward(const FeatureMap<T>& y,
                                            const GenerativeLayerParams<T>& params,
                                            std::size_t stride, std::size_t padding) {
  ForwardState<T> st;
  return run_forward(y, params.weights, params.bias, stride, padding, true, st);
}

template <typename T>
FeatureMap<T> operational_layer_forward(const FeatureMap<T>& y, const OperationalLayerConfig& config,
                                        const GenerativeLayerParams<T>& params) {
  require_shape(params.weights, weight_shape(config), "operational layer weights");
  auto out = config.transposed
                 ? transposed_generative_forward(y, params, config.stride, config.padding)
                 : generative_forward(y, params, config.stride, config.padding);
  if (config.activation == Activation::tanh) {
    for (auto& v : out.values()) v = std::tanh(v);
  }
  return out;
}

namespace ops {

template <typename T>
Var generative(Tape<T>& tape, Var y, Var weights, Var bias, std::size_t stride,
               std::size_t padding, bool transposed) {
  auto st = std::make_shared<ForwardState<T>>();
  auto out = run_forward(tape.value(y), tape.value(weights), tape.value(bias), stride, padding,
                         transposed, *st);
  return tape.record(std::move(out), {y, weights, bias}, [=](Tape<T>& t, const Tensor<T>& dout) {
    const Geometry& g = st->g;
    const std::size_t qi = g.q * g.in;

    if (t.requires_grad(bias)) {
      auto& db = t.grad_buffer(bias);
      for (std::size_t o = 0; o < g.out; ++o) {
        T acc = 0;
        for (T v : dout.row(o)) acc += v;
        db[o] += acc;
      }
    }

    std::vector<T> dpowers;
    if (!transposed) {
      if (t.requires_grad(weights)) {
        std::vector<T> dpacked(st->packed.size());
        detail::gemm_nt(dout.data(), st->columns.data(), dpacked.data(), g.out, g.out_len,
                        qi * g.k);
        unpack_add(dpacked, t.grad_buffer(weights), g, false);
      }
      if (t.requires_grad(y)) {
        std::vector<T> dcols(qi * g.k * g.out_len);
        detail::gemm_tn(st->packed.data(), dout.data(), dcols.data(), qi * g.k, g.out, g.out_len);
        dpowers.assign(qi * g.len, T{0});
        col2im<T>(dcols, qi, g.len, g.k, stride, padding, g.out_len, dpowers);
      }
    } else {
      std::vector<T> dz(g.out * g.k * g.len);
      im2col<T>(dout.values(), g.out, g.out_len, g.k, stride, padding, g.len, dz);
      if (t.requires_grad(weights)) {
        std::vector<T> dpacked(st->packed.size());
        detail::gemm_nt(dz.data(), st->powers.data(), dpacked.data(), g.out * g.k, g.len, qi);
        unpack_add(dpacked, t.grad_buffer(weights), g, true);
      }
      if (t.requires_grad(y)) {
        dpowers.assign(qi * g.len, T{0});
        detail::gemm_tn(st->packed.data(), dz.data(), dpowers.data(), qi, g.out * g.k, g.len);
      }
    }

    if (t.requires_grad(y)) {
      // d(y^q)/dy = q * y^(q-1); powers[q-2] holds y^(q-1).
      auto& dy = t.grad_buffer(y);
      const std::size_t n = g.in * g.len;
      for (std::size_t i = 0; i < n; ++i) dy[i] += dpowers[i];
      for (std::size_t q = 2; q <= g.q; ++q) {
        const T* prev = st->powers.data() + (q - 2) * n;
        const T* dp = dpowers.data() + (q - 1) * n;
        const T qf = static_cast<T>(q);
        for (std::size_t i = 0; i < n; ++i) dy[i] += qf * prev[i] * dp[i];
      }
    }
  });
}

}  // namespace ops

template <typename T>
OperationalLayer<T>::OperationalLayer(OperationalLayerConfig config, GenerativeLayerParams<T> params)
    : config_(config), params_(std::move(params)) {
  config_.validate();
  require_shape(params_.weights, weight_shape(config_), "operational layer weights");
  require_shape(params_.bias, {config_.out_channels}, "operational layer bias");
}

template <typename T>
FeatureMap<T> OperationalLayer<T>::forward(const FeatureMap<T>& y) const {
  return operational_layer_forward(y, config_, params_);
}

template <typename T>
Var OperationalLayer<T>::forward(Tape<T>& tape, Var y, Var weights, Var bias) const {
  Var out = ops::generative(tape, y, weights, bias, config_.stride, config_.padding,
                            config_.transposed);
  return config_.activation == Activation::tanh ? ops::tanh(tape, out) : out;
}

#define S2V_INSTANTIATE_SELFONN(T)                                                             \
  template struct GenerativeLayerParams<T>;                                                    \
  template class OperationalLayer<T>;                                                          \
  template FeatureMap<T> generative_forward(const FeatureMap<T>&,                              \
                                            const GenerativeLayerParams<T>&, std::size_t,      \
                                            std::size_t);                                      \
  template FeatureMap<T> transposed_generative_forward(                                        \
      const FeatureMap<T>&, const GenerativeLayerParams<T>&, std::size_t, std::size_t);        \
  template FeatureMap<T> operational_layer_forward(                                            \
      const FeatureMap<T>&, const OperationalLayerConfig&, const GenerativeLayerParams<T>&);   \
  template Var ops::generative(Tape<T>&, Var, Var, Var, std::size_t, std::size_t, bool);

S2V_INSTANTIATE_SELFONN(float)
S2V_INSTANTIATE_SELFONN(double)

#undef S2V_INSTANTIATE_SELFONN

}  // namespace s2v
