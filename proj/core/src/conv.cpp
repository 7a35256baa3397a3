#include "s2v/conv.hpp"

#include <algorithm>
#include <cmath>

#include "s2v/error.hpp"

namespace s2v {
namespace {

// Range [lo, hi) of m for which m*stride + tap - padding lands inside [0, length).
struct TapRange {
  std::size_t lo;
  std::size_t hi;
};

TapRange valid_range(std::size_t tap, std::size_t stride, std::size_t padding, std::size_t length,
                     std::size_t count) {
  std::size_t lo = 0;
  if (tap < padding) lo = std::min(count, (padding - tap + stride - 1) / stride);
  const auto last = static_cast<long long>(length) - 1 + static_cast<long long>(padding) -
                    static_cast<long long>(tap);
  if (last < 0) return {0, 0};
  const std::size_t hi = std::min(count, static_cast<std::size_t>(last) / stride + 1);
  return {lo, std::max(lo, hi)};
}

void check_geometry(std::size_t stride) {
  if (stride == 0) throw ShapeError("stride must be >= 1");
}

template <typename T>
void check_bias(std::span<const T> bias, std::size_t channels, const char* what) {
  if (bias.size() != channels) {
    throw ShapeError(std::string(what) + ": bias has " + std::to_string(bias.size()) +
                     " entries for " + std::to_string(channels) + " output channels");
  }
}

}  // namespace

std::size_t conv_output_length(std::size_t length, std::size_t kernel, std::size_t stride,
                               std::size_t padding) {
  check_geometry(stride);
  if (kernel == 0 || kernel > length + 2 * padding) {
    throw ShapeError("kernel of " + std::to_string(kernel) + " taps does not fit length " +
                     std::to_string(length) + " with padding " + std::to_string(padding));
  }
  return (length + 2 * padding - kernel) / stride + 1;
}

std::size_t transposed_output_length(std::size_t length, std::size_t kernel, std::size_t stride,
                                     std::size_t padding) {
  check_geometry(stride);
  const long long out = (static_cast<long long>(length) - 1) * static_cast<long long>(stride) +
                        static_cast<long long>(kernel) - 2 * static_cast<long long>(padding);
  if (length == 0 || out <= 0) {
    throw ShapeError("transposed convolution of length " + std::to_string(length) +
                     " with kernel " + std::to_string(kernel) + ", stride " +
                     std::to_string(stride) + ", padding " + std::to_string(padding) +
                     " has non-positive output length");
  }
  return static_cast<std::size_t>(out);
}

template <typename T>
FeatureMap<T> conv1d(const FeatureMap<T>& x, const Tensor<T>& weights, std::span<const T> bias,
                     std::size_t stride, std::size_t padding) {
  if (x.rank() != 2 || weights.rank() != 3 || weights.dim(1) != x.channels()) {
    throw ShapeError("conv1d: weights " + to_string(weights.shape()) +
                     " do not match input " + to_string(x.shape()));
  }
  const std::size_t c_out = weights.dim(0), c_in = weights.dim(1), k = weights.dim(2);
  const std::size_t len = x.length();
  const std::size_t out_len = conv_output_length(len, k, stride, padding);
  check_bias(bias, c_out, "conv1d");

  FeatureMap<T> out({c_out, out_len});
  for (std::size_t co = 0; co < c_out; ++co) {
    T* o = out.row(co).data();
    std::fill(o, o + out_len, bias[co]);
    for (std::size_t ci = 0; ci < c_in; ++ci) {
      const T* xi = x.row(ci).data();
      const T* w = weights.data() + (co * c_in + ci) * k;
      for (std::size_t r = 0; r < k; ++r) {
        const auto [lo, hi] = valid_range(r, stride, padding, len, out_len);
        const T wr = w[r];
        for (std::size_t m = lo; m < hi; ++m) o[m] += wr * xi[m * stride + r - padding];
      }
    }
  }
  return out;
}

template <typename T>
FeatureMap<T> transposed_conv1d(const FeatureMap<T>& x, const Tensor<T>& weights,
                                std::span<const T> bias, std::size_t stride, std::size_t padding) {
  if (x.rank() != 2 || weights.rank() != 3 || weights.dim(0) != x.channels()) {
    throw ShapeError("transposed_conv1d: weights " + to_string(weights.shape()) +
                     " do not match input " + to_string(x.shape()));
  }
  const std::size_t c_in = weights.dim(0), c_out = weights.dim(1), k = weights.dim(2);
  const std::size_t len = x.length();
  const std::size_t out_len = transposed_output_length(len, k, stride, padding);
  check_bias(bias, c_out, "transposed_conv1d");

  FeatureMap<T> out({c_out, out_len});
  for (std::size_t co = 0; co < c_out; ++co) {
    T* o = out.row(co).data();
    std::fill(o, o + out_len, bias[co]);
    for (std::size_t ci = 0; ci < c_in; ++ci) {
      const T* xi = x.row(ci).data();
      const T* w = weights.data() + (ci * c_out + co) * k;
      for (std::size_t r = 0; r < k; ++r) {
        const auto [lo, hi] = valid_range(r, stride, padding, out_len, len);
        const T wr = w[r];
        for (std::size_t m = lo; m < hi; ++m) o[m * stride + r - padding] += wr * xi[m];
      }
    }
  }
  return out;
}

template <typename T>
FeatureMap<T> elementwise_power(const FeatureMap<T>& x, int q) {
  if (q < 1) throw UsageError("elementwise_power: q must be >= 1");
  FeatureMap<T> out = x;
  for (auto& v : out.values()) {
    const T base = v;
    for (int i = 1; i < q; ++i) v *= base;
  }
  return out;
}

template <typename T>
FeatureMap<T> tanh_activation(const FeatureMap<T>& x) {
  FeatureMap<T> out = x;
  for (auto& v : out.values()) v = std::tanh(v);
  return out;
}

template <typename T>
void conv1d_backward(const FeatureMap<T>& x, const Tensor<T>& weights, const FeatureMap<T>& dy,
                     std::size_t stride, std::size_t padding, FeatureMap<T>* dx,
                     Tensor<T>* dweights, std::span<T> dbias) {
  const std::size_t c_out = weights.dim(0), c_in = weights.dim(1), k = weights.dim(2);
  const std::size_t len = x.length(), out_len = dy.length();
  for (std::size_t co = 0; co < c_out; ++co) {
    const T* g = dy.row(co).data();
    if (!dbias.empty()) {
      T acc = 0;
      for (std::size_t m = 0; m < out_len; ++m) acc += g[m];
      dbias[co] += acc;
    }
    for (std::size_t ci = 0; ci < c_in; ++ci) {
      const T* xi = x.row(ci).data();
      const std::size_t wbase = (co * c_in + ci) * k;
      for (std::size_t r = 0; r < k; ++r) {
        const auto [lo, hi] = valid_range(r, stride, padding, len, out_len);
        if (dweights) {
          T acc = 0;
          for (std::size_t m = lo; m < hi; ++m) acc += g[m] * xi[m * stride + r - padding];
          (*dweights)[wbase + r] += acc;
        }
        if (dx) {
          T* dxi = dx->row(ci).data();
          const T wr = weights[wbase + r];
          for (std::size_t m = lo; m < hi; ++m) dxi[m * stride + r - padding] += wr * g[m];
        }
      }
    }
  }
}

template <typename T>
void transposed_conv1d_backward(const FeatureMap<T>& x, const Tensor<T>& weights,
                                const FeatureMap<T>& dy, std::size_t stride, std::size_t padding,
                                FeatureMap<T>* dx, Tensor<T>* dweights, std::span<T> dbias) {
  const std::size_t c_in = weights.dim(0), c_out = weights.dim(1), k = weights.dim(2);
  const std::size_t len = x.length(), out_len = dy.length();
  for (std::size_t co = 0; co < c_out; ++co) {
    const T* g = dy.row(co).data();
    if (!dbias.empty()) {
      T acc = 0;
      for (std::size_t n = 0; n < out_len; ++n) acc += g[n];
      dbias[co] += acc;
    }
    for (std::size_t ci = 0; ci < c_in; ++ci) {
      const T* xi = x.row(ci).data();
      const std::size_t wbase = (ci * c_out + co) * k;
      for (std::size_t r = 0; r < k; ++r) {
        const auto [lo, hi] = valid_range(r, stride, padding, out_len, len);
        if (dweights) {
          T acc = 0;
          for (std::size_t m = lo; m < hi; ++m) acc += xi[m] * g[m * stride + r - padding];
          (*dweights)[wbase + r] += acc;
        }
        if (dx) {
          T* dxi = dx->row(ci).data();
          const T wr = weights[wbase + r];
          for (std::size_t m = lo; m < hi; ++m) dxi[m] += wr * g[m * stride + r - padding];
        }
      }
    }
  }
}

template <typename T>
void im2col(std::span<const T> x, std::size_t channels, std::size_t length, std::size_t kernel,
            std::size_t stride, std::size_t padding, std::size_t cols, std::span<T> out) {
  for (std::size_t c = 0; c < channels; ++c) {
    const T* xc = x.data() + c * length;
    for (std::size_t r = 0; r < kernel; ++r) {
      T* row = out.data() + (c * kernel + r) * cols;
      const auto [lo, hi] = valid_range(r, stride, padding, length, cols);
      std::fill(row, row + lo, T{0});
      if (stride == 1) {
        std::copy(xc + lo + r - padding, xc + hi + r - padding, row + lo);
      } else {
        for (std::size_t m = lo; m < hi; ++m) row[m] = xc[m * stride + r - padding];
      }
      std::fill(row + hi, row + cols, T{0});
    }
  }
}

template <typename T>
void col2im(std::span<const T> columns, std::size_t channels, std::size_t length,
            std::size_t kernel, std::size_t stride, std::size_t padding, std::size_t cols,
            std::span<T> out) {
  for (std::size_t c = 0; c < channels; ++c) {
    T* oc = out.data() + c * length;
    for (std::size_t r = 0; r < kernel; ++r) {
      const T* row = columns.data() + (c * kernel + r) * cols;
      const auto [lo, hi] = valid_range(r, stride, padding, length, cols);
      for (std::size_t m = lo; m < hi; ++m) oc[m * stride + r - padding] += row[m];
    }
  }
}

#define S2V_INSTANTIATE_CONV(T)                                                                 \
  template FeatureMap<T> conv1d(const FeatureMap<T>&, const Tensor<T>&, std::span<const T>,      \
                                std::size_t, std::size_t);                                       \
  template FeatureMap<T> transposed_conv1d(const FeatureMap<T>&, const Tensor<T>&,               \
                                           std::span<const T>, std::size_t, std::size_t);        \
  template FeatureMap<T> elementwise_power(const FeatureMap<T>&, int);                           \
  template FeatureMap<T> tanh_activation(const FeatureMap<T>&);                                  \
  template void conv1d_backward(const FeatureMap<T>&, const Tensor<T>&, const FeatureMap<T>&,    \
                                std::size_t, std::size_t, FeatureMap<T>*, Tensor<T>*,            \
                                std::span<T>);                                                   \
  template void transposed_conv1d_backward(const FeatureMap<T>&, const Tensor<T>&,               \
                                           const FeatureMap<T>&, std::size_t, std::size_t,       \
                                           FeatureMap<T>*, Tensor<T>*, std::span<T>);            \
  template void im2col(std::span<const T>, std::size_t, std::size_t, std::size_t, std::size_t,   \
                       std::size_t, std::size_t, std::span<T>);                                  \
  template void col2im(std::span<const T>, std::size_t, std::size_t, std::size_t, std::size_t,   \
                       std::size_t, std::size_t, std::span<T>);

S2V_INSTANTIATE_CONV(float)
S2V_INSTANTIATE_CONV(double)

#undef S2V_INSTANTIATE_CONV

}  // namespace s2v
