#include "s2v/ops.hpp"

#include <cmath>

#include "s2v/conv.hpp"
#include "s2v/error.hpp"

namespace s2v::ops {
namespace {

template <typename T>
Tensor<T> scalar(T v) {
  return Tensor<T>({1}, std::vector<T>{v});
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shapes " + to_string(a.shape()) + " and " +
                     to_string(b.shape()) + " differ");
  }
}

}  // namespace

template <typename T>
Var conv1d(Tape<T>& tape, Var x, Var weights, Var bias, std::size_t stride, std::size_t padding) {
  auto out = s2v::conv1d(tape.value(x), tape.value(weights), tape.value(bias).values(), stride,
                         padding);
  return tape.record(std::move(out), {x, weights, bias},
                     [=](Tape<T>& t, const Tensor<T>& g) {
                       FeatureMap<T>* dx = t.requires_grad(x) ? &t.grad_buffer(x) : nullptr;
                       Tensor<T>* dw = t.requires_grad(weights) ? &t.grad_buffer(weights) : nullptr;
                       std::span<T> db;
                       if (t.requires_grad(bias)) db = t.grad_buffer(bias).values();
                       conv1d_backward(t.value(x), t.value(weights), g, stride, padding, dx, dw, db);
                     });
}

template <typename T>
Var transposed_conv1d(Tape<T>& tape, Var x, Var weights, Var bias, std::size_t stride,
                      std::size_t padding) {
  auto out = s2v::transposed_conv1d(tape.value(x), tape.value(weights), tape.value(bias).values(),
                                    stride, padding);
  return tape.record(std::move(out), {x, weights, bias},
                     [=](Tape<T>& t, const Tensor<T>& g) {
                       FeatureMap<T>* dx = t.requires_grad(x) ? &t.grad_buffer(x) : nullptr;
                       Tensor<T>* dw = t.requires_grad(weights) ? &t.grad_buffer(weights) : nullptr;
                       std::span<T> db;
                       if (t.requires_grad(bias)) db = t.grad_buffer(bias).values();
                       transposed_conv1d_backward(t.value(x), t.value(weights), g, stride, padding,
                                                  dx, dw, db);
                     });
}

template <typename T>
Var power(Tape<T>& tape, Var x, int q) {
  auto out = elementwise_power(tape.value(x), q);
  return tape.record(std::move(out), {x}, [=](Tape<T>& t, const Tensor<T>& g) {
    const auto& xv = t.value(x);
    auto& dx = t.grad_buffer(x);
    for (std::size_t i = 0; i < xv.size(); ++i) {
      T d = static_cast<T>(q);
      for (int k = 1; k < q; ++k) d *= xv[i];
      dx[i] += d * g[i];
    }
  });
}

template <typename T>
Var tanh(Tape<T>& tape, Var x) {
  const Var y{tape.size()};  // id of the node recorded below; tanh' is taken from the output
  return tape.record(tanh_activation(tape.value(x)), {x}, [=](Tape<T>& t, const Tensor<T>& g) {
    const auto& yv = t.value(y);
    auto& dx = t.grad_buffer(x);
    for (std::size_t i = 0; i < yv.size(); ++i) dx[i] += (T{1} - yv[i] * yv[i]) * g[i];
  });
}

template <typename T>
Var add(Tape<T>& tape, Var a, Var b) {
  require_same_shape(tape.value(a), tape.value(b), "add");
  Tensor<T> out = tape.value(a);
  const auto& bv = tape.value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return tape.record(std::move(out), {a, b}, [=](Tape<T>& t, const Tensor<T>& g) {
    for (Var p : {a, b}) {
      if (!t.requires_grad(p)) continue;
      auto& d = t.grad_buffer(p);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
    }
  });
}

template <typename T>
Var scale(Tape<T>& tape, Var x, T factor) {
  Tensor<T> out = tape.value(x);
  for (auto& v : out.values()) v *= factor;
  return tape.record(std::move(out), {x}, [=](Tape<T>& t, const Tensor<T>& g) {
    auto& d = t.grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += factor * g[i];
  });
}

template <typename T>
Var sum(Tape<T>& tape, Var x) {
  T acc = 0;
  for (T v : tape.value(x).values()) acc += v;
  return tape.record(scalar(acc), {x}, [=](Tape<T>& t, const Tensor<T>& g) {
    auto& d = t.grad_buffer(x);
    for (auto& v : d.values()) v += g[0];
  });
}

template <typename T>
Var concat_channels(Tape<T>& tape, Var a, Var b) {
  const auto& av = tape.value(a);
  const auto& bv = tape.value(b);
  if (av.rank() != 2 || bv.rank() != 2 || av.length() != bv.length()) {
    throw ShapeError("concat_channels: " + to_string(av.shape()) + " and " +
                     to_string(bv.shape()) + " need equal lengths");
  }
  Tensor<T> out({av.channels() + bv.channels(), av.length()});
  std::copy(av.values().begin(), av.values().end(), out.data());
  std::copy(bv.values().begin(), bv.values().end(), out.data() + av.size());
  const std::size_t split = av.size();
  return tape.record(std::move(out), {a, b}, [=](Tape<T>& t, const Tensor<T>& g) {
    if (t.requires_grad(a)) {
      auto& d = t.grad_buffer(a);
      for (std::size_t i = 0; i < split; ++i) d[i] += g[i];
    }
    if (t.requires_grad(b)) {
      auto& d = t.grad_buffer(b);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[split + i];
    }
  });
}

template <typename T>
Var flatten(Tape<T>& tape, Var x) {
  Tensor<T> out = tape.value(x);
  out.reshape({out.size()});
  return tape.record(std::move(out), {x}, [=](Tape<T>& t, const Tensor<T>& g) {
    auto& d = t.grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
  });
}

template <typename T>
Var dense(Tape<T>& tape, Var x, Var weights, Var bias) {
  const auto& xv = tape.value(x);
  const auto& w = tape.value(weights);
  const auto& b = tape.value(bias);
  if (xv.rank() != 1 || w.rank() != 2 || w.dim(1) != xv.size() || b.size() != w.dim(0)) {
    throw ShapeError("dense: weights " + to_string(w.shape()) + " and bias " +
                     to_string(b.shape()) + " do not match input " + to_string(xv.shape()));
  }
  const std::size_t n_out = w.dim(0), n_in = w.dim(1);
  Tensor<T> out({n_out});
  for (std::size_t o = 0; o < n_out; ++o) {
    T acc = b[o];
    const T* row = w.data() + o * n_in;
    for (std::size_t i = 0; i < n_in; ++i) acc += row[i] * xv[i];
    out[o] = acc;
  }
  return tape.record(std::move(out), {x, weights, bias}, [=](Tape<T>& t, const Tensor<T>& g) {
    const auto& xv = t.value(x);
    const auto& w = t.value(weights);
    if (t.requires_grad(weights)) {
      auto& dw = t.grad_buffer(weights);
      for (std::size_t o = 0; o < n_out; ++o)
        for (std::size_t i = 0; i < n_in; ++i) dw[o * n_in + i] += g[o] * xv[i];
    }
    if (t.requires_grad(bias)) {
      auto& db = t.grad_buffer(bias);
      for (std::size_t o = 0; o < n_out; ++o) db[o] += g[o];
    }
    if (t.requires_grad(x)) {
      auto& dx = t.grad_buffer(x);
      for (std::size_t o = 0; o < n_out; ++o)
        for (std::size_t i = 0; i < n_in; ++i) dx[i] += w[o * n_in + i] * g[o];
    }
  });
}

template <typename T>
Var mean_abs_diff(Tape<T>& tape, Var a, Var b) {
  const auto& av = tape.value(a);
  const auto& bv = tape.value(b);
  require_same_shape(av, bv, "mean_abs_diff");
  if (av.empty()) throw ShapeError("mean_abs_diff: empty input");
  T acc = 0;
  for (std::size_t i = 0; i < av.size(); ++i) acc += std::abs(av[i] - bv[i]);
  const T inv_n = T{1} / static_cast<T>(av.size());
  return tape.record(scalar(acc * inv_n), {a, b}, [=](Tape<T>& t, const Tensor<T>& g) {
    const auto& av = t.value(a);
    const auto& bv = t.value(b);
    const T scale = g[0] * inv_n;
    Tensor<T>* da = t.requires_grad(a) ? &t.grad_buffer(a) : nullptr;
    Tensor<T>* db = t.requires_grad(b) ? &t.grad_buffer(b) : nullptr;
    for (std::size_t i = 0; i < av.size(); ++i) {
      const T diff = av[i] - bv[i];
      const T s = diff > 0 ? scale : (diff < 0 ? -scale : T{0});
      if (da) (*da)[i] += s;
      if (db) (*db)[i] -= s;
    }
  });
}

template <typename T>
Var mean_squared_diff(Tape<T>& tape, Var a, Var b) {
  const auto& av = tape.value(a);
  const auto& bv = tape.value(b);
  require_same_shape(av, bv, "mean_squared_diff");
  if (av.empty()) throw ShapeError("mean_squared_diff: empty input");
  T acc = 0;
  for (std::size_t i = 0; i < av.size(); ++i) acc += (av[i] - bv[i]) * (av[i] - bv[i]);
  const T inv_n = T{1} / static_cast<T>(av.size());
  return tape.record(scalar(acc * inv_n), {a, b}, [=](Tape<T>& t, const Tensor<T>& g) {
    const auto& av = t.value(a);
    const auto& bv = t.value(b);
    const T scale = 2 * g[0] * inv_n;
    Tensor<T>* da = t.requires_grad(a) ? &t.grad_buffer(a) : nullptr;
    Tensor<T>* db = t.requires_grad(b) ? &t.grad_buffer(b) : nullptr;
    for (std::size_t i = 0; i < av.size(); ++i) {
      const T s = scale * (av[i] - bv[i]);
      if (da) (*da)[i] += s;
      if (db) (*db)[i] -= s;
    }
  });
}

#define S2V_INSTANTIATE_OPS(T)                                                                 \
  template Var conv1d(Tape<T>&, Var, Var, Var, std::size_t, std::size_t);                      \
  template Var transposed_conv1d(Tape<T>&, Var, Var, Var, std::size_t, std::size_t);           \
  template Var power(Tape<T>&, Var, int);                                                      \
  template Var tanh(Tape<T>&, Var);                                                            \
  template Var add(Tape<T>&, Var, Var);                                                        \
  template Var scale(Tape<T>&, Var, T);                                                        \
  template Var sum(Tape<T>&, Var);                                                             \
  template Var concat_channels(Tape<T>&, Var, Var);                                            \
  template Var flatten(Tape<T>&, Var);                                                         \
  template Var dense(Tape<T>&, Var, Var, Var);                                                 \
  template Var mean_abs_diff(Tape<T>&, Var, Var);                                              \
  template Var mean_squared_diff(Tape<T>&, Var, Var);

S2V_INSTANTIATE_OPS(float)
S2V_INSTANTIATE_OPS(double)

#undef S2V_INSTANTIATE_OPS

}  // namespace s2v::ops
