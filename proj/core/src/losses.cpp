#include "s2v/losses.hpp"

#include <cmath>
#include <memory>

#include "s2v/error.hpp"
#include "s2v/ops.hpp"

namespace s2v {
namespace {

template <typename T>
struct Spectrum {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<T> re, im, value;
};

template <typename T>
Spectrum<T> compute_spectrum(std::span<const T> x, const SpectralLossConfig& config) {
  const auto& basis = StftBasis<T>::get(config.stft.fft_size);
  Spectrum<T> s;
  s.frames = stft_frame_count(x.size(), config.stft);
  s.bins = basis.num_bins();
  const auto framed = frame_signal(x, config.stft);
  s.re.resize(s.frames * s.bins);
  s.im.resize(s.frames * s.bins);
  basis.forward(framed, s.frames, s.re, s.im);
  s.value.resize(s.re.size());
  const T eps = static_cast<T>(config.eps);
  for (std::size_t i = 0; i < s.re.size(); ++i) {
    const T p = s.re[i] * s.re[i] + s.im[i] * s.im[i];
    s.value[i] = config.mode == SpectralMode::magnitude ? std::sqrt(p + eps) : p;
  }
  return s;
}

template <typename T>
void require_equal_length(std::span<const T> a, std::span<const T> b, const char* what) {
  if (a.size() != b.size()) {
    throw ShapeError(std::string(what) + ": lengths " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()) + " differ");
  }
}

}  // namespace

template <typename T>
double loss_time(std::span<const T> y, std::span<const T> synth) {
  require_equal_length(y, synth, "loss_time");
  if (y.empty()) throw ShapeError("loss_time: empty segments");
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) acc += std::abs(static_cast<double>(y[i]) - synth[i]);
  return acc / static_cast<double>(y.size());
}

template <typename T>
double loss_stft(std::span<const T> y, std::span<const T> synth, const SpectralLossConfig& config) {
  require_equal_length(y, synth, "loss_stft");
  const auto a = compute_spectrum(y, config);
  const auto b = compute_spectrum(synth, config);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.value.size(); ++i) {
    acc += std::abs(static_cast<double>(a.value[i]) - b.value[i]);
  }
  return acc / static_cast<double>(a.value.size());
}

template <typename T>
double loss_class(const std::array<T, 2>& score_real, const std::array<T, 2>& score_synth) {
  const double d0 = static_cast<double>(score_real[0]) - score_synth[0];
  const double d1 = static_cast<double>(score_real[1]) - score_synth[1];
  return 0.5 * (d0 * d0 + d1 * d1);
}

LossBreakdown loss_total(double class_mse, double time_l1, double stft_l1, double lambda) {
  return {time_l1, stft_l1, class_mse, lambda, class_mse + lambda * (time_l1 + stft_l1)};
}

namespace ops {

template <typename T>
Var stft_spectrum(Tape<T>& tape, Var x, const SpectralLossConfig& config) {
  const auto& xv = tape.value(x);
  auto spec = std::make_shared<Spectrum<T>>(compute_spectrum<T>(xv.values(), config));
  Tensor<T> out({spec->frames, spec->bins}, spec->value);
  return tape.record(std::move(out), {x}, [=](Tape<T>& t, const Tensor<T>& g) {
    const auto& basis = StftBasis<T>::get(config.stft.fft_size);
    std::vector<T> d_re(g.size()), d_im(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      const T factor = config.mode == SpectralMode::magnitude ? g[i] / spec->value[i] : 2 * g[i];
      d_re[i] = factor * spec->re[i];
      d_im[i] = factor * spec->im[i];
    }
    const std::size_t n = config.stft.fft_size;
    std::vector<T> d_frames(spec->frames * n);
    basis.adjoint(d_re, d_im, spec->frames, d_frames);
    auto& dx = t.grad_buffer(x);
    for (std::size_t f = 0; f < spec->frames; ++f) {
      T* dst = dx.data() + f * config.stft.hop;
      const T* src = d_frames.data() + f * n;
      for (std::size_t i = 0; i < n; ++i) dst[i] += src[i];
    }
  });
}

template <typename T>
Var time_l1(Tape<T>& tape, Var y, Var synth) {
  return mean_abs_diff(tape, y, synth);
}

template <typename T>
Var stft_l1(Tape<T>& tape, Var y, Var synth, const SpectralLossConfig& config) {
  return mean_abs_diff(tape, stft_spectrum(tape, y, config), stft_spectrum(tape, synth, config));
}

template <typename T>
Var class_mse(Tape<T>& tape, Var score_real, Var score_synth) {
  return mean_squared_diff(tape, score_real, score_synth);
}

template <typename T>
Var total_loss(Tape<T>& tape, Var class_term, Var time_term, Var stft_term, T lambda) {
  return add(tape, class_term, scale(tape, add(tape, time_term, stft_term), lambda));
}

}  // namespace ops

#define S2V_INSTANTIATE_LOSSES(T)                                                              \
  template double loss_time(std::span<const T>, std::span<const T>);                           \
  template double loss_stft(std::span<const T>, std::span<const T>, const SpectralLossConfig&); \
  template double loss_class(const std::array<T, 2>&, const std::array<T, 2>&);                \
  template Var ops::stft_spectrum(Tape<T>&, Var, const SpectralLossConfig&);                   \
  template Var ops::time_l1(Tape<T>&, Var, Var);                                               \
  template Var ops::stft_l1(Tape<T>&, Var, Var, const SpectralLossConfig&);                    \
  template Var ops::class_mse(Tape<T>&, Var, Var);                                             \
  template Var ops::total_loss(Tape<T>&, Var, Var, Var, T);

S2V_INSTANTIATE_LOSSES(float)
S2V_INSTANTIATE_LOSSES(double)

#undef S2V_INSTANTIATE_LOSSES

}  // namespace s2v
