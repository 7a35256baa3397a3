#include "s2v/signal.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include "gemm.hpp"
#include "s2v/error.hpp"
#include "s2v/logging.hpp"

namespace s2v {

template <typename T>
NormalizedSegment<T> normalize_segment(std::span<const T> x) {
  if (x.empty()) throw DataError("normalize_segment: empty segment");
  const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
  const double lo = *lo_it, hi = *hi_it;
  NormalizedSegment<T> out;
  out.values.resize(x.size());
  if (!(hi > lo)) {
    out.degenerate = true;
    return out;
  }
  const double range = hi - lo;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = 2.0 * (static_cast<double>(x[i]) - lo) / range - 1.0;
    out.values[i] = static_cast<T>(std::clamp(v, -1.0, 1.0));
  }
  return out;
}

std::size_t samples_for(double sample_rate_hz, double seconds) {
  return static_cast<std::size_t>(std::llround(sample_rate_hz * seconds));
}

std::vector<std::vector<float>> segment_signal(const Signal& signal, double seg_seconds,
                                               double hop_seconds) {
  if (signal.sample_rate_hz <= 0) throw DataError("segment_signal: sample rate must be positive");
  const std::size_t seg = samples_for(signal.sample_rate_hz, seg_seconds);
  const std::size_t hop = samples_for(signal.sample_rate_hz, hop_seconds);
  if (seg == 0 || hop == 0) throw DataError("segment_signal: segment and hop must span >= 1 sample");
  std::vector<std::vector<float>> out;
  if (signal.samples.size() < seg) {
    log_warning("signal of " + std::to_string(signal.samples.size()) +
                " samples is shorter than one segment (" + std::to_string(seg) + ")");
    return out;
  }
  for (std::size_t start = 0; start + seg <= signal.samples.size(); start += hop) {
    const auto first = signal.samples.begin() + static_cast<std::ptrdiff_t>(start);
    out.emplace_back(first, first + static_cast<std::ptrdiff_t>(seg));
  }
  return out;
}

template <typename T>
std::vector<T> hann_window(std::size_t n) {
  if (n < 2) throw ShapeError("hann_window: N must be >= 2");
  std::vector<T> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = static_cast<T>(0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                                 static_cast<double>(n))));
  }
  return w;
}

std::size_t stft_frame_count(std::size_t length, const StftConfig& config) {
  if (config.fft_size < 2 || config.hop == 0) throw ShapeError("stft: need N >= 2 and hop >= 1");
  if (length < config.fft_size) {
    throw ShapeError("segment shorter than FFT size (" + std::to_string(length) + " < " +
                     std::to_string(config.fft_size) + ")");
  }
  return (length - config.fft_size) / config.hop + 1;
}

template <typename T>
StftBasis<T>::StftBasis(std::size_t fft_size) : fft_size_(fft_size), num_bins_(fft_size / 2 + 1) {
  const auto window = hann_window<double>(fft_size);
  cos_.resize(fft_size * num_bins_);
  sin_.resize(fft_size * num_bins_);
  for (std::size_t n = 0; n < fft_size; ++n) {
    for (std::size_t k = 0; k < num_bins_; ++k) {
      // Reduce k*n modulo N before scaling so large products keep full precision.
      const double angle = 2.0 * std::numbers::pi * static_cast<double>((k * n) % fft_size) /
                           static_cast<double>(fft_size);
      cos_[n * num_bins_ + k] = static_cast<T>(window[n] * std::cos(angle));
      sin_[n * num_bins_ + k] = static_cast<T>(window[n] * std::sin(angle));
    }
  }
}

template <typename T>
const StftBasis<T>& StftBasis<T>::get(std::size_t fft_size) {
  static std::mutex mutex;
  static std::map<std::size_t, std::unique_ptr<StftBasis>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[fft_size];
  if (!slot) slot = std::make_unique<StftBasis>(fft_size);
  return *slot;
}

template <typename T>
void StftBasis<T>::forward(std::span<const T> frames, std::size_t count, std::span<T> re,
                           std::span<T> im) const {
  detail::gemm(frames.data(), cos_.data(), re.data(), count, fft_size_, num_bins_);
  detail::gemm(frames.data(), sin_.data(), im.data(), count, fft_size_, num_bins_);
  for (auto& v : im) v = -v;
}

template <typename T>
void StftBasis<T>::adjoint(std::span<const T> d_re, std::span<const T> d_im, std::size_t count,
                           std::span<T> d_frames) const {
  detail::gemm_nt(d_re.data(), cos_.data(), d_frames.data(), count, num_bins_, fft_size_);
  std::vector<T> tmp(count * fft_size_);
  detail::gemm_nt(d_im.data(), sin_.data(), tmp.data(), count, num_bins_, fft_size_);
  for (std::size_t i = 0; i < tmp.size(); ++i) d_frames[i] -= tmp[i];
}

template <typename T>
std::vector<T> frame_signal(std::span<const T> x, const StftConfig& config) {
  const std::size_t frames = stft_frame_count(x.size(), config);
  std::vector<T> out(frames * config.fft_size);
  for (std::size_t t = 0; t < frames; ++t) {
    std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(t * config.hop), config.fft_size,
                out.begin() + static_cast<std::ptrdiff_t>(t * config.fft_size));
  }
  return out;
}

template <typename T>
ComplexFrames<T> stft(std::span<const T> x, const StftConfig& config) {
  const std::size_t frames = stft_frame_count(x.size(), config);
  const auto& basis = StftBasis<T>::get(config.fft_size);
  const auto framed = frame_signal(x, config);
  std::vector<T> re(frames * basis.num_bins()), im(frames * basis.num_bins());
  basis.forward(framed, frames, re, im);
  ComplexFrames<T> out{frames, basis.num_bins(), {}};
  out.values.resize(re.size());
  for (std::size_t i = 0; i < re.size(); ++i) out.values[i] = {re[i], im[i]};
  return out;
}

template <typename T>
Spectrogram<T> spectrogram(std::span<const T> x, const StftConfig& config) {
  const auto z = stft(x, config);
  Spectrogram<T> out{z.num_frames, z.num_bins, config.fft_size, config.hop, {}};
  out.values.resize(z.values.size());
  for (std::size_t i = 0; i < z.values.size(); ++i) out.values[i] = std::norm(z.values[i]);
  return out;
}

#define S2V_INSTANTIATE_SIGNAL(T)                                                              \
  template NormalizedSegment<T> normalize_segment(std::span<const T>);                         \
  template std::vector<T> hann_window(std::size_t);                                            \
  template class StftBasis<T>;                                                                 \
  template std::vector<T> frame_signal(std::span<const T>, const StftConfig&);                 \
  template ComplexFrames<T> stft(std::span<const T>, const StftConfig&);                       \
  template Spectrogram<T> spectrogram(std::span<const T>, const StftConfig&);

S2V_INSTANTIATE_SIGNAL(float)
S2V_INSTANTIATE_SIGNAL(double)

#undef S2V_INSTANTIATE_SIGNAL

}  // namespace s2v
