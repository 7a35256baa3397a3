#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "s2v/label.hpp"

namespace s2v {

struct Signal {
  std::vector<float> samples;
  double sample_rate_hz = 0.0;
};

struct SegmentMeta {
  std::string machine_id;
  double speed_rpm = 0.0;
  std::string load;
  std::string sensor_id;
};

/// One normalized sound segment, its simultaneously recorded vibration segment and the health label.
struct SegmentPair {
  std::vector<float> sound;
  std::vector<float> vibration;
  Label label = Label::healthy;
  SegmentMeta meta;
};

template <typename T>
struct NormalizedSegment {
  std::vector<T> values;
  bool degenerate = false;  ///< constant input; values are all zero
};

/// Linear min/max scaling to [-1, 1]: out = 2(x - min)/(max - min) - 1.
/// A constant segment maps to zeros with `degenerate` set. Throws DataError on empty input.
template <typename T>
NormalizedSegment<T> normalize_segment(std::span<const T> x);

/// round(sample_rate_hz * seconds).
std::size_t samples_for(double sample_rate_hz, double seconds);

/// Contiguous windows of `seg_seconds` every `hop_seconds`; a trailing partial window is dropped.
/// A signal shorter than one window yields no segments and a logged warning.
std::vector<std::vector<float>> segment_signal(const Signal& signal, double seg_seconds = 1.0,
                                               double hop_seconds = 1.0);

/// Periodic Hann window, w[n] = 0.5(1 - cos(2 pi n / N)).
template <typename T>
std::vector<T> hann_window(std::size_t n);

struct StftConfig {
  std::size_t fft_size = 256;
  std::size_t hop = 128;
};

/// floor((length - N)/hop) + 1; throws ShapeError("segment shorter than FFT size") when length < N.
std::size_t stft_frame_count(std::size_t length, const StftConfig& config);

template <typename T>
struct ComplexFrames {
  std::size_t num_frames = 0;
  std::size_t num_bins = 0;
  std::vector<std::complex<T>> values;  ///< [num_frames][num_bins]

  const std::complex<T>& at(std::size_t frame, std::size_t bin) const {
    return values[frame * num_bins + bin];
  }
};

/// Hann-windowed DFT of each frame x[t*hop, t*hop + N), bins 0..N/2.
template <typename T>
ComplexFrames<T> stft(std::span<const T> x, const StftConfig& config = {});

template <typename T>
struct Spectrogram {
  std::size_t num_frames = 0;
  std::size_t num_bins = 0;
  std::size_t fft_size = 0;
  std::size_t hop = 0;
  std::vector<T> values;  ///< |STFT|^2, [num_frames][num_bins]

  T at(std::size_t frame, std::size_t bin) const { return values[frame * num_bins + bin]; }
};

template <typename T>
Spectrogram<T> spectrogram(std::span<const T> x, const StftConfig& config = {});

/// Windowed real DFT basis for one FFT size, shared by stft() and the spectral loss.
///
/// With frames F [num_frames x N] (raw, unwindowed samples), the transform is
///   re = F * C,  im = -F * S,  C[n][k] = w[n] cos(2 pi k n / N),  S[n][k] = w[n] sin(2 pi k n / N).
template <typename T>
class StftBasis {
 public:
  /// Process-wide cached basis for `fft_size` (thread safe).
  static const StftBasis& get(std::size_t fft_size);

  explicit StftBasis(std::size_t fft_size);

  std::size_t fft_size() const noexcept { return fft_size_; }
  std::size_t num_bins() const noexcept { return num_bins_; }

  /// frames [count x N] -> re, im [count x bins].
  void forward(std::span<const T> frames, std::size_t count, std::span<T> re,
               std::span<T> im) const;
  /// Adjoint of forward(): d_frames [count x N] = d_re * C^T - d_im * S^T.
  void adjoint(std::span<const T> d_re, std::span<const T> d_im, std::size_t count,
               std::span<T> d_frames) const;

 private:
  std::size_t fft_size_;
  std::size_t num_bins_;
  std::vector<T> cos_;
  std::vector<T> sin_;
};

/// Copies x[t*hop, t*hop + N) for every frame into a [frames x N] row-major buffer.
template <typename T>
std::vector<T> frame_signal(std::span<const T> x, const StftConfig& config);

}  // namespace s2v
