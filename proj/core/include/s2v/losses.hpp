#pragma once

#include <array>
#include <span>

#include "s2v/autodiff.hpp"
#include "s2v/signal.hpp"

namespace s2v {

/// Which spectral representation the spectral loss compares.
enum class SpectralMode {
  magnitude,  ///< sqrt(re^2 + im^2 + eps)
  power,      ///< re^2 + im^2
};

struct SpectralLossConfig {
  StftConfig stft;
  SpectralMode mode = SpectralMode::magnitude;
  double eps = 1e-12;
};

/// Components of the cascaded training objective for one batch.
struct LossBreakdown {
  double time_l1 = 0.0;
  double stft_l1 = 0.0;
  double class_mse = 0.0;
  double lambda = 100.0;
  double total = 0.0;
};

/// mean |y - synth|. Throws ShapeError on length mismatch.
template <typename T>
double loss_time(std::span<const T> y, std::span<const T> synth);

/// mean over frames x bins of | |STFT(y)| - |STFT(synth)| |.
template <typename T>
double loss_stft(std::span<const T> y, std::span<const T> synth,
                 const SpectralLossConfig& config = {});

/// mean over the two outputs of (score_real - score_synth)^2.
template <typename T>
double loss_class(const std::array<T, 2>& score_real, const std::array<T, 2>& score_synth);

/// total = class + lambda * (time + stft).
LossBreakdown loss_total(double class_mse, double time_l1, double stft_l1, double lambda = 100.0);

namespace ops {

/// Spectral representation of a 1 x L (or rank-1) signal: [frames x bins].
template <typename T>
Var stft_spectrum(Tape<T>& tape, Var x, const SpectralLossConfig& config);

template <typename T>
Var time_l1(Tape<T>& tape, Var y, Var synth);

template <typename T>
Var stft_l1(Tape<T>& tape, Var y, Var synth, const SpectralLossConfig& config);

template <typename T>
Var class_mse(Tape<T>& tape, Var score_real, Var score_synth);

/// class + lambda * (time + stft), all scalars.
template <typename T>
Var total_loss(Tape<T>& tape, Var class_term, Var time_term, Var stft_term, T lambda);

}  // namespace ops

}  // namespace s2v
