#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "s2v/dataio.hpp"
#include "s2v/label.hpp"

namespace s2v {

/// Parameters of a deterministic paired sound/vibration surrogate dataset.
///
/// Sound: sum of sinusoids at `base_frequencies_hz` (scaled by speed / reference_speed_rpm) with
/// random phases, plus Gaussian noise. Faulty segments also carry a tone at `fault_frequency_hz`
/// (independent of speed) with amplitude `fault_amplitude`.
/// Vibration: causal FIR filter of the sound (zero initial state). The fault tone reaches the
/// vibration through the filter, so the sound-to-vibration map stays linear for both classes.
struct SyntheticSpec {
  std::uint64_t seed = 1;
  std::size_t num_healthy = 16;
  std::size_t num_faulty = 16;
  double sample_rate_hz = 4096.0;
  double segment_seconds = 1.0;
  std::vector<double> base_frequencies_hz{96.0, 208.0, 352.0};
  std::vector<double> base_amplitudes{1.0, 0.6, 0.4};
  double fault_frequency_hz = 624.0;
  double fault_amplitude = 0.5;
  double noise_level = 0.02;
  std::vector<double> fir_taps{0.5, 0.3, 0.15, 0.05};
  /// Segment i is assigned speeds[i % speeds.size()] after expanding each speed by its weight.
  std::vector<double> speeds_rpm{480.0, 680.0, 1010.0};
  std::vector<std::size_t> speed_weights{};
  double reference_speed_rpm = 680.0;
  std::string machine_id = "synthetic";
  std::string load = "0.20kN";
  std::string sensor_id = "1";
};

struct SyntheticRecord {
  Signal sound;
  Signal vibration;
  Label label = Label::healthy;
  double speed_rpm = 0.0;
};

/// In-memory generation; a pure function of `spec`. Throws ConfigError on zero segment counts.
std::vector<SyntheticRecord> synthesize_records(const SyntheticSpec& spec);

/// Writes float32 WAV pairs plus `manifest.tsv` into `out_dir` and returns the manifest.
DatasetManifest generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out_dir);

/// Causal FIR with zero initial state: out[n] = sum_k taps[k] * x[n - k].
std::vector<float> fir_filter(std::span<const float> x, std::span<const double> taps);

}  // namespace s2v
