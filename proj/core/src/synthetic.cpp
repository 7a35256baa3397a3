#include "s2v/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "s2v/error.hpp"

namespace s2v {
namespace {

namespace fs = std::filesystem;

void validate(const SyntheticSpec& spec) {
  if (spec.num_healthy + spec.num_faulty == 0) throw ConfigError("synthetic spec has no segments");
  if (spec.num_healthy == 0 || spec.num_faulty == 0) {
    throw ConfigError("synthetic dataset needs at least one healthy and one faulty segment");
  }
  if (spec.sample_rate_hz <= 0.0 || spec.segment_seconds <= 0.0) {
    throw ConfigError("synthetic sample rate and segment duration must be positive");
  }
  if (spec.base_frequencies_hz.size() != spec.base_amplitudes.size()) {
    throw ConfigError("base_frequencies_hz and base_amplitudes differ in length");
  }
  if (spec.fir_taps.empty()) throw ConfigError("synthetic FIR needs at least one tap");
  if (spec.speeds_rpm.empty()) throw ConfigError("synthetic spec has no speeds");
  if (!spec.speed_weights.empty() && spec.speed_weights.size() != spec.speeds_rpm.size()) {
    throw ConfigError("speed_weights must match speeds_rpm in length");
  }
  if (spec.reference_speed_rpm <= 0.0) throw ConfigError("reference speed must be positive");
  if (spec.noise_level < 0.0) throw ConfigError("noise level must be non-negative");
}

}  // namespace

std::vector<float> fir_filter(std::span<const float> x, std::span<const double> taps) {
  std::vector<float> out(x.size());
  for (std::size_t n = 0; n < x.size(); ++n) {
    double acc = 0.0;
    for (std::size_t k = 0; k < taps.size() && k <= n; ++k) acc += taps[k] * x[n - k];
    out[n] = static_cast<float>(acc);
  }
  return out;
}

std::vector<SyntheticRecord> synthesize_records(const SyntheticSpec& spec) {
  validate(spec);
  const std::size_t total = spec.num_healthy + spec.num_faulty;
  const std::size_t n = samples_for(spec.sample_rate_hz, spec.segment_seconds);
  if (n == 0) throw ConfigError("synthetic segment has zero samples");

  std::vector<double> speeds;
  for (std::size_t i = 0; i < spec.speeds_rpm.size(); ++i) {
    const std::size_t w = spec.speed_weights.empty() ? 1 : spec.speed_weights[i];
    speeds.insert(speeds.end(), w, spec.speeds_rpm[i]);
  }
  if (speeds.empty()) throw ConfigError("speed_weights are all zero");

  std::mt19937_64 rng(spec.seed);
  std::vector<Label> labels(spec.num_healthy, Label::healthy);
  labels.insert(labels.end(), spec.num_faulty, Label::faulty);
  // std::shuffle is implementation-defined; a hand-rolled Fisher-Yates keeps datasets portable.
  for (std::size_t i = total - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(labels[i], labels[j]);
  }

  const double two_pi = 2.0 * std::numbers::pi;
  std::vector<SyntheticRecord> records;
  records.reserve(total);
  for (std::size_t s = 0; s < total; ++s) {
    const double speed = speeds[s % speeds.size()];
    const double scale = speed / spec.reference_speed_rpm;
    std::vector<double> phases(spec.base_frequencies_hz.size());
    for (auto& p : phases) p = two_pi * static_cast<double>(rng() >> 11) * 0x1.0p-53;
    const double fault_phase = two_pi * static_cast<double>(rng() >> 11) * 0x1.0p-53;
    std::mt19937_64 noise_rng(rng());
    std::normal_distribution<double> noise(0.0, 1.0);

    std::vector<float> sound(n);
    const bool faulty = labels[s] == Label::faulty;
    for (std::size_t t = 0; t < n; ++t) {
      const double time = static_cast<double>(t) / spec.sample_rate_hz;
      double v = 0.0;
      for (std::size_t k = 0; k < phases.size(); ++k) {
        v += spec.base_amplitudes[k] *
             std::sin(two_pi * spec.base_frequencies_hz[k] * scale * time + phases[k]);
      }
      if (faulty) {
        v += spec.fault_amplitude * std::sin(two_pi * spec.fault_frequency_hz * time + fault_phase);
      }
      if (spec.noise_level > 0.0) v += spec.noise_level * noise(noise_rng);
      sound[t] = static_cast<float>(v);
    }
    std::vector<float> vib = fir_filter(sound, spec.fir_taps);
    records.push_back({{std::move(sound), spec.sample_rate_hz},
                       {std::move(vib), spec.sample_rate_hz},
                       labels[s],
                       speed});
  }
  return records;
}

DatasetManifest generate_synthetic(const SyntheticSpec& spec, const fs::path& out_dir) {
  const auto records = synthesize_records(spec);
  fs::create_directories(out_dir);
  DatasetManifest manifest;
  for (std::size_t i = 0; i < records.size(); ++i) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "seg%05zu", i);
    const fs::path sound = out_dir / (std::string(stem) + "_sound.wav");
    const fs::path vib = out_dir / (std::string(stem) + "_vib.wav");
    write_wav(sound, records[i].sound, WavEncoding::float32);
    write_wav(vib, records[i].vibration, WavEncoding::float32);
    manifest.entries.push_back({sound, vib, records[i].label, spec.machine_id, records[i].speed_rpm,
                                spec.load, spec.sensor_id, spec.segment_seconds});
  }
  write_manifest(out_dir / "manifest.tsv", manifest);
  return manifest;
}

}  // namespace s2v
