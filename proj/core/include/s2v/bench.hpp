#pragma once

#include <cstddef>
#include <string>

#include "s2v/models.hpp"

namespace s2v {

struct LatencyReport {
  double median_ms = 0.0;
  double min_ms = 0.0;
  double max_ms = 0.0;
  std::size_t repetitions = 0;
  double segment_seconds = 0.0;
  /// 1000 * segment_seconds / median_ms.
  double real_time_factor = 0.0;
};

/// Median wall-clock of single-segment OpUNet::forward on the calling thread, after `warmup`
/// untimed runs. Throws ConfigError when repetitions < 10.
LatencyReport benchmark_inference(const OpUNet& model, const FeatureMap<float>& segment,
                                  std::size_t repetitions, std::size_t warmup = 3);

std::string to_json(const LatencyReport& report);

}  // namespace s2v
