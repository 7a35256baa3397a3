#include "s2v/bench.hpp"

#include <algorithm>
#include <chrono>
#include <json.hpp>

#include "s2v/error.hpp"

namespace s2v {

LatencyReport benchmark_inference(const OpUNet& model, const FeatureMap<float>& segment,
                                  std::size_t repetitions, std::size_t warmup) {
  if (repetitions < 10) throw ConfigError("benchmark needs at least 10 repetitions");
  for (std::size_t i = 0; i < warmup; ++i) (void)model.forward(segment);
  std::vector<double> ms(repetitions);
  for (auto& m : ms) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto out = model.forward(segment);
    const auto t1 = std::chrono::steady_clock::now();
    m = std::chrono::duration<double, std::milli>(t1 - t0).count();
    (void)out;
  }
  std::vector<double> sorted = ms;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  LatencyReport r;
  r.median_ms = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  r.min_ms = sorted.front();
  r.max_ms = sorted.back();
  r.repetitions = repetitions;
  r.segment_seconds = static_cast<double>(model.segment_length()) / model.sample_rate_hz();
  r.real_time_factor = 1000.0 * r.segment_seconds / r.median_ms;
  return r;
}

std::string to_json(const LatencyReport& r) {
  return nlohmann::json{{"median_ms", r.median_ms},
                        {"min_ms", r.min_ms},
                        {"max_ms", r.max_ms},
                        {"repetitions", r.repetitions},
                        {"segment_seconds", r.segment_seconds},
                        {"real_time_factor", r.real_time_factor}}
      .dump();
}

}  // namespace s2v
