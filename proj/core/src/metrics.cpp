#include "s2v/metrics.hpp"

#include <cstdio>
#include <json.hpp>

#include "s2v/error.hpp"

namespace s2v {
namespace {

std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

nlohmann::json metric_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json("n/a");
}

nlohmann::json class_json(const ClassMetrics& m) {
  return {{"sensitivity", metric_json(m.sensitivity)},
          {"precision", metric_json(m.precision)},
          {"f1", metric_json(m.f1)}};
}

std::string cell(const std::optional<double>& v) {
  char buf[16];
  if (!v) return "     n/a";
  std::snprintf(buf, sizeof buf, "%8.2f", *v);
  return buf;
}

}  // namespace

std::optional<double> f1_score(std::optional<double> precision, std::optional<double> sensitivity) {
  if (!precision || !sensitivity || *precision + *sensitivity == 0.0) return std::nullopt;
  return 2.0 * *precision * *sensitivity / (*precision + *sensitivity);
}

MetricsReport compute_metrics(std::span<const Label> predictions, std::span<const Label> labels,
                              Label positive) {
  if (predictions.empty()) throw DataError("compute_metrics: no predictions");
  if (predictions.size() != labels.size()) {
    throw DataError("compute_metrics: " + std::to_string(predictions.size()) +
                    " predictions for " + std::to_string(labels.size()) + " labels");
  }
  MetricsReport r;
  r.positive = positive;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool pred_pos = predictions[i] == positive;
    const bool true_pos = labels[i] == positive;
    if (pred_pos && true_pos) ++r.tp;
    else if (pred_pos) ++r.fp;
    else if (true_pos) ++r.fn;
    else ++r.tn;
  }
  r.accuracy = 100.0 * static_cast<double>(r.tp + r.tn) / static_cast<double>(r.total());

  ClassMetrics pos{ratio(r.tp, r.tp + r.fn), ratio(r.tp, r.tp + r.fp), std::nullopt};
  ClassMetrics neg{ratio(r.tn, r.tn + r.fp), ratio(r.tn, r.tn + r.fn), std::nullopt};
  pos.f1 = f1_score(pos.precision, pos.sensitivity);
  neg.f1 = f1_score(neg.precision, neg.sensitivity);
  r.faulty = positive == Label::faulty ? pos : neg;
  r.healthy = positive == Label::faulty ? neg : pos;
  return r;
}

std::string to_json(const MetricsReport& r, const std::string& train_data,
                    const std::string& test_data) {
  nlohmann::json j{{"positive", std::string(to_string(r.positive))},
                   {"tp", r.tp},
                   {"fp", r.fp},
                   {"tn", r.tn},
                   {"fn", r.fn},
                   {"total", r.total()},
                   {"accuracy", r.accuracy},
                   {"healthy", class_json(r.healthy)},
                   {"faulty", class_json(r.faulty)}};
  if (!train_data.empty()) j["train"] = train_data;
  if (!test_data.empty()) j["test"] = test_data;
  return j.dump();
}

std::string table_header() {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-10s %-10s %8s | %8s %8s %8s | %8s %8s %8s\n", "Train", "Test",
                "Acc", "H-Sens", "H-Prec", "H-F1", "F-Sens", "F-Prec", "F-F1");
  return buf;
}

std::string table_row(const MetricsReport& r, const std::string& train_data,
                      const std::string& test_data) {
  char head[64];
  std::snprintf(head, sizeof head, "%-10s %-10s %8.2f", train_data.c_str(), test_data.c_str(),
                r.accuracy);
  return std::string(head) + " | " + cell(r.healthy.sensitivity) + " " +
         cell(r.healthy.precision) + " " + cell(r.healthy.f1) + " | " +
         cell(r.faulty.sensitivity) + " " + cell(r.faulty.precision) + " " + cell(r.faulty.f1) +
         "\n";
}

}  // namespace s2v
