#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>

#include "s2v/label.hpp"

namespace s2v {

struct ClassMetrics {
  std::optional<double> sensitivity;  ///< percent; empty when undefined
  std::optional<double> precision;
  std::optional<double> f1;
};

/// Confusion counts with the positive class fixed at construction (faulty by default).
struct MetricsReport {
  Label positive = Label::faulty;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;
  double accuracy = 0.0;  ///< percent
  ClassMetrics healthy;
  ClassMetrics faulty;

  std::size_t total() const noexcept { return tp + fp + tn + fn; }
};

/// Throws DataError on empty or mismatched inputs.
MetricsReport compute_metrics(std::span<const Label> predictions, std::span<const Label> labels,
                              Label positive = Label::faulty);

/// Harmonic mean of two percentages; empty when either is undefined or both are zero.
std::optional<double> f1_score(std::optional<double> precision, std::optional<double> sensitivity);

/// Canonical JSON text; undefined metrics are the string "n/a".
std::string to_json(const MetricsReport& report, const std::string& train_data = "",
                    const std::string& test_data = "");

/// Fixed-width table header, then one row per report in the column order
/// Train | Test | Accuracy | Healthy Sens/Prec/F1 | Faulty Sens/Prec/F1.
std::string table_header();
std::string table_row(const MetricsReport& report, const std::string& train_data,
                      const std::string& test_data);

}  // namespace s2v
