#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "s2v/losses.hpp"
#include "s2v/metrics.hpp"
#include "s2v/models.hpp"
#include "s2v/signal.hpp"

namespace s2v {

/// What the classification term compares the synthesized segment's scores against.
enum class ClassTarget {
  paired,  ///< scores of the real vibration segment, C(Y)
  label,   ///< the +-1 encoding of the segment's label
};

struct TrainConfig {
  std::size_t batch_size = 8;
  std::size_t max_iterations = 1000;  ///< transformer mini-batch updates
  std::size_t classifier_epochs = 50;
  double learning_rate = 1e-4;
  double lambda = 100.0;
  std::uint64_t seed = 0;
  std::size_t segment_length = 4096;
  double sample_rate_hz = 4096.0;
  /// Best-so-far checkpoints are written here when non-empty.
  std::filesystem::path checkpoint_dir;
  /// Validation loss is evaluated after iteration 1, every `validation_interval` iterations and
  /// after the last one.
  std::size_t validation_interval = 50;
  /// Worker threads for per-sample gradients; 0 uses the hardware concurrency.
  std::size_t threads = 0;
  /// Forces a single worker.
  bool reproducible = false;
  /// Also update the cascaded classifier during transformer training (ablation).
  bool joint_classifier = false;
  ClassTarget class_target = ClassTarget::paired;
  SpectralLossConfig spectral;
  OpUNetConfig transformer;
  FaultClassifierConfig classifier;

  /// Throws ConfigError on non-positive sizes or rates.
  void validate() const;
  std::size_t worker_count() const;
};

struct SplitConfig {
  double train_seconds = 2100.0;
  double val_seconds = 800.0;
  double segment_seconds = 1.0;
};

struct DataSplit {
  std::vector<SegmentPair> train;
  std::vector<SegmentPair> val;
  std::vector<SegmentPair> test;
  double held_out_speed = 0.0;
};

/// Segments at `held_out_speed` form the test set. The remaining segments, in their original
/// (chronological) order, fill train for the first train_seconds and val for the next
/// val_seconds; anything after that is unused. Throws DataError listing the available speeds
/// when `held_out_speed` does not occur.
DataSplit split_dataset(std::span<const SegmentPair> records, double held_out_speed,
                        const SplitConfig& config = {});

/// The highest speed present (the default held-out speed).
double default_held_out_speed(std::span<const SegmentPair> records);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_mse = 0.0;
  double val_mse = 0.0;
  double val_accuracy = 0.0;
};

struct DetectorTrainingResult {
  FaultClassifier model;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_mse = 0.0;
};

/// MSE against the +-1 target encoding, Adam, `classifier_epochs` epochs; returns the epoch with
/// the lowest validation MSE. Throws DataError when the training set has a single class.
DetectorTrainingResult train_fault_detector(std::span<const SegmentPair> train,
                                            std::span<const SegmentPair> val,
                                            const TrainConfig& config);

struct IterationRecord {
  std::size_t iteration = 0;
  LossBreakdown train;
  std::optional<double> val_total;  ///< set on iterations where validation ran
};

struct TransformerTrainingResult {
  OpUNet model;
  std::optional<FaultClassifier> classifier;  ///< only for joint training
  std::vector<IterationRecord> history;
  std::size_t best_iteration = 0;
  double best_val_total = 0.0;
};

/// Cascaded training: per batch, the U-Net maps normalized sound to synthesized vibration, the
/// classifier scores both the real and the synthesized segment, and Adam minimizes
/// class + lambda*(time + stft) over the U-Net parameters. The classifier is frozen unless
/// `joint_classifier` is set. Returns the parameters with the best validation total.
/// When `log` is given, one `iter=...` line per iteration is written to it.
TransformerTrainingResult train_transformer(std::span<const SegmentPair> train,
                                            std::span<const SegmentPair> val,
                                            const TrainConfig& config,
                                            const FaultClassifier& detector,
                                            std::ostream* log = nullptr);

/// Batch-mean loss components of `model` over `segments` (no updates).
LossBreakdown evaluate_transformer(const OpUNet& model, const FaultClassifier& detector,
                                   std::span<const SegmentPair> segments,
                                   const TrainConfig& config);

std::vector<float> synthesize_segment(const OpUNet& model, std::span<const float> sound);

std::vector<Label> classify_segments(const FaultClassifier& model,
                                     std::span<const std::vector<float>> segments);

struct ExperimentResult {
  DetectorTrainingResult detector;
  TransformerTrainingResult transformer;
  MetricsReport real;         ///< detector on real test vibration
  MetricsReport synthesized;  ///< detector on synthesized test vibration
  double accuracy_gap = 0.0;  ///< |real.accuracy - synthesized.accuracy|, percentage points
};

/// Trains the detector on real vibration, trains the transformer against it, and evaluates the
/// detector on real and synthesized test vibration.
ExperimentResult run_experiment(const TrainConfig& config, const DataSplit& split,
                                std::ostream* log = nullptr);

}  // namespace s2v
