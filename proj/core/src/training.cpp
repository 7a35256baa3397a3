#include "s2v/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <ostream>
#include <random>
#include <set>
#include <thread>

#include "s2v/adam.hpp"
#include "s2v/checkpoint.hpp"
#include "s2v/error.hpp"
#include "s2v/logging.hpp"
#include "s2v/ops.hpp"

namespace s2v {
namespace {

/// Runs fn(i) for i in [0, count) on `workers` threads. Results must go to per-index slots.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = count;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

/// Fisher-Yates with the run generator; std::shuffle's algorithm is implementation-defined.
void shuffle_indices(std::vector<std::size_t>& idx, std::mt19937_64& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(idx[i - 1], idx[j]);
  }
}

std::vector<Tensor<float>> snapshot(const std::vector<const Tensor<float>*>& params) {
  std::vector<Tensor<float>> out;
  out.reserve(params.size());
  for (const auto* p : params) out.push_back(*p);
  return out;
}

void restore(const std::vector<Tensor<float>*>& params, const std::vector<Tensor<float>>& saved) {
  for (std::size_t i = 0; i < params.size(); ++i) *params[i] = saved[i];
}

/// Sums per-sample gradients in sample order and divides by the batch size.
std::vector<Tensor<float>> reduce_mean(const std::vector<std::vector<Tensor<float>>>& per_sample) {
  std::vector<Tensor<float>> out = per_sample.front();
  for (std::size_t s = 1; s < per_sample.size(); ++s) {
    for (std::size_t p = 0; p < out.size(); ++p) {
      auto dst = out[p].values();
      const auto src = per_sample[s][p].values();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
  }
  const float inv = 1.0f / static_cast<float>(per_sample.size());
  for (auto& g : out) {
    for (auto& v : g.values()) v *= inv;
  }
  return out;
}

FeatureMap<float> segment_map(const std::vector<float>& x) { return as_feature_map(x); }

Tensor<float> score_tensor(const std::array<float, 2>& s) { return Tensor<float>({2}, {s[0], s[1]}); }

void check_segments(std::span<const SegmentPair> segments, std::size_t length, const char* what) {
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (segments[i].sound.size() != length || segments[i].vibration.size() != length) {
      throw ConfigError(std::string(what) + " segment " + std::to_string(i) + " has " +
                        std::to_string(segments[i].vibration.size()) +
                        " samples, segment length is " + std::to_string(length));
    }
  }
}

std::string format_iteration(const IterationRecord& r, double val_total) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "iter=%zu time=%.6f stft=%.6f class=%.6f total=%.6f val_total=%.6f",
                r.iteration, r.train.time_l1, r.train.stft_l1, r.train.class_mse, r.train.total,
                val_total);
  return buf;
}

FaultClassifierConfig classifier_config(const TrainConfig& cfg) {
  auto c = cfg.classifier;
  c.segment_length = cfg.segment_length;
  c.sample_rate_hz = cfg.sample_rate_hz;
  return c;
}

OpUNetConfig transformer_config(const TrainConfig& cfg) {
  auto c = cfg.transformer;
  c.segment_length = cfg.segment_length;
  c.sample_rate_hz = cfg.sample_rate_hz;
  return c;
}

struct ClassifierPass {
  double mse = 0.0;
  std::size_t correct = 0;
};

/// Value-only MSE and accuracy of the detector on labeled vibration.
ClassifierPass classifier_pass(const FaultClassifier& model, std::span<const SegmentPair> data,
                               std::size_t workers) {
  std::vector<std::array<float, 2>> scores(data.size());
  parallel_for(data.size(), workers,
               [&](std::size_t i) { scores[i] = model.forward(segment_map(data[i].vibration)); });
  ClassifierPass r;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto t = target_encoding(data[i].label);
    r.mse += 0.5 * (std::pow(double(scores[i][0]) - t[0], 2) + std::pow(double(scores[i][1]) - t[1], 2));
    if (predict_label(scores[i]) == data[i].label) ++r.correct;
  }
  if (!data.empty()) r.mse /= static_cast<double>(data.size());
  return r;
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (max_iterations == 0) throw ConfigError("max_iterations must be positive");
  if (classifier_epochs == 0) throw ConfigError("classifier_epochs must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
  if (segment_length == 0) throw ConfigError("segment_length must be positive");
  if (!(sample_rate_hz > 0.0)) throw ConfigError("sample_rate_hz must be positive");
  if (validation_interval == 0) throw ConfigError("validation_interval must be positive");
}

std::size_t TrainConfig::worker_count() const {
  if (reproducible) return 1;
  if (threads > 0) return threads;
  return std::max(1u, std::thread::hardware_concurrency());
}

double default_held_out_speed(std::span<const SegmentPair> records) {
  if (records.empty()) throw DataError("no segments to choose a held-out speed from");
  double best = records.front().meta.speed_rpm;
  for (const auto& r : records) best = std::max(best, r.meta.speed_rpm);
  return best;
}

DataSplit split_dataset(std::span<const SegmentPair> records, double held_out_speed,
                        const SplitConfig& config) {
  if (config.segment_seconds <= 0.0 || config.train_seconds < 0.0 || config.val_seconds < 0.0) {
    throw ConfigError("split durations must be non-negative and segment duration positive");
  }
  std::set<double> speeds;
  for (const auto& r : records) speeds.insert(r.meta.speed_rpm);
  if (!speeds.contains(held_out_speed)) {
    std::string list;
    for (double s : speeds) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%s%g", list.empty() ? "" : ", ", s);
      list += buf;
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%g", held_out_speed);
    throw DataError(std::string("held-out speed ") + buf + " RPM not in dataset; available: " +
                    (list.empty() ? "none" : list));
  }
  const auto n_train =
      static_cast<std::size_t>(std::llround(config.train_seconds / config.segment_seconds));
  const auto n_val =
      static_cast<std::size_t>(std::llround(config.val_seconds / config.segment_seconds));
  DataSplit split;
  split.held_out_speed = held_out_speed;
  for (const auto& r : records) {
    if (r.meta.speed_rpm == held_out_speed) {
      split.test.push_back(r);
    } else if (split.train.size() < n_train) {
      split.train.push_back(r);
    } else if (split.val.size() < n_val) {
      split.val.push_back(r);
    }
  }
  return split;
}

DetectorTrainingResult train_fault_detector(std::span<const SegmentPair> train,
                                            std::span<const SegmentPair> val,
                                            const TrainConfig& config) {
  config.validate();
  if (train.empty()) throw DataError("detector training set is empty");
  bool has_healthy = false, has_faulty = false;
  for (const auto& s : train) (s.label == Label::healthy ? has_healthy : has_faulty) = true;
  if (!has_healthy || !has_faulty) {
    throw DataError("detector training set contains a single class; the classifier is undefined");
  }
  check_segments(train, config.segment_length, "training");
  check_segments(val, config.segment_length, "validation");

  DetectorTrainingResult result{FaultClassifier::build(classifier_config(config), config.seed), {}, 0, 0.0};
  FaultClassifier& model = result.model;
  const auto params = model.parameters();
  AdamState<float> adam;
  std::mt19937_64 rng(config.seed ^ 0x5eedc1a55ULL);
  const std::size_t workers = config.worker_count();
  std::vector<std::size_t> order(train.size());
  std::vector<Tensor<float>> best;
  double best_mse = INFINITY;

  for (std::size_t epoch = 1; epoch <= config.classifier_epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle_indices(order, rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, order.size() - start);
      std::vector<std::vector<Tensor<float>>> grads(count);
      std::vector<double> losses(count);
      parallel_for(count, workers, [&](std::size_t b) {
        const auto& seg = train[order[start + b]];
        Tape<float> tape;
        const auto bound = model.bind(tape, true);
        const Var scores = model.forward(tape, tape.constant(segment_map(seg.vibration)), bound);
        const Var target = tape.constant(score_tensor(target_encoding(seg.label)));
        const Var loss = ops::mean_squared_diff(tape, scores, target);
        tape.backward(loss);
        losses[b] = tape.value(loss)[0];
        grads[b].reserve(bound.size());
        for (const Var v : bound) grads[b].push_back(tape.grad(v));
      });
      for (double l : losses) epoch_loss += l;
      const auto g = reduce_mean(grads);
      adam_step<float>(params, g, adam, config.learning_rate);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_mse = epoch_loss / static_cast<double>(train.size());
    const auto& monitor = val.empty() ? train : val;
    const auto pass = classifier_pass(model, monitor, workers);
    rec.val_mse = pass.mse;
    rec.val_accuracy = 100.0 * static_cast<double>(pass.correct) / static_cast<double>(monitor.size());
    result.history.push_back(rec);
    if (rec.val_mse < best_mse) {
      best_mse = rec.val_mse;
      result.best_epoch = epoch;
      best = snapshot(std::as_const(model).parameters());
    }
  }
  if (val.empty()) log_warning("detector: no validation segments; best epoch chosen on training data");
  restore(params, best);
  result.best_val_mse = best_mse;
  return result;
}

LossBreakdown evaluate_transformer(const OpUNet& model, const FaultClassifier& detector,
                                   std::span<const SegmentPair> segments,
                                   const TrainConfig& config) {
  if (segments.empty()) throw DataError("evaluate_transformer: no segments");
  if (detector.segment_length() != model.segment_length()) {
    throw ConfigError("detector input length " + std::to_string(detector.segment_length()) +
                      " does not match segment length " + std::to_string(model.segment_length()));
  }
  check_segments(segments, model.segment_length(), "evaluation");
  std::vector<LossBreakdown> parts(segments.size());
  parallel_for(segments.size(), config.worker_count(), [&](std::size_t i) {
    const auto& seg = segments[i];
    const auto synth = model.forward(segment_map(seg.sound));
    const std::span<const float> s = synth.values();
    const auto synth_scores = detector.forward(synth);
    const auto real_scores = config.class_target == ClassTarget::paired
                                 ? detector.forward(segment_map(seg.vibration))
                                 : target_encoding(seg.label);
    parts[i].time_l1 = loss_time<float>(seg.vibration, s);
    parts[i].stft_l1 = loss_stft<float>(seg.vibration, s, config.spectral);
    parts[i].class_mse = loss_class<float>(real_scores, synth_scores);
  });
  double t = 0.0, f = 0.0, c = 0.0;
  for (const auto& p : parts) {
    t += p.time_l1;
    f += p.stft_l1;
    c += p.class_mse;
  }
  const double n = static_cast<double>(segments.size());
  return loss_total(c / n, t / n, f / n, config.lambda);
}

TransformerTrainingResult train_transformer(std::span<const SegmentPair> train,
                                            std::span<const SegmentPair> val,
                                            const TrainConfig& config,
                                            const FaultClassifier& detector, std::ostream* log) {
  config.validate();
  if (detector.segment_length() != config.segment_length) {
    throw ConfigError("detector input length " + std::to_string(detector.segment_length()) +
                      " does not match segment length " + std::to_string(config.segment_length));
  }
  if (train.empty()) throw DataError("transformer training set is empty");
  check_segments(train, config.segment_length, "training");
  check_segments(val, config.segment_length, "validation");

  TransformerTrainingResult result{OpUNet::build(transformer_config(config), config.seed),
                                   std::nullopt, {}, 0, 0.0};
  OpUNet& model = result.model;
  if (config.joint_classifier) result.classifier = detector;
  const FaultClassifier& classifier = result.classifier ? *result.classifier : detector;

  auto params = model.parameters();
  if (result.classifier) {
    for (auto* p : result.classifier->parameters()) params.push_back(p);
  }
  AdamState<float> adam;
  const std::size_t workers = config.worker_count();

  // C(Y) is fixed for a frozen classifier, so it is computed once per training segment.
  std::vector<std::array<float, 2>> cached_real(train.size());
  if (config.class_target == ClassTarget::paired && !config.joint_classifier) {
    parallel_for(train.size(), workers, [&](std::size_t i) {
      cached_real[i] = detector.forward(segment_map(train[i].vibration));
    });
  }

  std::mt19937_64 rng(config.seed ^ 0x0be7ULL);
  std::vector<std::size_t> order(train.size());
  std::size_t cursor = order.size();
  std::vector<Tensor<float>> best;
  double best_val = INFINITY;
  double last_val = INFINITY;
  const float lambda = static_cast<float>(config.lambda);

  for (std::size_t iter = 1; iter <= config.max_iterations; ++iter) {
    if (cursor >= order.size()) {
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      shuffle_indices(order, rng);
      cursor = 0;
    }
    const std::size_t count = std::min(config.batch_size, order.size() - cursor);
    std::vector<std::vector<Tensor<float>>> grads(count);
    std::vector<LossBreakdown> parts(count);
    parallel_for(count, workers, [&](std::size_t b) {
      const std::size_t idx = order[cursor + b];
      const auto& seg = train[idx];
      Tape<float> tape;
      const auto unet_bound = model.bind(tape, true);
      const auto cls_bound = classifier.bind(tape, config.joint_classifier);
      const Var sound = tape.constant(segment_map(seg.sound));
      const Var vib = tape.constant(segment_map(seg.vibration));
      const Var synth = model.forward(tape, sound, unet_bound);
      const Var synth_scores = classifier.forward(tape, synth, cls_bound);
      Var real_scores;
      if (config.class_target == ClassTarget::label) {
        real_scores = tape.constant(score_tensor(target_encoding(seg.label)));
      } else if (config.joint_classifier) {
        real_scores = classifier.forward(tape, vib, cls_bound);
      } else {
        real_scores = tape.constant(score_tensor(cached_real[idx]));
      }
      const Var t = ops::time_l1(tape, vib, synth);
      const Var f = ops::stft_l1(tape, vib, synth, config.spectral);
      const Var c = ops::class_mse(tape, real_scores, synth_scores);
      const Var total = ops::total_loss(tape, c, t, f, lambda);
      tape.backward(total);
      parts[b] = loss_total(tape.value(c)[0], tape.value(t)[0], tape.value(f)[0], config.lambda);
      grads[b].reserve(params.size());
      for (const Var v : unet_bound) grads[b].push_back(tape.grad(v));
      if (config.joint_classifier) {
        for (const Var v : cls_bound) grads[b].push_back(tape.grad(v));
      }
    });
    cursor += count;

    IterationRecord rec;
    rec.iteration = iter;
    double t = 0.0, f = 0.0, c = 0.0;
    for (const auto& p : parts) {
      t += p.time_l1;
      f += p.stft_l1;
      c += p.class_mse;
    }
    const double n = static_cast<double>(count);
    rec.train = loss_total(c / n, t / n, f / n, config.lambda);

    const auto g = reduce_mean(grads);
    adam_step<float>(params, g, adam, config.learning_rate);

    // Validation scores the parameters produced by this iteration's update.
    const bool validate_now =
        iter == 1 || iter % config.validation_interval == 0 || iter == config.max_iterations;
    if (validate_now) {
      last_val = val.empty() ? evaluate_transformer(model, classifier, train, config).total
                             : evaluate_transformer(model, classifier, val, config).total;
      rec.val_total = last_val;
      if (last_val < best_val) {
        best_val = last_val;
        result.best_iteration = iter;
        best = snapshot(std::as_const(model).parameters());
        if (result.classifier) {
          for (const auto* p : std::as_const(*result.classifier).parameters()) best.push_back(*p);
        }
        if (!config.checkpoint_dir.empty()) {
          std::filesystem::create_directories(config.checkpoint_dir);
          ModelCheckpoint ckpt{model, result.classifier, {config.seed, iter, best_val}};
          save_checkpoint(ckpt, config.checkpoint_dir / "transformer_best.ckpt");
        }
      }
    }
    if (log) *log << format_iteration(rec, last_val) << '\n' << std::flush;
    result.history.push_back(rec);
  }
  if (val.empty()) log_warning("transformer: no validation segments; best iteration chosen on training data");
  restore(params, best);
  result.best_val_total = best_val;
  return result;
}

std::vector<float> synthesize_segment(const OpUNet& model, std::span<const float> sound) {
  if (sound.size() != model.segment_length()) {
    throw ShapeError("synthesize_segment: expected " + std::to_string(model.segment_length()) +
                     " samples, got " + std::to_string(sound.size()));
  }
  const auto out = model.forward(as_feature_map(sound));
  return out.storage();
}

std::vector<Label> classify_segments(const FaultClassifier& model,
                                     std::span<const std::vector<float>> segments) {
  std::vector<Label> out(segments.size());
  for (std::size_t i = 0; i < segments.size(); ++i) {
    out[i] = predict_label(model.forward(as_feature_map(segments[i])));
  }
  return out;
}

ExperimentResult run_experiment(const TrainConfig& config, const DataSplit& split,
                                std::ostream* log) {
  if (split.test.empty()) throw DataError("experiment needs test segments");
  auto detector = train_fault_detector(split.train, split.val, config);
  if (log) {
    for (const auto& e : detector.history) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "epoch=%zu train_mse=%.6f val_mse=%.6f val_acc=%.2f", e.epoch,
                    e.train_mse, e.val_mse, e.val_accuracy);
      *log << buf << '\n';
    }
  }
  auto transformer = train_transformer(split.train, split.val, config, detector.model, log);

  std::vector<std::vector<float>> real(split.test.size()), synth(split.test.size());
  std::vector<Label> labels(split.test.size());
  parallel_for(split.test.size(), config.worker_count(), [&](std::size_t i) {
    real[i] = split.test[i].vibration;
    synth[i] = synthesize_segment(transformer.model, split.test[i].sound);
  });
  for (std::size_t i = 0; i < split.test.size(); ++i) labels[i] = split.test[i].label;
  ExperimentResult r{std::move(detector), std::move(transformer), {}, {}, 0.0};
  r.real = compute_metrics(classify_segments(r.detector.model, real), labels);
  r.synthesized = compute_metrics(classify_segments(r.detector.model, synth), labels);
  r.accuracy_gap = std::abs(r.real.accuracy - r.synthesized.accuracy);
  return r;
}

}  // namespace s2v
