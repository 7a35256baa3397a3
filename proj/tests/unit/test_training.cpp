#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "s2v/error.hpp"
#include "s2v/synthetic.hpp"
#include "s2v/training.hpp"

using namespace s2v;

namespace {

SegmentPair stub(double speed, Label label, float tag) {
  SegmentPair p;
  p.sound = {tag};
  p.vibration = {tag};
  p.label = label;
  p.meta.speed_rpm = speed;
  return p;
}

TrainConfig small_config(std::size_t length = 256) {
  TrainConfig c;
  c.segment_length = length;
  c.sample_rate_hz = static_cast<double>(length);
  c.transformer.segment_length = length;
  c.transformer.sample_rate_hz = c.sample_rate_hz;
  c.transformer.widths = {4, 4, 6, 6, 8};
  c.classifier.segment_length = length;
  c.classifier.sample_rate_hz = c.sample_rate_hz;
  c.classifier.channels = 4;
  c.classifier.hidden = 8;
  c.seed = 3;
  c.reproducible = true;
  return c;
}

/// Healthy segments are a low tone, faulty ones a high tone; vibration is a smoothed copy.
std::vector<SegmentPair> tone_segments(std::size_t count, std::size_t length, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::vector<SegmentPair> out;
  for (std::size_t i = 0; i < count; ++i) {
    const bool faulty = i % 2 == 1;
    const double f = faulty ? 40.0 : 6.0, ph = phase(rng);
    SegmentPair p;
    p.label = faulty ? Label::faulty : Label::healthy;
    p.meta.speed_rpm = 480.0;
    std::vector<float> s(length);
    for (std::size_t n = 0; n < length; ++n)
      s[n] = static_cast<float>(std::sin(2.0 * std::numbers::pi * f * static_cast<double>(n) / static_cast<double>(length) + ph));
    const std::vector<double> taps{0.6, 0.4};
    p.sound = normalize_segment<float>(s).values;
    p.vibration = normalize_segment<float>(fir_filter(p.sound, taps)).values;
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

TEST_CASE("split by held-out speed") {
  std::vector<SegmentPair> recs;
  for (int i = 0; i < 30; ++i) recs.push_back(stub(i % 3 == 0 ? 480.0 : i % 3 == 1 ? 680.0 : 1010.0, Label::healthy, static_cast<float>(i)));
  SplitConfig sc;
  sc.train_seconds = 12;
  sc.val_seconds = 5;
  const auto split = split_dataset(recs, 1010.0, sc);
  CHECK(split.test.size() == 10);
  for (const auto& s : split.test) CHECK(s.meta.speed_rpm == 1010.0);
  CHECK(split.train.size() == 12);
  CHECK(split.val.size() == 5);
  std::set<float> seen;
  for (const auto* part : {&split.train, &split.val, &split.test})
    for (const auto& s : *part) {
      CHECK(seen.insert(s.sound[0]).second);
      if (part != &split.test) CHECK(s.meta.speed_rpm != 1010.0);
    }
  // Chronological order: train takes the earliest non-held-out segments.
  CHECK(split.train.front().sound[0] == 0.0f);
  CHECK(split.val.front().sound[0] == 18.0f);
  CHECK(default_held_out_speed(recs) == 1010.0);

  try {
    (void)split_dataset(recs, 900.0, sc);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("480") != std::string::npos);
    CHECK(msg.find("1010") != std::string::npos);
  }
}

TEST_CASE("default split boundaries on 2900 s of data") {
  std::vector<SegmentPair> recs;
  for (int i = 0; i < 2900; ++i) recs.push_back(stub(480.0, Label::healthy, static_cast<float>(i)));
  for (int i = 0; i < 50; ++i) recs.push_back(stub(1010.0, Label::faulty, -1.0f));
  const auto split = split_dataset(recs, 1010.0);
  CHECK(split.train.size() == 2100);
  CHECK(split.val.size() == 800);
  CHECK(split.test.size() == 50);
}

TEST_CASE("train config validation") {
  TrainConfig c;
  CHECK(c.batch_size == 8);
  CHECK(c.max_iterations == 1000);
  CHECK(c.classifier_epochs == 50);
  CHECK(c.learning_rate == 1e-4);
  CHECK(c.lambda == 100.0);
  CHECK_NOTHROW(c.validate());
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.learning_rate = -1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.reproducible = true;
  c.threads = 4;
  CHECK(c.worker_count() == 1);
}

TEST_CASE("fault detector training") {
  auto cfg = small_config();
  cfg.classifier.channels = 16;
  cfg.classifier.hidden = 32;
  const auto train = tone_segments(64, 256, 1);
  const auto val = tone_segments(16, 256, 2);

  SUBCASE("single-class training set is rejected") {
    std::vector<SegmentPair> healthy;
    for (const auto& s : train)
      if (s.label == Label::healthy) healthy.push_back(s);
    CHECK_THROWS_AS(train_fault_detector(healthy, val, cfg), DataError);
  }
  SUBCASE("separable classes are learned and history is deterministic") {
    const auto a = train_fault_detector(train, val, cfg);
    CHECK(a.history.size() == 50);
    double best = a.history.front().val_mse;
    for (const auto& h : a.history) best = std::min(best, h.val_mse);
    CHECK(a.best_val_mse == best);
    std::vector<std::vector<float>> vib;
    std::vector<Label> truth;
    for (const auto& s : train) {
      vib.push_back(s.vibration);
      truth.push_back(s.label);
    }
    CHECK(classify_segments(a.model, vib) == truth);

    const auto b = train_fault_detector(train, val, cfg);
    REQUIRE(b.history.size() == a.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
      CHECK(a.history[i].train_mse == b.history[i].train_mse);
      CHECK(a.history[i].val_mse == b.history[i].val_mse);
    }
  }
}

TEST_CASE("transformer training contract") {
  auto cfg = small_config();
  cfg.max_iterations = 30;
  cfg.validation_interval = 10;
  cfg.learning_rate = 1e-3;
  const auto train = tone_segments(8, 256, 3);
  const auto val = tone_segments(4, 256, 4);
  const auto detector = FaultClassifier::build(cfg.classifier, 5);
  std::vector<Tensor<float>> frozen;
  for (const auto* t : detector.parameters()) frozen.push_back(*t);

  std::ostringstream log;
  const auto a = train_transformer(train, val, cfg, detector, &log);
  std::size_t k = 0;
  for (const auto* t : detector.parameters()) CHECK(*t == frozen[k++]);

  REQUIRE(a.history.size() == 30);
  CHECK(a.history[0].val_total.has_value());
  CHECK(a.history[9].val_total.has_value());
  CHECK(a.history[29].val_total.has_value());
  CHECK_FALSE(a.history[4].val_total.has_value());
  double best = *a.history[0].val_total;
  for (const auto& h : a.history)
    if (h.val_total) best = std::min(best, *h.val_total);
  CHECK(a.best_val_total == best);
  CHECK(a.best_val_total <= *a.history[0].val_total);
  const auto eval = evaluate_transformer(a.model, detector, val, cfg);
  CHECK(eval.total == doctest::Approx(a.best_val_total).epsilon(1e-5));

  const std::string text = log.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 30);
  CHECK(text.rfind("iter=1 time=", 0) == 0);
  CHECK(text.find("val_total=") != std::string::npos);

  const auto b = train_transformer(train, val, cfg, detector);
  const auto pa = a.model.parameters(), pb = b.model.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(*pa[i] == *pb[i]);

  for (const auto& h : a.history) {
    CHECK(h.train.total == doctest::Approx(h.train.class_mse + cfg.lambda * (h.train.time_l1 + h.train.stft_l1)).epsilon(1e-7));
  }
}

TEST_CASE("transformer training rejects a detector of another length") {
  auto cfg = small_config();
  cfg.max_iterations = 1;
  auto other = cfg.classifier;
  other.segment_length = 512;
  other.sample_rate_hz = 512;
  const auto detector = FaultClassifier::build(other, 1);
  const auto segs = tone_segments(4, 256, 6);
  CHECK_THROWS_AS(train_transformer(segs, segs, cfg, detector), ConfigError);
}

TEST_CASE("synthesize_segment checks the length") {
  const auto cfg = small_config();
  const auto net = OpUNet::build(cfg.transformer, 1);
  CHECK(synthesize_segment(net, std::vector<float>(256, 0.1f)).size() == 256);
  CHECK_THROWS_AS(synthesize_segment(net, std::vector<float>(100, 0.1f)), ShapeError);
}
