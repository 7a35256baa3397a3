// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and exits non-zero if
// any criterion fails. Optional arguments select criteria by id, e.g. `acceptance A1 A4`.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "s2v/adam.hpp"
#include "s2v/bench.hpp"
#include "s2v/conv.hpp"
#include "s2v/losses.hpp"
#include "s2v/metrics.hpp"
#include "s2v/ops.hpp"
#include "s2v/selfonn.hpp"
#include "s2v/signal.hpp"
#include "s2v/synthetic.hpp"
#include "s2v/training.hpp"
#include "support/oracles.hpp"

#ifdef S2V_HAVE_CLI
#include "s2v/cli.hpp"
#endif

using namespace s2v;
using s2v::testing::central_difference;
using s2v::testing::random_tensor;
using s2v::testing::relative_error;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<SegmentPair> to_segments(const std::vector<SyntheticRecord>& records) {
  std::vector<SegmentPair> out;
  for (const auto& r : records) {
    SegmentPair p;
    p.sound = normalize_segment<float>(r.sound.samples).values;
    p.vibration = normalize_segment<float>(r.vibration.samples).values;
    p.label = r.label;
    p.meta.machine_id = "synthetic";
    p.meta.speed_rpm = r.speed_rpm;
    out.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------------------------
// A1: analytic gradients against central differences, 64-bit.

using Graph = std::function<Var(Tape<double>&, std::vector<Var>&)>;

double max_gradient_error(std::vector<Tensor<double>>& leaves, const Graph& graph,
                          std::mt19937_64& rng, const std::function<bool(std::size_t, std::size_t)>& skip = {}) {
  auto loss = [&] {
    Tape<double> t;
    std::vector<Var> v;
    for (auto& l : leaves) v.push_back(t.parameter(l, true));
    return t.value(graph(t, v))[0];
  };
  Tape<double> tape;
  std::vector<Var> vars;
  for (auto& l : leaves) vars.push_back(tape.parameter(l, true));
  tape.backward(graph(tape, vars));
  double worst = 0.0;
  int points = 0;
  while (points < 100) {
    const std::size_t which = rng() % leaves.size();
    const std::size_t at = rng() % leaves[which].size();
    if (skip && skip(which, at)) continue;
    ++points;
    worst = std::max(worst, relative_error(tape.grad(vars[which])[at], central_difference(loss, leaves[which], at)));
  }
  return worst;
}

Outcome a1_gradients() {
  std::mt19937_64 rng(101);
  std::vector<std::pair<std::string, double>> errors;
  const Tensor<double> target3x6({3, 6}, 0.25);

  {
    std::vector<Tensor<double>> l{random_tensor({2, 12}, rng), random_tensor({3, 2, 5}, rng), random_tensor({3}, rng)};
    errors.emplace_back("conv", max_gradient_error(l, [&](Tape<double>& t, std::vector<Var>& v) {
      return ops::mean_squared_diff(t, ops::conv1d(t, v[0], v[1], v[2], 2, 2), t.constant(target3x6));
    }, rng));
  }
  {
    std::vector<Tensor<double>> l{random_tensor({2, 6}, rng), random_tensor({2, 3, 4}, rng), random_tensor({3}, rng)};
    const Tensor<double> target({3, 12}, -0.1);
    errors.emplace_back("tconv", max_gradient_error(l, [&](Tape<double>& t, std::vector<Var>& v) {
      return ops::mean_squared_diff(t, ops::transposed_conv1d(t, v[0], v[1], v[2], 2, 1), t.constant(target));
    }, rng));
  }
  for (bool transposed : {false, true}) {
    const Shape w = transposed ? Shape{3, 2, 3, 4} : Shape{3, 3, 2, 5};
    std::vector<Tensor<double>> l{random_tensor({2, 12}, rng), random_tensor(w, rng), random_tensor({3}, rng)};
    const Tensor<double> target({3, transposed ? 24u : 6u}, 0.2);
    errors.emplace_back(transposed ? "tgenerative" : "generative",
                        max_gradient_error(l, [&](Tape<double>& t, std::vector<Var>& v) {
      const Var y = ops::generative(t, v[0], v[1], v[2], 2, transposed ? 1 : 2, transposed);
      return ops::mean_squared_diff(t, y, t.constant(target));
    }, rng));
  }
  {
    std::vector<Tensor<double>> l{random_tensor({2, 40}, rng, -3.0, 3.0)};
    errors.emplace_back("tanh", max_gradient_error(l, [&](Tape<double>& t, std::vector<Var>& v) {
      return ops::mean_squared_diff(t, ops::tanh(t, v[0]), t.constant(Tensor<double>({2, 40}, 0.3)));
    }, rng));
  }
  {
    // Keep synth clear of the |y - synth| kink.
    auto y = random_tensor({1, 512}, rng);
    std::vector<Tensor<double>> l{random_tensor({1, 512}, rng)};
    errors.emplace_back("time_l1", max_gradient_error(l, [&](Tape<double>& t, std::vector<Var>& v) {
      return ops::time_l1(t, t.constant(y), v[0]);
    }, rng, [&](std::size_t, std::size_t i) { return std::abs(l[0][i] - y[i]) < 1e-3; }));
    const SpectralLossConfig cfg;
    errors.emplace_back("stft_l1", max_gradient_error(l, [&](Tape<double>& t, std::vector<Var>& v) {
      return ops::stft_l1(t, t.constant(y), v[0], cfg);
    }, rng));
  }
  {
    std::vector<Tensor<double>> l{random_tensor({2}, rng)};
    const Tensor<double> real({2}, std::vector<double>{0.9, -0.7});
    errors.emplace_back("class_mse", max_gradient_error(l, [&](Tape<double>& t, std::vector<Var>& v) {
      return ops::class_mse(t, t.constant(real), v[0]);
    }, rng));
  }

  Outcome o{true, ""};
  double worst = 0.0;
  for (const auto& [name, e] : errors) {
    o.pass = o.pass && e < 1e-4;
    worst = std::max(worst, e);
    o.detail += name + "=" + fmt("%.1e", e) + " ";
  }
  o.detail = "max rel err " + fmt("%.2e", worst) + " (" + o.detail.substr(0, o.detail.size() - 1) + ")";
  return o;
}

// ---------------------------------------------------------------------------------------------
// A2: Q = 1 generative layers against plain convolution, 32-bit.

Outcome a2_q1_reduction() {
  std::mt19937_64 rng(202);
  double worst = 0.0;
  int configs = 0;
  while (configs < 50) {
    OperationalLayerConfig c;
    c.in_channels = 1 + rng() % 4;
    c.out_channels = 1 + rng() % 4;
    c.kernel = 1 + rng() % 9;
    c.q = 1;
    c.stride = 1 + rng() % 3;
    c.padding = rng() % 4;
    c.transposed = rng() % 2 == 1;
    c.activation = Activation::tanh;
    const std::size_t length = 16 + rng() % 48;
    if (c.transposed && 2 * c.padding >= (length - 1) * c.stride + c.kernel) continue;
    if (!c.transposed && length + 2 * c.padding < c.kernel) continue;
    ++configs;
    const auto params = GenerativeLayerParams<float>::uniform(c, rng);
    auto p = params;
    for (auto& b : p.bias.values()) b = std::uniform_real_distribution<float>(-0.5f, 0.5f)(rng);
    const auto y = s2v::testing::random_tensor_f({c.in_channels, length}, rng);
    const auto ours = operational_layer_forward(y, c, p);
    auto ref = c.transposed ? transposed_conv1d(y, p.slice(1), std::span<const float>(p.bias.values()), c.stride, c.padding)
                            : conv1d(y, p.slice(1), std::span<const float>(p.bias.values()), c.stride, c.padding);
    ref = tanh_activation(ref);
    worst = std::max(worst, max_abs_difference(ours, ref));
  }
  return {worst < 1e-6, "max |diff| " + fmt("%.2e", worst) + " over 50 configs (limit 1e-6)"};
}

// ---------------------------------------------------------------------------------------------
// A3: STFT peak bins and leakage against a brute-force DFT.
// Sine probes: a Hann-windowed cosine at bin 1 ties bins 0 and 1.

Outcome a3_stft_oracle() {
  const StftConfig cfg;
  double worst = 0.0;
  bool peaks = true;
  for (std::size_t k : {1u, 8u, 64u}) {
    std::vector<double> x(4096);
    for (std::size_t n = 0; n < x.size(); ++n) x[n] = std::sin(2.0 * std::numbers::pi * static_cast<double>(k * n) / 256.0);
    const auto frames = stft<double>(x, cfg);
    const auto oracle = s2v::testing::brute_force_magnitudes(x, 256, 128);
    if (oracle.size() != frames.num_frames) return {false, "frame count mismatch"};
    for (std::size_t f = 0; f < frames.num_frames; ++f) {
      std::size_t peak = 0;
      for (std::size_t b = 0; b < frames.num_bins; ++b) {
        const double mag = std::abs(frames.at(f, b));
        if (mag > std::abs(frames.at(f, peak))) peak = b;
        if (b != k) worst = std::max(worst, std::abs(mag - oracle[f][b]));
      }
      peaks = peaks && peak == k;
    }
  }
  return {peaks && worst < 1e-8,
          std::string(peaks ? "peak bin exact" : "peak bin WRONG") + " for k in {1,8,64}; max off-peak |diff| " +
              fmt("%.2e", worst) + " (limit 1e-8)"};
}

// ---------------------------------------------------------------------------------------------
// A4: adjoint identity of conv1d and transposed_conv1d.

Outcome a4_adjoint() {
  std::mt19937_64 rng(404);
  double worst = 0.0;
  int shapes = 0;
  const std::size_t strides[] = {1, 2, 4};
  while (shapes < 500) {
    const std::size_t k = 1 + rng() % 9, s = strides[rng() % 3], p = rng() % 4;
    const std::size_t cin = 1 + rng() % 4, cout = 1 + rng() % 4, lc = 1 + rng() % 32;
    const long long l = static_cast<long long>((lc - 1) * s + k) - 2 * static_cast<long long>(p);
    if (l <= 0 || static_cast<std::size_t>(l) + 2 * p < k) continue;
    ++shapes;
    const auto x = random_tensor({cin, static_cast<std::size_t>(l)}, rng);
    const auto w = random_tensor({cout, cin, k}, rng);
    const auto y = random_tensor({cout, lc}, rng);
    const std::vector<double> bo(cout, 0.0), bi(cin, 0.0);
    const auto cx = conv1d(x, w, std::span<const double>(bo), s, p);
    const auto ty = transposed_conv1d(y, w, std::span<const double>(bi), s, p);
    worst = std::max(worst, std::abs(s2v::testing::inner(cx, y) - s2v::testing::inner(x, ty)));
  }
  return {worst < 1e-10, "max |<conv x, y> - <x, tconv y>| " + fmt("%.2e", worst) + " over 500 shapes (limit 1e-10)"};
}

// ---------------------------------------------------------------------------------------------
// A5: overfit surrogate.

std::size_t peak_bin_matches(const OpUNet& model, std::span<const SegmentPair> segs, std::size_t& frames) {
  std::size_t matches = 0;
  frames = 0;
  for (const auto& s : segs) {
    const auto synth = synthesize_segment(model, s.sound);
    const auto a = spectrogram<float>(s.vibration), b = spectrogram<float>(synth);
    for (std::size_t f = 0; f < a.num_frames; ++f) {
      const auto ra = a.values.begin() + static_cast<std::ptrdiff_t>(f * a.num_bins);
      const auto rb = b.values.begin() + static_cast<std::ptrdiff_t>(f * b.num_bins);
      matches += std::max_element(ra, ra + static_cast<std::ptrdiff_t>(a.num_bins)) - ra ==
                 std::max_element(rb, rb + static_cast<std::ptrdiff_t>(b.num_bins)) - rb;
      ++frames;
    }
  }
  return matches;
}

Outcome a5_overfit() {
  const auto t0 = std::chrono::steady_clock::now();
  SyntheticSpec spec;  // 16 healthy + 16 faulty, 4096 samples, FIR ground truth
  const auto segs = to_segments(synthesize_records(spec));
  TrainConfig cfg;  // batch 8, lr 1e-4, lambda 100, 1000 iterations
  cfg.seed = 7;
  const auto detector = train_fault_detector(segs, segs, cfg);
  const auto initial = OpUNet::build(cfg.transformer, cfg.seed);
  const double before = evaluate_transformer(initial, detector.model, segs, cfg).time_l1;
  const auto result = train_transformer(segs, segs, cfg, detector.model);
  const double after = evaluate_transformer(result.model, detector.model, segs, cfg).time_l1;
  std::size_t frames = 0;
  const std::size_t matches = peak_bin_matches(result.model, segs, frames);
  const double ratio = after / before;
  const double match_rate = static_cast<double>(matches) / static_cast<double>(frames);
  return {ratio <= 0.10 && match_rate >= 0.95,
          "time_l1 " + fmt("%.4f", before) + " -> " + fmt("%.4f", after) + " (" + fmt("%.1f", 100.0 * ratio) +
              "% of initial, limit 10%); peak bins match on " + fmt("%.1f", 100.0 * match_rate) +
              "% of frames (limit 95%); best iteration " + std::to_string(result.best_iteration) + "; " +
              fmt("%.0f", seconds_since(t0)) + " s"};
}

// ---------------------------------------------------------------------------------------------
// A6: detection gap between real and synthesized test vibration.

Outcome a6_detection_gap() {
  const auto t0 = std::chrono::steady_clock::now();
  SyntheticSpec spec;
  spec.seed = 11;
  spec.num_healthy = 175;
  spec.num_faulty = 175;
  spec.speed_weights = {5, 5, 4};  // 100 of 350 segments at the held-out 1010 RPM
  const auto segs = to_segments(synthesize_records(spec));
  SplitConfig sc;
  sc.train_seconds = 200;
  sc.val_seconds = 50;
  const auto split = split_dataset(segs, 1010.0, sc);
  TrainConfig cfg;
  cfg.seed = 5;
  const auto r = run_experiment(cfg, split);
  const bool pass = r.real.accuracy >= 95.0 && r.accuracy_gap <= 2.0;
  return {pass, "train/val/test " + std::to_string(split.train.size()) + "/" + std::to_string(split.val.size()) +
                    "/" + std::to_string(split.test.size()) + "; accuracy real " + fmt("%.2f", r.real.accuracy) +
                    "% (limit >= 95), synthesized " + fmt("%.2f", r.synthesized.accuracy) + "%; gap " +
                    fmt("%.2f", r.accuracy_gap) + " points (limit 2, reference 0.4); " +
                    fmt("%.0f", seconds_since(t0)) + " s"};
}

// ---------------------------------------------------------------------------------------------
// A7: metrics against brute-force counting.

Outcome a7_metrics() {
  std::mt19937_64 rng(707);
  bool exact = true;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 200;
    std::vector<Label> pred(n), truth(n);
    for (std::size_t i = 0; i < n; ++i) {
      pred[i] = rng() % 2 ? Label::faulty : Label::healthy;
      truth[i] = rng() % 2 ? Label::faulty : Label::healthy;
    }
    const auto r = compute_metrics(pred, truth);
    const auto o = s2v::testing::count_confusion(pred, truth, Label::faulty);
    exact = exact && r.tp == o.tp && r.fp == o.fp && r.tn == o.tn && r.fn == o.fn &&
            r.accuracy == 100.0 * static_cast<double>(o.tp + o.tn) / static_cast<double>(n);
  }
  const auto f1 = f1_score(99.12, 100.0);
  const double rounded = f1 ? std::round(*f1 * 100.0) / 100.0 : -1.0;
  return {exact && rounded == 99.56,
          std::string(exact ? "1000/1000 random vectors exact" : "oracle disagreement") +
              "; F1(sens 100, prec 99.12) = " + fmt("%.4f", f1.value_or(-1.0)) + " -> " + fmt("%.2f", rounded) +
              " (expected 99.56)"};
}

// ---------------------------------------------------------------------------------------------
// A8: single-worker inference latency of the default architecture.

Outcome a8_latency() {
  const auto model = OpUNet::build(OpUNetConfig{}, 1);
  std::mt19937_64 rng(808);
  const auto x = s2v::testing::random_tensor_f({1, model.segment_length()}, rng);
  const auto r = benchmark_inference(model, x, 100, 5);
  return {r.median_ms < 100.0, "median " + fmt("%.2f", r.median_ms) + " ms per 1 s segment (limit 100, reference 6.5); real-time factor " +
                                   fmt("%.1f", r.real_time_factor) + " (min " + fmt("%.2f", r.min_ms) + ", max " +
                                   fmt("%.2f", r.max_ms) + " ms)"};
}

// ---------------------------------------------------------------------------------------------
// A9: parameter accounting.

Outcome a9_parameters() {
  auto model = OpUNet::build(OpUNetConfig{}, 9);
  std::cout << model.describe() << '\n';
  const auto params = model.parameters();
  std::vector<Tensor<float>> before, grads;
  std::mt19937_64 rng(909);
  for (const auto* p : params) {
    before.push_back(*p);
    auto g = s2v::testing::random_tensor_f(p->shape(), rng, 0.1f, 1.0f);
    for (auto& v : g.values()) v = rng() % 2 ? v : -v;
    grads.push_back(std::move(g));
  }
  AdamState<float> state;
  adam_step<float>(params, grads, state, 1e-4);
  std::size_t changed = 0;
  for (std::size_t i = 0; i < params.size(); ++i)
    for (std::size_t j = 0; j < params[i]->size(); ++j) changed += (*params[i])[j] != before[i][j];
  const std::size_t count = parameter_count(model);
  const double deviation = (static_cast<double>(count) - 377000.0) / 377000.0;
  return {changed == count && std::abs(deviation) <= 0.15,
          "parameter_count " + std::to_string(count) + ", values mutated by one Adam step " + std::to_string(changed) +
              "; " + fmt("%+.1f", 100.0 * deviation) + "% from 377K (limit +-15%)"};
}

// ---------------------------------------------------------------------------------------------
// A10: byte-identical outputs from two reproducible CLI runs.

#ifdef S2V_HAVE_CLI
std::string read_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

int cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  if (code != 0) std::cerr << err.str();
  return code;
}

Outcome a10_determinism() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto root = fs::temp_directory_path() / "s2v_acceptance_a10";
  fs::remove_all(root);
  std::vector<std::string> names;
  for (const char* run : {"run1", "run2"}) {
    const auto dir = root / run;
    fs::create_directories(dir);
    if (cli({"gen-synthetic", "--reproducible", "--seed", "21", "--out", (dir / "data").string()}) != 0) {
      return {false, "gen-synthetic failed"};
    }
    if (cli({"experiment", "--reproducible", "--seed", "21", "--manifest", (dir / "data" / "manifest.tsv").string(),
             "--train-seconds", "16", "--val-seconds", "6", "--report-dir", (dir / "report").string()}) != 0) {
      return {false, "experiment failed"};
    }
  }
  std::size_t compared = 0, differing = 0;
  for (const auto& e : fs::recursive_directory_iterator(root / "run1")) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), root / "run1");
    ++compared;
    if (read_bytes(e.path()) != read_bytes(root / "run2" / rel)) {
      ++differing;
      names.push_back(rel.string());
    }
  }
  std::string detail = std::to_string(compared) + " files compared (dataset, checkpoints, reports), " +
                       std::to_string(differing) + " differ; " + fmt("%.0f", seconds_since(t0)) + " s";
  for (const auto& n : names) detail += " " + n;
  return {differing == 0 && compared > 0, detail};
}
#endif

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"A1", a1_gradients},   {"A2", a2_q1_reduction}, {"A3", a3_stft_oracle},
      {"A4", a4_adjoint},     {"A5", a5_overfit},      {"A6", a6_detection_gap},
      {"A7", a7_metrics},     {"A8", a8_latency},      {"A9", a9_parameters},
#ifdef S2V_HAVE_CLI
      {"A10", a10_determinism},
#else
      {"A10", [] { return Outcome{false, "built without the CLI"}; }},
#endif
  };
  const std::set<std::string> selected(argv + 1, argv + argc);
  int failures = 0;
  for (const auto& [id, check] : criteria) {
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << id << ": " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
