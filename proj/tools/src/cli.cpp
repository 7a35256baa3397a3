#include "s2v/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>

#include "s2v/bench.hpp"
#include "s2v/checkpoint.hpp"
#include "s2v/dataio.hpp"
#include "s2v/error.hpp"
#include "s2v/logging.hpp"
#include "s2v/synthetic.hpp"
#include "s2v/training.hpp"

namespace s2v {
namespace {

namespace fs = std::filesystem;

/// A flag combination that parses but cannot run; exits with kExitUsage.
class FlagError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GlobalOptions {
  std::uint64_t seed = 1;
  bool reproducible = false;
  std::size_t threads = 0;
  std::string config;
};

struct DataOptions {
  std::string manifest;
  double sample_rate_hz = 4096.0;
  double segment_seconds = 1.0;
  std::string held_out_speed = "auto";
  double train_seconds = 2100.0;
  double val_seconds = 800.0;
};

struct TrainOptions {
  std::size_t batch = 8;
  double lr = 1e-4;
  std::size_t epochs = 50;
  std::size_t iters = 1000;
  double lambda = 100.0;
  std::size_t validation_interval = 50;
  bool joint = false;
  std::string class_target = "paired";
  std::string spectral = "magnitude";
  std::string checkpoint_dir;
};

struct Dataset {
  DataSplit split;
  std::size_t segment_length = 0;
};

void add_data_options(CLI::App* cmd, DataOptions& d, bool manifest_required = true) {
  auto* m = cmd->add_option("--manifest", d.manifest, "Dataset manifest (TSV)");
  if (manifest_required) m->required();
  cmd->add_option("--sample-rate", d.sample_rate_hz, "Expected sample rate in Hz");
  cmd->add_option("--segment-seconds", d.segment_seconds, "Segment duration in seconds");
  cmd->add_option("--held-out-speed", d.held_out_speed,
                  "Speed (RPM) reserved for testing, or 'auto' for the highest speed");
  cmd->add_option("--train-seconds", d.train_seconds, "Seconds of non-held-out data for training");
  cmd->add_option("--val-seconds", d.val_seconds, "Seconds of non-held-out data for validation");
}

void add_train_options(CLI::App* cmd, TrainOptions& t, bool detector, bool transformer) {
  cmd->add_option("--batch", t.batch, "Mini-batch size")->check(CLI::PositiveNumber);
  cmd->add_option("--lr", t.lr, "Adam learning rate")->check(CLI::PositiveNumber);
  if (detector) cmd->add_option("--epochs", t.epochs, "Detector epochs")->check(CLI::PositiveNumber);
  if (transformer) {
    cmd->add_option("--iters", t.iters, "Transformer mini-batch updates")->check(CLI::PositiveNumber);
    cmd->add_option("--lambda", t.lambda, "Weight of the time and spectral losses")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--validation-interval", t.validation_interval,
                    "Iterations between validation passes")
        ->check(CLI::PositiveNumber);
    cmd->add_flag("--joint", t.joint, "Also update the cascaded classifier");
    cmd->add_option("--class-target", t.class_target,
                    "Classification target: paired scores C(Y) or the label encoding")
        ->check(CLI::IsMember({"paired", "label"}));
    cmd->add_option("--spectral", t.spectral, "Spectral loss representation")
        ->check(CLI::IsMember({"magnitude", "power"}));
    cmd->add_option("--checkpoint-dir", t.checkpoint_dir, "Directory for best-so-far checkpoints");
  }
}

TrainConfig make_train_config(const GlobalOptions& g, const TrainOptions& t, const Dataset& data,
                              double sample_rate_hz) {
  TrainConfig cfg;
  cfg.batch_size = t.batch;
  cfg.learning_rate = t.lr;
  cfg.classifier_epochs = t.epochs;
  cfg.max_iterations = t.iters;
  cfg.lambda = t.lambda;
  cfg.validation_interval = t.validation_interval;
  cfg.joint_classifier = t.joint;
  cfg.class_target = t.class_target == "label" ? ClassTarget::label : ClassTarget::paired;
  cfg.spectral.mode = t.spectral == "power" ? SpectralMode::power : SpectralMode::magnitude;
  cfg.checkpoint_dir = t.checkpoint_dir;
  cfg.seed = g.seed;
  cfg.reproducible = g.reproducible;
  cfg.threads = g.threads;
  cfg.segment_length = data.segment_length;
  cfg.sample_rate_hz = sample_rate_hz;
  return cfg;
}

Dataset load_dataset(const DataOptions& d) {
  if (d.sample_rate_hz <= 0.0 || d.segment_seconds <= 0.0) {
    throw FlagError("--sample-rate and --segment-seconds must be positive");
  }
  const auto manifest = load_manifest(d.manifest);
  DatasetLoadOptions opts;
  opts.segment_seconds = d.segment_seconds;
  opts.expected_sample_rate_hz = d.sample_rate_hz;
  const auto segments = load_segments(manifest, opts);
  if (segments.empty()) throw DataError("manifest " + d.manifest + " yields no segments");
  double held_out = 0.0;
  if (d.held_out_speed == "auto") {
    held_out = default_held_out_speed(segments);
  } else {
    try {
      std::size_t used = 0;
      held_out = std::stod(d.held_out_speed, &used);
      if (used != d.held_out_speed.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw FlagError("--held-out-speed must be a number or 'auto', got '" + d.held_out_speed + "'");
    }
  }
  SplitConfig sc{d.train_seconds, d.val_seconds, d.segment_seconds};
  return {split_dataset(segments, held_out, sc), samples_for(d.sample_rate_hz, d.segment_seconds)};
}

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot write " + path.string());
  f << text;
}

const FaultClassifier& require_classifier(const ModelCheckpoint& ckpt, const std::string& path) {
  if (!ckpt.classifier) throw DataError(path + " does not contain a fault classifier");
  return *ckpt.classifier;
}

const OpUNet& require_transformer(const ModelCheckpoint& ckpt, const std::string& path) {
  if (!ckpt.transformer) throw DataError(path + " does not contain an Op-UNet transformer");
  return *ckpt.transformer;
}

void check_model_geometry(std::size_t model_length, double model_rate, std::size_t data_length,
                          double data_rate, const std::string& what) {
  if (model_length != data_length || model_rate != data_rate) {
    throw DataError(what + " expects " + std::to_string(model_length) + "-sample segments at " +
                    fixed(model_rate, 1) + " Hz, data has " + std::to_string(data_length) +
                    " samples at " + fixed(data_rate, 1) + " Hz");
  }
}

std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw FlagError("cannot read config file " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t row = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  };
  while (std::getline(f, line)) {
    ++row;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FlagError(path + ":" + std::to_string(row) + ": expected key=value");
    }
    std::string key = trim(line.substr(0, eq));
    while (!key.empty() && key.front() == '-') key.erase(0, 1);
    out.emplace_back(key, trim(line.substr(eq + 1)));
  }
  return out;
}

/// Finds `--config` in raw args before parsing so file values can become option defaults.
std::optional<std::string> prescan_config(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return std::nullopt;
}

void apply_config(CLI::App& app, const std::vector<std::string>& args,
                  const std::vector<std::pair<std::string, std::string>>& entries) {
  CLI::App* active = nullptr;
  for (const auto& a : args) {
    for (auto* sub : app.get_subcommands({})) {
      if (sub->get_name() == a) active = sub;
    }
    if (active) break;
  }
  for (const auto& [raw_key, value] : entries) {
    std::string key = raw_key;
    CLI::App* scope = active;
    if (const auto dot = key.find('.'); dot != std::string::npos) {
      const std::string cmd = key.substr(0, dot);
      key = key.substr(dot + 1);
      if (!active || active->get_name() != cmd) continue;
    }
    CLI::Option* opt = nullptr;
    if (scope) opt = scope->get_option_no_throw("--" + key);
    if (!opt) opt = app.get_option_no_throw("--" + key);
    if (!opt || key == "config") throw FlagError("unknown config key '" + raw_key + "'");
    opt->run_callback_for_default();
    opt->default_val(value);
  }
}

void echo_config(std::ostream& err, const CLI::App& app, const CLI::App& cmd) {
  err << "# resolved configuration: " << cmd.get_name() << '\n';
  for (const CLI::App* scope : {&app, &cmd}) {
    for (const CLI::Option* opt : scope->get_options()) {
      const std::string name = opt->get_single_name();
      if (name == "help" || name.empty()) continue;
      std::string value;
      if (opt->count() > 0) {
        for (const auto& r : opt->results()) value += (value.empty() ? "" : ",") + r;
      } else {
        value = opt->get_default_str();
        if (value.empty() && opt->get_expected_min() == 0) value = "false";
      }
      err << "#   " << name << '=' << value << '\n';
    }
  }
}

// ---------------------------------------------------------------------------------------------
// Commands

struct GenSyntheticOptions {
  std::string out;
  std::size_t healthy = 16;
  std::size_t faulty = 16;
  double sample_rate_hz = 4096.0;
  double seconds = 1.0;
  double noise = 0.02;
  std::vector<double> speeds{480.0, 680.0, 1010.0};
  std::vector<std::size_t> speed_weights;
  double fault_frequency_hz = 624.0;
  double fault_amplitude = 0.5;
};

int cmd_gen_synthetic(const GlobalOptions& g, const GenSyntheticOptions& o, std::ostream& out) {
  if (o.healthy == 0 || o.faulty == 0) {
    throw FlagError("--healthy and --faulty must both be at least 1");
  }
  SyntheticSpec spec;
  spec.seed = g.seed;
  spec.num_healthy = o.healthy;
  spec.num_faulty = o.faulty;
  spec.sample_rate_hz = o.sample_rate_hz;
  spec.segment_seconds = o.seconds;
  spec.noise_level = o.noise;
  spec.speeds_rpm = o.speeds;
  spec.speed_weights = o.speed_weights;
  spec.fault_frequency_hz = o.fault_frequency_hz;
  spec.fault_amplitude = o.fault_amplitude;
  try {
    const auto manifest = generate_synthetic(spec, o.out);
    out << "wrote " << manifest.entries.size() << " pairs (" << o.healthy << " healthy, "
        << o.faulty << " faulty), " << 2 * manifest.entries.size() << " WAV files and "
        << (fs::path(o.out) / "manifest.tsv").string() << '\n';
  } catch (const ConfigError& e) {
    throw FlagError(e.what());
  }
  return kExitOk;
}

int cmd_train_detector(const GlobalOptions& g, const DataOptions& d, const TrainOptions& t,
                       const std::string& out_path, std::ostream& out) {
  const auto data = load_dataset(d);
  const auto cfg = make_train_config(g, t, data, d.sample_rate_hz);
  const auto result = train_fault_detector(data.split.train, data.split.val, cfg);
  for (const auto& e : result.history) {
    out << "epoch=" << e.epoch << " train_mse=" << fixed(e.train_mse) << " val_mse="
        << fixed(e.val_mse) << " val_accuracy=" << fixed(e.val_accuracy, 2) << '\n';
  }
  const auto& best = result.history[result.best_epoch - 1];
  save_checkpoint({std::nullopt, result.model, {g.seed, result.best_epoch, result.best_val_mse}},
                  out_path);
  out << "best_epoch=" << result.best_epoch << " val_mse=" << fixed(best.val_mse)
      << " val_accuracy=" << fixed(best.val_accuracy, 2) << " checkpoint=" << out_path << '\n';
  return kExitOk;
}

int cmd_train_transformer(const GlobalOptions& g, const DataOptions& d, const TrainOptions& t,
                          const std::string& detector_path, const std::string& out_path,
                          const std::string& log_path, std::ostream& out) {
  const auto det_ckpt = load_checkpoint(detector_path);
  const auto& detector = require_classifier(det_ckpt, detector_path);
  const auto data = load_dataset(d);
  check_model_geometry(detector.segment_length(), detector.sample_rate_hz(), data.segment_length,
                       d.sample_rate_hz, "detector " + detector_path);
  const auto cfg = make_train_config(g, t, data, d.sample_rate_hz);

  std::ostringstream log;
  const auto result = train_transformer(data.split.train, data.split.val, cfg, detector, &log);
  out << log.str();
  if (!log_path.empty()) write_text(log_path, log.str());
  save_checkpoint({result.model, result.classifier, {g.seed, result.best_iteration, result.best_val_total}},
                  out_path);
  out << "best_iteration=" << result.best_iteration << " val_total=" << fixed(result.best_val_total)
      << " checkpoint=" << out_path << '\n';
  return kExitOk;
}

int cmd_synthesize(const std::string& model_path, const std::string& sound_path,
                   const std::string& out_path, std::ostream& out) {
  const auto ckpt = load_checkpoint(model_path);
  const auto& model = require_transformer(ckpt, model_path);
  const auto sound = load_recording(sound_path);
  const std::size_t L = model.segment_length();
  if (sound.sample_rate_hz != model.sample_rate_hz()) {
    throw DataError(sound_path + " is sampled at " + fixed(sound.sample_rate_hz, 1) +
                    " Hz, the model expects " + fixed(model.sample_rate_hz(), 1) + " Hz");
  }
  if (sound.samples.size() < L) {
    throw DataError(sound_path + " has " + std::to_string(sound.samples.size()) +
                    " samples, shorter than one " + std::to_string(L) + "-sample model segment");
  }
  const std::size_t n = sound.samples.size();
  Signal result{std::vector<float>(n), sound.sample_rate_hz};
  std::size_t segments = 0, degenerate = 0;
  // A trailing partial segment is covered by the last full window ending at the final sample.
  for (std::size_t start = 0; start < n; start += L) {
    const std::size_t window = std::min(start, n - L);
    const std::span<const float> x(sound.samples.data() + window, L);
    const auto norm = normalize_segment<float>(x);
    if (norm.degenerate) {
      ++degenerate;
      log_warning("segment " + std::to_string(segments) + " of " + sound_path +
                  " is constant (degenerate); its output is the model response to zeros");
    }
    const auto synth = synthesize_segment(model, norm.values);
    std::copy(synth.begin() + static_cast<std::ptrdiff_t>(start - window), synth.end(),
              result.samples.begin() + static_cast<std::ptrdiff_t>(start));
    ++segments;
  }
  write_wav(out_path, result, WavEncoding::float32);
  out << "synthesized " << segments << " segments (" << degenerate << " degenerate), " << n
      << " samples -> " << out_path << '\n';
  return kExitOk;
}

std::span<const SegmentPair> pick_split(const DataSplit& s, const std::string& which,
                                        std::vector<SegmentPair>& all) {
  if (which == "train") return s.train;
  if (which == "val") return s.val;
  if (which == "test") return s.test;
  all = s.train;
  all.insert(all.end(), s.val.begin(), s.val.end());
  all.insert(all.end(), s.test.begin(), s.test.end());
  return all;
}

int cmd_evaluate(const DataOptions& d, const std::string& detector_path,
                 const std::string& transformer_path, const std::string& split_name,
                 const std::string& report_dir, std::ostream& out) {
  const auto det_ckpt = load_checkpoint(detector_path);
  const auto& detector = require_classifier(det_ckpt, detector_path);
  std::optional<ModelCheckpoint> tr_ckpt;
  if (!transformer_path.empty()) tr_ckpt = load_checkpoint(transformer_path);
  const auto data = load_dataset(d);
  check_model_geometry(detector.segment_length(), detector.sample_rate_hz(), data.segment_length,
                       d.sample_rate_hz, "detector " + detector_path);
  std::vector<SegmentPair> all;
  const auto segments = pick_split(data.split, split_name, all);
  if (segments.empty()) throw DataError("the " + split_name + " split is empty");

  std::vector<std::vector<float>> inputs;
  std::vector<Label> labels;
  for (const auto& s : segments) {
    labels.push_back(s.label);
    if (tr_ckpt) {
      const auto& tr = require_transformer(*tr_ckpt, transformer_path);
      check_model_geometry(tr.segment_length(), tr.sample_rate_hz(), data.segment_length,
                           d.sample_rate_hz, "transformer " + transformer_path);
      inputs.push_back(synthesize_segment(tr, s.sound));
    } else {
      inputs.push_back(s.vibration);
    }
  }
  const auto report = compute_metrics(classify_segments(detector, inputs), labels);
  const std::string test_name = tr_ckpt ? "synth" : "real";
  const std::string table = table_header() + table_row(report, "real", test_name);
  const std::string json = to_json(report, "real", test_name);
  out << table << json << '\n';
  if (!report_dir.empty()) {
    write_text(fs::path(report_dir) / ("metrics_" + test_name + ".json"), json + "\n");
    write_text(fs::path(report_dir) / ("metrics_" + test_name + ".txt"), table);
  }
  return kExitOk;
}

int cmd_benchmark(const GlobalOptions& g, const std::string& model_path, std::size_t reps,
                  std::size_t warmup, bool json, std::ostream& out) {
  if (reps < 10) throw FlagError("--reps must be at least 10");
  std::optional<OpUNet> built;
  const OpUNet* model = nullptr;
  std::optional<ModelCheckpoint> ckpt;
  if (model_path.empty()) {
    built = OpUNet::build(OpUNetConfig{}, g.seed);
    model = &*built;
  } else {
    ckpt = load_checkpoint(model_path);
    model = &require_transformer(*ckpt, model_path);
  }
  std::vector<float> input(model->segment_length());
  std::mt19937_64 rng(g.seed);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  for (auto& v : input) v = dist(rng);
  const auto report = benchmark_inference(*model, as_feature_map(input), reps, warmup);
  if (json) {
    out << to_json(report) << '\n';
  } else {
    out << "median_ms=" << fixed(report.median_ms, 3) << " min_ms=" << fixed(report.min_ms, 3)
        << " max_ms=" << fixed(report.max_ms, 3) << " real_time_factor="
        << fixed(report.real_time_factor, 1) << " reps=" << report.repetitions
        << " parameters=" << parameter_count(*model) << '\n';
  }
  return kExitOk;
}

int cmd_describe(const std::string& model_path, std::ostream& out) {
  if (model_path.empty()) {
    out << OpUNet::build(OpUNetConfig{}, 0).describe() << '\n'
        << FaultClassifier::build(FaultClassifierConfig{}, 0).describe();
    return kExitOk;
  }
  const auto ckpt = load_checkpoint(model_path);
  if (ckpt.transformer) out << ckpt.transformer->describe();
  if (ckpt.classifier) out << ckpt.classifier->describe();
  out << "seed=" << ckpt.training.seed << " iteration=" << ckpt.training.iteration
      << " validation_loss=" << fixed(ckpt.training.validation_loss) << '\n';
  return kExitOk;
}

int cmd_experiment(const GlobalOptions& g, const DataOptions& d, const TrainOptions& t,
                   const std::string& report_dir, std::ostream& out) {
  const auto data = load_dataset(d);
  const auto cfg = make_train_config(g, t, data, d.sample_rate_hz);
  std::ostringstream log;
  const auto r = run_experiment(cfg, data.split, &log);
  const std::string table = table_header() + table_row(r.real, "real", "real") +
                            table_row(r.synthesized, "real", "synth");
  nlohmann::json j{{"real", nlohmann::json::parse(to_json(r.real, "real", "real"))},
                   {"synthesized", nlohmann::json::parse(to_json(r.synthesized, "real", "synth"))},
                   {"accuracy_gap", r.accuracy_gap},
                   {"held_out_speed", data.split.held_out_speed}};
  out << log.str() << table << "accuracy_gap=" << fixed(r.accuracy_gap, 2) << '\n'
      << j.dump() << '\n';
  if (!report_dir.empty()) {
    write_text(fs::path(report_dir) / "experiment.json", j.dump() + "\n");
    write_text(fs::path(report_dir) / "experiment.txt", table);
    save_checkpoint({std::nullopt, r.detector.model, {g.seed, r.detector.best_epoch, r.detector.best_val_mse}},
                    fs::path(report_dir) / "detector.ckpt");
    save_checkpoint({r.transformer.model, r.transformer.classifier,
                     {g.seed, r.transformer.best_iteration, r.transformer.best_val_total}},
                    fs::path(report_dir) / "transformer.ckpt");
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sound-to-vibration transformation with operational neural networks", "s2v"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);

  GlobalOptions g;
  app.add_option("--seed", g.seed, "Random seed");
  app.add_flag("--reproducible", g.reproducible, "Single worker, byte-identical outputs");
  app.add_option("--threads", g.threads, "Worker threads (0 = hardware concurrency)");
  app.add_option("--config", g.config, "key=value file providing option defaults");
  app.fallthrough();

  GenSyntheticOptions gen;
  auto* c_gen = app.add_subcommand("gen-synthetic", "Write a seeded synthetic paired dataset");
  c_gen->add_option("--out", gen.out, "Output directory")->required();
  c_gen->add_option("--healthy", gen.healthy, "Healthy segments");
  c_gen->add_option("--faulty", gen.faulty, "Faulty segments");
  c_gen->add_option("--sample-rate", gen.sample_rate_hz, "Sample rate in Hz")->check(CLI::PositiveNumber);
  c_gen->add_option("--seconds", gen.seconds, "Seconds per segment")->check(CLI::PositiveNumber);
  c_gen->add_option("--noise", gen.noise, "Gaussian noise level")->check(CLI::NonNegativeNumber);
  c_gen->add_option("--speeds", gen.speeds, "Speeds in RPM")->delimiter(',');
  c_gen->add_option("--speed-weights", gen.speed_weights, "Relative share of each speed")->delimiter(',');
  c_gen->add_option("--fault-frequency", gen.fault_frequency_hz, "Fault tone frequency in Hz");
  c_gen->add_option("--fault-amplitude", gen.fault_amplitude, "Fault tone amplitude");

  DataOptions data;
  TrainOptions train;
  std::string out_path, detector_path, transformer_path, log_path, report_dir;

  auto* c_det = app.add_subcommand("train-detector", "Train the Self-ONN fault detector");
  add_data_options(c_det, data);
  add_train_options(c_det, train, true, false);
  c_det->add_option("--out", out_path, "Output checkpoint")->required();

  auto* c_tr = app.add_subcommand("train-transformer", "Train the Op-UNet against a frozen detector");
  add_data_options(c_tr, data);
  add_train_options(c_tr, train, false, true);
  c_tr->add_option("--detector", detector_path, "Detector checkpoint")->required();
  c_tr->add_option("--out", out_path, "Output checkpoint")->required();
  c_tr->add_option("--log", log_path, "Also write the iteration log to this file");

  std::string sound_path;
  auto* c_syn = app.add_subcommand("synthesize", "Synthesize vibration from a sound recording");
  c_syn->add_option("--model", transformer_path, "Transformer checkpoint")->required();
  c_syn->add_option("--sound", sound_path, "Input sound (WAV or CSV)")->required();
  c_syn->add_option("--out", out_path, "Output WAV")->required();

  std::string split_name = "test";
  auto* c_eval = app.add_subcommand("evaluate", "Detector metrics on real or synthesized vibration");
  add_data_options(c_eval, data);
  c_eval->add_option("--detector", detector_path, "Detector checkpoint")->required();
  c_eval->add_option("--transformer", transformer_path,
                     "Transformer checkpoint; evaluates synthesized vibration when given");
  c_eval->add_option("--split", split_name, "Which split to evaluate")
      ->check(CLI::IsMember({"train", "val", "test", "all"}));
  c_eval->add_option("--report-dir", report_dir, "Write JSON and table reports here");

  std::size_t reps = 100, warmup = 3;
  bool json = false;
  auto* c_bench = app.add_subcommand("benchmark", "Single-worker inference latency");
  c_bench->add_option("--model", transformer_path, "Transformer checkpoint (default: fresh model)");
  c_bench->add_option("--reps", reps, "Timed repetitions (at least 10)");
  c_bench->add_option("--warmup", warmup, "Untimed warm-up runs");
  c_bench->add_flag("--json", json, "Print the report as JSON");

  auto* c_desc = app.add_subcommand("describe", "Print model architectures and parameter counts");
  c_desc->add_option("--model", transformer_path, "Checkpoint (default: the default architectures)");

  auto* c_exp = app.add_subcommand("experiment", "Detector + transformer + real/synthesized evaluation");
  add_data_options(c_exp, data);
  add_train_options(c_exp, train, true, true);
  c_exp->add_option("--report-dir", report_dir, "Write reports and checkpoints here");

  auto previous_sink = set_log_sink([&err](LogLevel level, std::string_view msg) {
    err << (level == LogLevel::warning ? "warning: " : "") << msg << '\n';
  });
  struct SinkGuard {
    LogSink previous;
    ~SinkGuard() { set_log_sink(std::move(previous)); }
  } guard{std::move(previous_sink)};

  try {
    if (const auto cfg_path = prescan_config(args)) {
      apply_config(app, args, read_config_file(*cfg_path));
    }
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  } catch (const FlagError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    CLI::App* cmd = app.get_subcommands().front();
    echo_config(err, app, *cmd);
    if (cmd == c_gen) return cmd_gen_synthetic(g, gen, out);
    if (cmd == c_det) return cmd_train_detector(g, data, train, out_path, out);
    if (cmd == c_tr) {
      return cmd_train_transformer(g, data, train, detector_path, out_path, log_path, out);
    }
    if (cmd == c_syn) return cmd_synthesize(transformer_path, sound_path, out_path, out);
    if (cmd == c_eval) {
      return cmd_evaluate(data, detector_path, transformer_path, split_name, report_dir, out);
    }
    if (cmd == c_bench) return cmd_benchmark(g, transformer_path, reps, warmup, json, out);
    if (cmd == c_desc) return cmd_describe(transformer_path, out);
    if (cmd == c_exp) return cmd_experiment(g, data, train, report_dir, out);
  } catch (const FlagError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace s2v
