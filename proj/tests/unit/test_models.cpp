#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "s2v/adam.hpp"
#include "s2v/checkpoint.hpp"
#include "s2v/error.hpp"
#include "s2v/models.hpp"
#include "s2v/ops.hpp"
#include "support/oracles.hpp"

using namespace s2v;
namespace fs = std::filesystem;

namespace {

OpUNetConfig small_unet(std::size_t length = 256) {
  OpUNetConfig c;
  c.segment_length = length;
  c.sample_rate_hz = static_cast<double>(length);
  c.widths = {4, 4, 6, 6, 8};
  return c;
}

FeatureMap<float> random_input(std::size_t length, std::mt19937_64& rng) {
  return s2v::testing::random_tensor_f({1, length}, rng);
}

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("s2v_test_models_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream f(p, std::ios::binary);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

CheckpointErrorKind load_error(const fs::path& p) {
  try {
    (void)load_checkpoint(p);
  } catch (const CheckpointError& e) {
    return e.kind();
  }
  FAIL("load succeeded");
  return CheckpointErrorKind::io;
}

std::size_t unet_count_oracle(const OpUNetConfig& c) {
  const auto& w = c.widths;
  std::size_t total = 0;
  std::size_t in = 1;
  for (std::size_t s = 0; s < 5; ++s) {
    total += w[s] * in * c.encoder_kernel * c.q + w[s];
    in = w[s];
  }
  const std::size_t dec_in[5] = {w[4], 2 * w[3], 2 * w[2], 2 * w[1], 2 * w[0]};
  const std::size_t dec_out[5] = {w[3], w[2], w[1], w[0], 1};
  for (std::size_t d = 0; d < 5; ++d) total += dec_out[d] * dec_in[d] * c.decoder_kernel * c.q + dec_out[d];
  return total;
}

}  // namespace

TEST_CASE("parameter count formula") {
  OperationalLayerConfig l;
  l.in_channels = 1;
  l.out_channels = 16;
  l.kernel = 81;
  l.q = 3;
  CHECK(l.parameter_count() == 3904);
  CHECK(DenseLayerConfig{32, 2}.parameter_count() == 66);
  l.q = 1;
  CHECK(l.parameter_count() == 16 * 81 + 16);

  const OpUNetConfig def;
  const auto unet = OpUNet::build(def, 1);
  CHECK(parameter_count(unet) == unet_count_oracle(def));
  std::size_t tensors = 0;
  for (const auto* t : unet.parameters()) tensors += t->size();
  CHECK(tensors == parameter_count(unet));

  const auto clf = FaultClassifier::build(FaultClassifierConfig{}, 1);
  // 3904 + 31504 + 16144 + 2 * 5392 operational, 256*32+32 and 66 dense.
  CHECK(parameter_count(clf) == 3904 + 31504 + 16144 + 2 * 5392 + 8224 + 66);
}

TEST_CASE("Op-UNet preserves length for every compatible segment length") {
  std::mt19937_64 rng(1);
  for (std::size_t length : {256u, 1024u, 4096u}) {
    auto cfg = small_unet(length);
    const auto net = OpUNet::build(cfg, 3);
    const auto out = net.forward(random_input(length, rng));
    CHECK(out.shape() == Shape{1, length});
    for (float v : out.values()) CHECK(std::abs(v) < 1.0f);
  }
  CHECK_THROWS_AS(OpUNet::build(small_unet(100), 1), ConfigError);
}

TEST_CASE("Op-UNet determinism and zero model") {
  std::mt19937_64 rng(2);
  const auto net = OpUNet::build(small_unet(), 9);
  const auto x = random_input(256, rng);
  CHECK(net.forward(x) == net.forward(x));
  CHECK(OpUNet::build(small_unet(), 9).forward(x) == net.forward(x));
  const auto zero = OpUNet::zeros(small_unet());
  const auto silent = zero.forward(FeatureMap<float>({1, 256}));
  for (float v : silent.values()) CHECK(v == 0.0f);
}

TEST_CASE("value forward equals the tape forward") {
  std::mt19937_64 rng(3);
  const auto net = OpUNet::build(small_unet(), 4);
  const auto x = random_input(256, rng);
  Tape<float> tape;
  const auto bound = net.bind(tape, false);
  CHECK(tape.value(net.forward(tape, tape.constant(x), bound)) == net.forward(x));
}

TEST_CASE("skip connections carry encoder features past a dead decoder stage") {
  std::mt19937_64 rng(4);
  auto net = OpUNet::build(small_unet(), 5);
  // The first decoder stage consumes only the bottleneck; silence it entirely.
  auto& first_decoder = net.layers()[5].params();
  first_decoder.weights.fill(0.0f);
  first_decoder.bias.fill(0.0f);
  const auto a = net.forward(random_input(256, rng));
  const auto b = net.forward(random_input(256, rng));
  CHECK(max_abs_difference(a, b) > 1e-3);
}

TEST_CASE("Op-UNet wiring validation") {
  auto layers = OpUNet::layer_configs(small_unet());
  REQUIRE(layers.size() == 10);
  auto broken = layers;
  broken[7].in_channels += 1;
  CHECK_THROWS_AS(OpUNet(broken, 256, 256.0), ConfigError);
  broken = layers;
  broken.pop_back();
  CHECK_THROWS_AS(OpUNet(broken, 256, 256.0), ConfigError);
  broken = layers;
  broken[9].out_channels = 2;
  CHECK_THROWS_AS(OpUNet(broken, 256, 256.0), ConfigError);
  auto odd = small_unet();
  odd.decoder_kernel = 5;
  CHECK_THROWS_AS(OpUNet::build(odd, 1), ConfigError);
}

TEST_CASE("fault classifier shapes and labels") {
  std::mt19937_64 rng(6);
  const auto clf = FaultClassifier::build(FaultClassifierConfig{}, 7);
  const auto s = clf.forward(random_input(4096, rng));
  CHECK(std::abs(s[0]) < 1.0f);
  CHECK(std::abs(s[1]) < 1.0f);
  std::vector<OperationalLayerConfig> conv;
  for (const auto& l : clf.conv_layers()) conv.push_back(l.config());
  std::vector<DenseLayerConfig> dense;
  for (const auto& l : clf.dense_layers()) dense.push_back(l.config);
  CHECK_NOTHROW(FaultClassifier(conv, dense, 4096, 4096.0));
  // A 2048-sample input flattens to 128 features, not the 256 the dense layer expects.
  CHECK_THROWS_AS(FaultClassifier(conv, dense, 2048, 2048.0), ConfigError);

  CHECK(predict_label({0.9f, -0.9f}) == Label::healthy);
  CHECK(predict_label({-0.2f, 0.1f}) == Label::faulty);
  CHECK(predict_label({0.3f, 0.3f}) == Label::healthy);
  for (float shift : {-5.0f, 0.5f, 10.0f}) {
    CHECK(predict_label({-0.2f + shift, 0.1f + shift}) == Label::faulty);
    CHECK(predict_label({0.4f + shift, 0.1f + shift}) == Label::healthy);
  }
  CHECK(target_encoding(Label::healthy) == std::array<float, 2>{1.0f, -1.0f});
  CHECK(target_encoding(Label::faulty) == std::array<float, 2>{-1.0f, 1.0f});
}

TEST_CASE("one Adam step mutates exactly parameter_count values") {
  std::mt19937_64 rng(8);
  auto net = OpUNet::build(small_unet(), 10);
  std::vector<Tensor<float>> before;
  for (const auto* t : net.parameters()) before.push_back(*t);
  std::vector<Tensor<float>> grads;
  for (const auto* t : net.parameters()) grads.push_back(s2v::testing::random_tensor_f(t->shape(), rng, 0.5f, 1.0f));
  AdamState<float> state;
  const auto params = net.parameters();
  adam_step<float>(params, grads, state, 1e-3);
  std::size_t changed = 0;
  for (std::size_t i = 0; i < params.size(); ++i)
    for (std::size_t j = 0; j < params[i]->size(); ++j) changed += (*params[i])[j] != before[i][j];
  CHECK(changed == parameter_count(net));
}

TEST_CASE("checkpoint round trip is bit exact") {
  const auto dir = scratch_dir("roundtrip");
  std::mt19937_64 rng(9);
  ModelCheckpoint ckpt;
  ckpt.transformer = OpUNet::build(small_unet(4096), 11);
  ckpt.classifier = FaultClassifier::build(FaultClassifierConfig{}, 12);
  ckpt.training = {42, 700, 0.125};
  save_checkpoint(ckpt, dir / "a.ckpt");
  const auto back = load_checkpoint(dir / "a.ckpt");
  REQUIRE(back.transformer);
  REQUIRE(back.classifier);
  CHECK(back.training.seed == 42);
  CHECK(back.training.iteration == 700);
  CHECK(back.training.validation_loss == 0.125);
  const auto x = random_input(4096, rng);
  CHECK(back.transformer->forward(x) == ckpt.transformer->forward(x));
  CHECK(back.classifier->forward(x) == ckpt.classifier->forward(x));
  save_checkpoint(back, dir / "b.ckpt");
  CHECK(read_bytes(dir / "a.ckpt") == read_bytes(dir / "b.ckpt"));
  CHECK(checkpoint_descriptor(back) == checkpoint_descriptor(ckpt));

  ModelCheckpoint only;
  only.classifier = ckpt.classifier;
  save_checkpoint(only, dir / "c.ckpt");
  const auto c = load_checkpoint(dir / "c.ckpt");
  CHECK_FALSE(c.transformer);
  CHECK(c.classifier);
}

TEST_CASE("checkpoint errors are distinct") {
  const auto dir = scratch_dir("errors");
  ModelCheckpoint ckpt;
  ckpt.transformer = OpUNet::build(small_unet(), 1);
  save_checkpoint(ckpt, dir / "good.ckpt");
  const std::string good = read_bytes(dir / "good.ckpt");
  const auto path = dir / "bad.ckpt";

  std::string b = good;
  b[0] = 'X';
  write_bytes(path, b);
  CHECK(load_error(path) == CheckpointErrorKind::not_a_checkpoint);

  b = good;
  b[4] = 2;
  write_bytes(path, b);
  CHECK(load_error(path) == CheckpointErrorKind::version_mismatch);

  write_bytes(path, good.substr(0, 20));
  CHECK(load_error(path) == CheckpointErrorKind::truncated);

  write_bytes(path, good.substr(0, good.size() - 40));
  CHECK(load_error(path) == CheckpointErrorKind::size_mismatch);

  write_bytes(path, good + std::string(8, '\0'));
  CHECK(load_error(path) == CheckpointErrorKind::size_mismatch);

  b = good;
  b[b.size() - 10] ^= 0x5a;
  write_bytes(path, b);
  CHECK(load_error(path) == CheckpointErrorKind::checksum_mismatch);

  b = good;
  b[16] = '!';  // first descriptor byte
  write_bytes(path, b);
  CHECK(load_error(path) == CheckpointErrorKind::bad_descriptor);

  CHECK(load_error(dir / "missing.ckpt") == CheckpointErrorKind::io);
}

TEST_CASE("describe lists every layer and the total") {
  const auto net = OpUNet::build(OpUNetConfig{}, 1);
  const auto text = net.describe();
  CHECK(text.find("total parameters: " + std::to_string(parameter_count(net))) != std::string::npos);
  CHECK(std::count(text.begin(), text.end(), '\n') >= 11);
}
