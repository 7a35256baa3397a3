#include "s2v/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <json.hpp>

#include "s2v/error.hpp"

namespace s2v {
namespace {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little endian");

constexpr char kMagic[4] = {'O', 'P', 'V', 'B'};

json layer_json(const OperationalLayerConfig& c) {
  return json{{"in", c.in_channels},     {"out", c.out_channels}, {"kernel", c.kernel},
              {"q", c.q},                {"stride", c.stride},    {"padding", c.padding},
              {"transposed", c.transposed},
              {"activation", c.activation == Activation::tanh ? "tanh" : "none"}};
}

json dense_json(const DenseLayerConfig& c) {
  return json{{"in", c.in_features},
              {"out", c.out_features},
              {"activation", c.activation == Activation::tanh ? "tanh" : "none"}};
}

Activation parse_activation(const json& j) {
  const auto s = j.get<std::string>();
  if (s == "tanh") return Activation::tanh;
  if (s == "none") return Activation::none;
  throw CheckpointError(CheckpointErrorKind::bad_descriptor, "unknown activation '" + s + "'");
}

OperationalLayerConfig parse_layer(const json& j) {
  OperationalLayerConfig c;
  c.in_channels = j.at("in").get<std::size_t>();
  c.out_channels = j.at("out").get<std::size_t>();
  c.kernel = j.at("kernel").get<std::size_t>();
  c.q = j.at("q").get<std::size_t>();
  c.stride = j.at("stride").get<std::size_t>();
  c.padding = j.at("padding").get<std::size_t>();
  c.transposed = j.at("transposed").get<bool>();
  c.activation = parse_activation(j.at("activation"));
  return c;
}

DenseLayerConfig parse_dense(const json& j) {
  DenseLayerConfig c;
  c.in_features = j.at("in").get<std::size_t>();
  c.out_features = j.at("out").get<std::size_t>();
  c.activation = parse_activation(j.at("activation"));
  return c;
}

json descriptor_json(const ModelCheckpoint& ckpt) {
  json d;
  d["format"] = "s2v-checkpoint";
  d["training"] = {{"seed", ckpt.training.seed},
                   {"iteration", ckpt.training.iteration},
                   {"validation_loss", ckpt.training.validation_loss}};
  if (ckpt.transformer) {
    json layers = json::array();
    for (const auto& l : ckpt.transformer->layers()) layers.push_back(layer_json(l.config()));
    d["transformer"] = {{"kind", "op-unet"},
                        {"segment_length", ckpt.transformer->segment_length()},
                        {"sample_rate_hz", ckpt.transformer->sample_rate_hz()},
                        {"layers", layers},
                        {"parameters", parameter_count(*ckpt.transformer)}};
  }
  if (ckpt.classifier) {
    json conv = json::array(), dense = json::array();
    for (const auto& l : ckpt.classifier->conv_layers()) conv.push_back(layer_json(l.config()));
    for (const auto& l : ckpt.classifier->dense_layers()) dense.push_back(dense_json(l.config));
    d["classifier"] = {{"kind", "self-onn-classifier"},
                       {"segment_length", ckpt.classifier->segment_length()},
                       {"sample_rate_hz", ckpt.classifier->sample_rate_hz()},
                       {"operational_layers", conv},
                       {"dense_layers", dense},
                       {"parameters", parameter_count(*ckpt.classifier)}};
  }
  return d;
}

template <typename U>
void put(std::string& out, U v) {
  char buf[sizeof(U)];
  std::memcpy(buf, &v, sizeof(U));
  out.append(buf, sizeof(U));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename U>
  U get(const char* what) {
    need(sizeof(U), what);
    U v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return v;
  }

  std::string take(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t position() const { return pos_; }

 private:
  void need(std::size_t n, const char* what) const {
    if (remaining() < n) {
      throw CheckpointError(CheckpointErrorKind::truncated,
                            std::string("checkpoint truncated while reading ") + what);
    }
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

template <typename Model>
std::size_t copy_in(Model& model, const float* src) {
  std::size_t n = 0;
  for (auto* p : model.parameters()) {
    std::memcpy(p->data(), src + n, p->size() * sizeof(float));
    n += p->size();
  }
  return n;
}

}  // namespace

std::string checkpoint_descriptor(const ModelCheckpoint& checkpoint) {
  return descriptor_json(checkpoint).dump();
}

void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& path) {
  const std::string desc = checkpoint_descriptor(ckpt);
  std::vector<const Tensor<float>*> params;
  if (ckpt.transformer) {
    for (const auto* p : ckpt.transformer->parameters()) params.push_back(p);
  }
  if (ckpt.classifier) {
    for (const auto* p : ckpt.classifier->parameters()) params.push_back(p);
  }
  std::uint64_t count = 0;
  for (const auto* p : params) count += p->size();

  std::string out;
  out.reserve(32 + desc.size() + count * sizeof(float));
  out.append(kMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, desc.size());
  out += desc;
  put<std::uint64_t>(out, count);
  for (const auto* p : params) {
    out.append(reinterpret_cast<const char*>(p->data()), p->size() * sizeof(float));
  }
  const auto crc = static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(out.data()), static_cast<uInt>(out.size())));
  put<std::uint32_t>(out, crc);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw CheckpointError(CheckpointErrorKind::io, "cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw CheckpointError(CheckpointErrorKind::io, "write failed for " + path.string());
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError(CheckpointErrorKind::io, "cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw CheckpointError(CheckpointErrorKind::not_a_checkpoint,
                          path.string() + " is not a checkpoint (bad magic)");
  }
  Reader r(bytes);
  r.take(4, "magic");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError(CheckpointErrorKind::version_mismatch,
                          "checkpoint version " + std::to_string(version) + ", expected " +
                              std::to_string(kCheckpointVersion));
  }
  const auto desc_len = r.get<std::uint64_t>("descriptor length");
  if (desc_len > r.remaining()) {
    throw CheckpointError(CheckpointErrorKind::truncated, "checkpoint truncated in descriptor");
  }
  const std::string desc = r.take(static_cast<std::size_t>(desc_len), "descriptor");

  ModelCheckpoint ckpt;
  std::uint64_t expected = 0;
  try {
    const json d = json::parse(desc);
    const auto& t = d.at("training");
    ckpt.training.seed = t.at("seed").get<std::uint64_t>();
    ckpt.training.iteration = t.at("iteration").get<std::uint64_t>();
    ckpt.training.validation_loss = t.at("validation_loss").get<double>();
    if (d.contains("transformer")) {
      const auto& m = d.at("transformer");
      std::vector<OperationalLayerConfig> layers;
      for (const auto& l : m.at("layers")) layers.push_back(parse_layer(l));
      ckpt.transformer.emplace(std::move(layers), m.at("segment_length").get<std::size_t>(),
                               m.at("sample_rate_hz").get<double>());
      expected += parameter_count(*ckpt.transformer);
    }
    if (d.contains("classifier")) {
      const auto& m = d.at("classifier");
      std::vector<OperationalLayerConfig> conv;
      std::vector<DenseLayerConfig> dense;
      for (const auto& l : m.at("operational_layers")) conv.push_back(parse_layer(l));
      for (const auto& l : m.at("dense_layers")) dense.push_back(parse_dense(l));
      ckpt.classifier.emplace(std::move(conv), std::move(dense),
                              m.at("segment_length").get<std::size_t>(),
                              m.at("sample_rate_hz").get<double>());
      expected += parameter_count(*ckpt.classifier);
    }
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(CheckpointErrorKind::bad_descriptor,
                          std::string("invalid checkpoint descriptor: ") + e.what());
  }

  const auto count = r.get<std::uint64_t>("parameter count");
  if (count != expected) {
    throw CheckpointError(CheckpointErrorKind::size_mismatch,
                          "descriptor requires " + std::to_string(expected) +
                              " parameters, header declares " + std::to_string(count));
  }
  const std::size_t payload_bytes = static_cast<std::size_t>(count) * sizeof(float);
  if (r.remaining() < payload_bytes + sizeof(std::uint32_t)) {
    throw CheckpointError(CheckpointErrorKind::size_mismatch,
                          "payload holds fewer than the " + std::to_string(expected) +
                              " parameters the descriptor requires");
  }
  if (r.remaining() > payload_bytes + sizeof(std::uint32_t)) {
    throw CheckpointError(CheckpointErrorKind::size_mismatch,
                          "payload is longer than the descriptor requires");
  }
  const std::size_t payload_at = r.position();
  r.take(payload_bytes, "payload");
  const std::size_t crc_at = r.position();
  const auto stored = r.get<std::uint32_t>("checksum");
  const auto actual = static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(crc_at)));
  if (stored != actual) {
    throw CheckpointError(CheckpointErrorKind::checksum_mismatch, "checkpoint CRC32 mismatch");
  }

  std::vector<float> payload(static_cast<std::size_t>(count));
  std::memcpy(payload.data(), bytes.data() + payload_at, payload_bytes);
  std::size_t offset = 0;
  if (ckpt.transformer) offset += copy_in(*ckpt.transformer, payload.data() + offset);
  if (ckpt.classifier) offset += copy_in(*ckpt.classifier, payload.data() + offset);
  return ckpt;
}

}  // namespace s2v
