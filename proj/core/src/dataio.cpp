#include "s2v/dataio.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "s2v/error.hpp"
#include "s2v/logging.hpp"

namespace s2v {
namespace {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "WAV I/O assumes little endian");

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::string read_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open recording " + path.string());
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

template <typename U>
U read_le(const std::string& b, std::size_t at) {
  U v;
  std::memcpy(&v, b.data() + at, sizeof(U));
  return v;
}

template <typename U>
void write_le(std::string& out, U v) {
  char buf[sizeof(U)];
  std::memcpy(buf, &v, sizeof(U));
  out.append(buf, sizeof(U));
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, out);
  return r.ec == std::errc() && r.ptr == end && std::isfinite(out);
}

Signal parse_wav(const std::string& b, const fs::path& path) {
  if (b.size() < 12 || b.compare(8, 4, "WAVE") != 0) {
    throw FormatError("RIFF", path.string() + " is not a RIFF/WAVE file");
  }
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::size_t data_at = 0, data_len = 0;
  bool have_data = false;
  std::size_t pos = 12;
  while (pos + 8 <= b.size()) {
    const std::string id = b.substr(pos, 4);
    const auto len = read_le<std::uint32_t>(b, pos + 4);
    const std::size_t body = pos + 8;
    if (id == "fmt ") {
      if (len < 16 || body + len > b.size()) throw FormatError("fmt", "fmt chunk too short");
      format = read_le<std::uint16_t>(b, body);
      channels = read_le<std::uint16_t>(b, body + 2);
      rate = read_le<std::uint32_t>(b, body + 4);
      bits = read_le<std::uint16_t>(b, body + 14);
      if (format == kFormatExtensible) {
        if (len < 40) throw FormatError("fmt", "extensible fmt chunk too short");
        format = read_le<std::uint16_t>(b, body + 24);
      }
      have_fmt = true;
    } else if (id == "data") {
      data_at = body;
      data_len = std::min<std::size_t>(len, b.size() - body);
      if (data_len < len) log_warning(path.string() + ": data chunk truncated");
      have_data = true;
      break;
    }
    pos = body + len + (len & 1u);
  }
  if (!have_fmt) throw FormatError("fmt", path.string() + " has no fmt chunk");
  if (!have_data) throw FormatError("data", path.string() + " has no data chunk");
  if (channels != 1) {
    throw FormatError("channels", "mono required, " + path.string() + " has " +
                                      std::to_string(channels) + " channels");
  }
  if (rate == 0) throw FormatError("sample_rate", path.string() + " has a zero sample rate");

  Signal s;
  s.sample_rate_hz = rate;
  if (format == kFormatPcm && bits == 16) {
    const std::size_t n = data_len / 2;
    s.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      s.samples[i] = static_cast<float>(read_le<std::int16_t>(b, data_at + 2 * i)) / 32768.0f;
    }
  } else if (format == kFormatFloat && bits == 32) {
    const std::size_t n = data_len / 4;
    s.samples.resize(n);
    std::memcpy(s.samples.data(), b.data() + data_at, n * 4);
  } else {
    throw FormatError("encoding", "unsupported WAV encoding (format " + std::to_string(format) +
                                      ", " + std::to_string(bits) +
                                      " bits); PCM16 or float32 required");
  }
  return s;
}

Signal parse_csv(const std::string& text, const fs::path& path) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("sample_rate_hz", path.string() + " is empty");
  line = trim(line);
  constexpr std::string_view key = "sample_rate_hz=";
  double rate = 0.0;
  if (line.rfind(key, 0) != 0 || !parse_double(trim(line.substr(key.size())), rate) ||
      rate <= 0.0) {
    throw FormatError("sample_rate_hz",
                      path.string() + ": first line must be sample_rate_hz=<positive number>");
  }
  Signal s;
  s.sample_rate_hz = rate;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    const std::string t = trim(line);
    if (t.empty()) continue;
    double v = 0.0;
    if (t.find(',') != std::string::npos || !parse_double(t, v)) {
      throw FormatError("row " + std::to_string(row),
                        path.string() + ": expected a single numeric column, got '" + t + "'");
    }
    s.samples.push_back(static_cast<float>(v));
  }
  return s;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(trim(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start)));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

Signal load_recording(const fs::path& path) {
  if (!fs::exists(path)) throw DataError("recording not found: " + path.string());
  const std::string bytes = read_file(path);
  if (bytes.size() >= 4 && bytes.compare(0, 4, "RIFF") == 0) return parse_wav(bytes, path);
  return parse_csv(bytes, path);
}

void write_wav(const fs::path& path, const Signal& signal, WavEncoding encoding) {
  if (signal.sample_rate_hz <= 0.0 || signal.sample_rate_hz != std::round(signal.sample_rate_hz)) {
    throw ConfigError("WAV needs a positive integer sample rate");
  }
  const bool pcm = encoding == WavEncoding::pcm16;
  const std::uint16_t bytes_per_sample = pcm ? 2 : 4;
  const auto rate = static_cast<std::uint32_t>(signal.sample_rate_hz);
  const auto data_len = static_cast<std::uint32_t>(signal.samples.size() * bytes_per_sample);

  std::string out;
  out += "RIFF";
  write_le<std::uint32_t>(out, 36 + data_len);
  out += "WAVEfmt ";
  write_le<std::uint32_t>(out, 16);
  write_le<std::uint16_t>(out, pcm ? kFormatPcm : kFormatFloat);
  write_le<std::uint16_t>(out, 1);
  write_le<std::uint32_t>(out, rate);
  write_le<std::uint32_t>(out, rate * bytes_per_sample);
  write_le<std::uint16_t>(out, bytes_per_sample);
  write_le<std::uint16_t>(out, static_cast<std::uint16_t>(8 * bytes_per_sample));
  out += "data";
  write_le<std::uint32_t>(out, data_len);
  for (float v : signal.samples) {
    if (pcm) {
      const double scaled = std::round(static_cast<double>(v) * 32768.0);
      write_le<std::int16_t>(out, static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0)));
    } else {
      write_le<float>(out, v);
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

void write_csv(const fs::path& path, const Signal& signal) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot write " + path.string());
  f << "sample_rate_hz=" << format_double(signal.sample_rate_hz) << '\n';
  f.precision(9);
  for (float v : signal.samples) f << v << '\n';
}

DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("manifest not found: " + path.string());
  const fs::path base = path.parent_path();
  DatasetManifest manifest;
  std::string line;
  std::size_t row = 0;
  while (std::getline(f, line)) {
    ++row;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto fields = split_tabs(line);
    const std::string where = path.string() + " row " + std::to_string(row);
    if (fields.size() != 8) {
      throw FormatError("row " + std::to_string(row),
                        where + ": expected 8 tab-separated fields, got " +
                            std::to_string(fields.size()));
    }
    ManifestEntry e;
    e.sound_path = fields[0];
    e.vibration_path = fields[1];
    if (e.sound_path.is_relative()) e.sound_path = base / e.sound_path;
    if (e.vibration_path.is_relative()) e.vibration_path = base / e.vibration_path;
    const auto label = parse_label(fields[2]);
    if (!label) {
      throw FormatError("label", where + ": label must be healthy or faulty, got '" + fields[2] + "'");
    }
    e.label = *label;
    e.machine_id = fields[3];
    if (!parse_double(fields[4], e.speed_rpm)) {
      throw FormatError("speed_rpm", where + ": non-numeric speed '" + fields[4] + "'");
    }
    e.load = fields[5];
    e.sensor_id = fields[6];
    if (!parse_double(fields[7], e.duration_seconds)) {
      throw FormatError("duration_seconds", where + ": non-numeric duration '" + fields[7] + "'");
    }
    for (const auto* p : {&e.sound_path, &e.vibration_path}) {
      if (!fs::exists(*p)) throw DataError(where + ": missing file " + p->string());
    }
    manifest.entries.push_back(std::move(e));
  }
  return manifest;
}

void write_manifest(const fs::path& path, const DatasetManifest& manifest) {
  const fs::path base = fs::absolute(path).parent_path();
  auto rel = [&](const fs::path& p) {
    const auto r = fs::absolute(p).lexically_relative(base);
    return r.empty() || *r.begin() == ".." ? p.string() : r.generic_string();
  };
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot write " + path.string());
  f << "# sound\tvibration\tlabel\tmachine\tspeed_rpm\tload\tsensor\tduration_s\n";
  for (const auto& e : manifest.entries) {
    f << rel(e.sound_path) << '\t' << rel(e.vibration_path) << '\t' << to_string(e.label) << '\t'
      << e.machine_id << '\t' << format_double(e.speed_rpm) << '\t' << e.load << '\t'
      << e.sensor_id << '\t' << format_double(e.duration_seconds) << '\n';
  }
}

RecordingPair load_pair(const ManifestEntry& entry) {
  RecordingPair pair{load_recording(entry.sound_path), load_recording(entry.vibration_path), false};
  if (pair.sound.sample_rate_hz != pair.vibration.sample_rate_hz) {
    throw DataError("sample rate mismatch: " + entry.sound_path.string() + " at " +
                    format_double(pair.sound.sample_rate_hz) + " Hz, " +
                    entry.vibration_path.string() + " at " +
                    format_double(pair.vibration.sample_rate_hz) + " Hz");
  }
  const std::size_t ns = pair.sound.samples.size(), nv = pair.vibration.samples.size();
  if (ns != nv) {
    const std::size_t n = std::min(ns, nv);
    log_warning("length mismatch " + std::to_string(ns) + " vs " + std::to_string(nv) +
                " samples in " + entry.sound_path.string() + " / " +
                entry.vibration_path.string() + "; truncated to " + std::to_string(n));
    pair.sound.samples.resize(n);
    pair.vibration.samples.resize(n);
    pair.truncated = true;
  }
  return pair;
}

std::vector<SegmentPair> load_segments(const DatasetManifest& manifest,
                                       const DatasetLoadOptions& options) {
  std::vector<SegmentPair> out;
  for (const auto& entry : manifest.entries) {
    const auto pair = load_pair(entry);
    if (options.expected_sample_rate_hz > 0.0 &&
        pair.sound.sample_rate_hz != options.expected_sample_rate_hz) {
      throw DataError(entry.sound_path.string() + ": sample rate " +
                      format_double(pair.sound.sample_rate_hz) + " Hz, expected " +
                      format_double(options.expected_sample_rate_hz) + " Hz");
    }
    const auto sound = segment_signal(pair.sound, options.segment_seconds, options.segment_seconds);
    const auto vib =
        segment_signal(pair.vibration, options.segment_seconds, options.segment_seconds);
    for (std::size_t i = 0; i < sound.size(); ++i) {
      auto s = normalize_segment<float>(sound[i]);
      auto v = normalize_segment<float>(vib[i]);
      if (s.degenerate || v.degenerate) {
        log_warning("constant segment " + std::to_string(i) + " in " +
                    entry.sound_path.filename().string() + "; normalized to zeros");
      }
      out.push_back({std::move(s.values), std::move(v.values), entry.label,
                     {entry.machine_id, entry.speed_rpm, entry.load, entry.sensor_id}});
    }
  }
  return out;
}

}  // namespace s2v
