#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "s2v/label.hpp"
#include "s2v/signal.hpp"

namespace s2v {

enum class WavEncoding { pcm16, float32 };

/// Reads a mono RIFF/WAVE file (PCM16 scaled by 1/32768, or IEEE float32) or a single-column
/// CSV whose first line is `sample_rate_hz=<f>`. The format is chosen by the leading bytes.
/// Throws FormatError naming the offending field, or DataError when the file is missing.
Signal load_recording(const std::filesystem::path& path);

void write_wav(const std::filesystem::path& path, const Signal& signal,
               WavEncoding encoding = WavEncoding::float32);

void write_csv(const std::filesystem::path& path, const Signal& signal);

struct ManifestEntry {
  std::filesystem::path sound_path;
  std::filesystem::path vibration_path;
  Label label = Label::healthy;
  std::string machine_id;
  double speed_rpm = 0.0;
  std::string load;
  std::string sensor_id;
  double duration_seconds = 0.0;
};

/// Tab-separated, one recording pair per line, fields in ManifestEntry order. Lines starting with
/// '#' and blank lines are skipped. Relative paths resolve against the manifest's directory.
struct DatasetManifest {
  std::vector<ManifestEntry> entries;
};

/// Throws DataError (missing files, with the row number) or FormatError (bad label or speed).
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Paths are written relative to the manifest directory when they live beneath it.
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

struct RecordingPair {
  Signal sound;
  Signal vibration;
  bool truncated = false;
};

/// Loads both files of an entry. Mismatched lengths are truncated to the shorter with a warning;
/// mismatched sample rates throw DataError.
RecordingPair load_pair(const ManifestEntry& entry);

struct DatasetLoadOptions {
  double segment_seconds = 1.0;
  /// When non-zero, every recording must have this rate (DataError otherwise).
  double expected_sample_rate_hz = 0.0;
};

/// Loads every entry in manifest order, cuts 1-s (configurable) segments, and normalizes both
/// streams of each segment to [-1, 1]. Degenerate segments are kept (all zeros) and logged.
std::vector<SegmentPair> load_segments(const DatasetManifest& manifest,
                                       const DatasetLoadOptions& options = {});

}  // namespace s2v
