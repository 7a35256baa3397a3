#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "s2v/models.hpp"

namespace s2v {

struct TrainingMetadata {
  std::uint64_t seed = 0;
  std::uint64_t iteration = 0;
  double validation_loss = 0.0;
};

/// On-disk container for a transformer, a classifier, or both.
///
/// Layout (little endian):
///   "OPVB" | u32 version | u64 descriptor bytes | descriptor (canonical JSON) |
///   u64 parameter count | float32 parameters in descriptor order | u32 CRC32 of all prior bytes
struct ModelCheckpoint {
  std::optional<OpUNet> transformer;
  std::optional<FaultClassifier> classifier;
  TrainingMetadata training;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const ModelCheckpoint& checkpoint, const std::filesystem::path& path);

/// Throws CheckpointError with a kind per failure: not_a_checkpoint, version_mismatch,
/// truncated, size_mismatch, checksum_mismatch, bad_descriptor or io.
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

/// The canonical JSON descriptor written into the file.
std::string checkpoint_descriptor(const ModelCheckpoint& checkpoint);

}  // namespace s2v
