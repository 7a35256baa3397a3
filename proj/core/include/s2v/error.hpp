#pragma once

#include <stdexcept>
#include <string>

namespace s2v {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes that cannot be combined. The message names both shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// API misuse, e.g. asking a tape for gradients before backward().
class UsageError : public Error {
 public:
  using Error::Error;
};

/// An architecture or run configuration that cannot be built.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Data that is well-formed but unusable (single-class training set, missing speed, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. `field()` names the header field, chunk or row at fault.
class FormatError : public Error {
 public:
  FormatError(std::string field, const std::string& message)
      : Error(field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

enum class CheckpointErrorKind {
  io,
  not_a_checkpoint,
  version_mismatch,
  truncated,
  size_mismatch,
  checksum_mismatch,
  bad_descriptor,
};

class CheckpointError : public Error {
 public:
  CheckpointError(CheckpointErrorKind kind, const std::string& message)
      : Error(message), kind_(kind) {}

  CheckpointErrorKind kind() const noexcept { return kind_; }

 private:
  CheckpointErrorKind kind_;
};

}  // namespace s2v
