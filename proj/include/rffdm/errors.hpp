#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace rffdm {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters, schedule ranges, or experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input lacks the structure an operation relies on (e.g. a too-short preamble).
class StructureError : public Error {
 public:
  using Error::Error;
};

/// Denoising plan precondition violated.
class PlanError : public Error {
 public:
  using Error::Error;
};

/// Length or shape disagreement between arguments.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Malformed file content. Carries the byte offset where parsing failed.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

class ChecksumError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace rffdm
