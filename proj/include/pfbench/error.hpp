#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace pfbench {

// Root of all library errors. The CLI maps these to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A malformed record. `offset` is a byte offset (binary) or 1-based line
// number (text), as reported by `offset_kind()`.
class ParseError : public Error {
 public:
  enum class OffsetKind { kByte, kLine };
  ParseError(const std::string& what, std::uint64_t offset, OffsetKind kind);
  std::uint64_t offset() const { return offset_; }
  OffsetKind offset_kind() const { return kind_; }

 private:
  std::uint64_t offset_;
  OffsetKind kind_;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Input data violates a precondition (too short, misaligned, mismatched).
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace pfbench
