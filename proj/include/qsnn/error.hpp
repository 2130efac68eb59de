#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qsnn {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Operation called in the wrong state (backward without forward, s <= 0, ...).
class StateError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ConversionError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

// Malformed input file. `offset` is a byte offset when known, `field` a JSON
// path or IDX header field when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset, std::string field = {})
      : Error(what), offset_(offset), field_(std::move(field)) {}

  std::size_t offset() const noexcept { return offset_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::size_t offset_;
  std::string field_;
};

}  // namespace qsnn
