#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace facepipe {

// Base for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file; carries the byte offset where parsing stopped.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class BoundsError : public Error {
 public:
  using Error::Error;
};

// Raster too small for an operator's support, or mismatched raster shapes.
class SizeError : public Error {
 public:
  using Error::Error;
};

// Vector / matrix dimension mismatch.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Training data carries no usable variance.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace facepipe
