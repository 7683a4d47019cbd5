#pragma once

// Binary 8-bit PGM ("P5") codec.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "facepipe/error.hpp"
#include "facepipe/image.hpp"
#include "facepipe/io.hpp"

namespace facepipe {

namespace detail {

inline bool pgm_space(std::uint8_t c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

class PgmHeaderReader {
 public:
  explicit PgmHeaderReader(std::span<const std::uint8_t> buf) : buf_(buf) {}

  // Skips whitespace and '#' comments, then parses a decimal token.
  std::size_t number(const char* what) {
    while (pos_ < buf_.size()) {
      if (pgm_space(buf_[pos_])) {
        ++pos_;
      } else if (buf_[pos_] == '#') {
        while (pos_ < buf_.size() && buf_[pos_] != '\n' && buf_[pos_] != '\r') ++pos_;
      } else {
        break;
      }
    }
    if (pos_ >= buf_.size()) throw FormatError(std::string("truncated header, expected ") + what, pos_);
    if (buf_[pos_] < '0' || buf_[pos_] > '9') {
      throw FormatError(std::string("expected decimal ") + what, pos_);
    }
    token_ = pos_;
    std::size_t value = 0;
    while (pos_ < buf_.size() && buf_[pos_] >= '0' && buf_[pos_] <= '9') {
      value = value * 10 + (buf_[pos_] - '0');
      if (value > (1u << 30)) throw FormatError(std::string(what) + " too large", pos_);
      ++pos_;
    }
    return value;
  }

  std::size_t pos() const { return pos_; }
  std::size_t token_start() const { return token_; }
  void advance(std::size_t n) { pos_ += n; }

 private:
  std::span<const std::uint8_t> buf_;
  std::size_t pos_ = 0;
  std::size_t token_ = 0;
};

}  // namespace detail

/// Decodes a binary PGM. Pixel values are raw / maxval, so the common
/// maxval = 255 yields raw / 255 exactly.
inline Image load_pgm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    throw FormatError("bad magic, expected \"P5\"", 0);
  }
  detail::PgmHeaderReader reader(bytes);
  reader.advance(2);
  if (reader.pos() < bytes.size() && !detail::pgm_space(bytes[reader.pos()])) {
    throw FormatError("bad magic, expected whitespace after \"P5\"", reader.pos());
  }
  const std::size_t width = reader.number("width");
  const std::size_t width_at = reader.token_start();
  const std::size_t height = reader.number("height");
  const std::size_t maxval = reader.number("maxval");
  const std::size_t maxval_at = reader.token_start();
  if (width < 1 || height < 1) throw FormatError("zero image dimension", width_at);
  if (maxval < 1 || maxval > 255) {
    throw FormatError("maxval " + std::to_string(maxval) + " outside [1,255]", maxval_at);
  }
  if (reader.pos() >= bytes.size() || !detail::pgm_space(bytes[reader.pos()])) {
    throw FormatError("truncated pixel payload", reader.pos());
  }
  const std::size_t payload = reader.pos() + 1;
  const std::size_t count = width * height;
  if (bytes.size() - payload < count) throw FormatError("truncated pixel payload", bytes.size());

  std::vector<double> data(count);
  const auto scale = static_cast<double>(maxval);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint8_t raw = bytes[payload + i];
    if (raw > maxval) throw FormatError("pixel value exceeds maxval", payload + i);
    data[i] = static_cast<double>(raw) / scale;
  }
  return Image(width, height, std::move(data));
}

/// Encodes with maxval 255; values are clamped to [0,1] and quantized by
/// round(v * 255).
inline std::vector<std::uint8_t> save_pgm(const Image& img) {
  const std::string header =
      "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(header.size() + img.size());
  for (double v : img.pixels()) {
    out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  }
  return out;
}

inline Image read_pgm_file(const std::filesystem::path& path) {
  const auto bytes = io::read_bytes(path);
  return load_pgm(bytes);
}

inline void write_pgm_file(const std::filesystem::path& path, const Image& img) {
  io::write_atomic(path, save_pgm(img));
}

}  // namespace facepipe
