#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <tuple>
#include <type_traits>
#include <utility>
#include <vector>

#include "facepipe/error.hpp"

namespace facepipe {

/// Dense row-major 2D grid. `Raster<double>` is the grayscale Image used by
/// every stage; other element types carry spectra and similar fields.
template <typename T>
class Raster {
 public:
  using value_type = T;

  Raster() = default;

  Raster(std::size_t width, std::size_t height, T fill = T{})
      : width_(width), height_(height), data_(width * height, fill) {
    check_dims();
  }

  Raster(std::size_t width, std::size_t height, std::vector<T> data)
      : width_(width), height_(height), data_(std::move(data)) {
    check_dims();
    if (data_.size() != width_ * height_) {
      throw SizeError("raster data length " + std::to_string(data_.size()) +
                      " does not match " + std::to_string(width_) + "x" +
                      std::to_string(height_));
    }
    if constexpr (std::is_floating_point_v<T>) {
      for (T v : data_) {
        if (!std::isfinite(v)) throw Error("raster contains a non-finite value");
      }
    }
  }

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t row, std::size_t col) noexcept {
    return data_[row * width_ + col];
  }
  const T& operator()(std::size_t row, std::size_t col) const noexcept {
    return data_[row * width_ + col];
  }

  // Replicate-edge access for signed coordinates.
  const T& clamped(std::ptrdiff_t row, std::ptrdiff_t col) const noexcept {
    const auto r = std::clamp<std::ptrdiff_t>(row, 0, static_cast<std::ptrdiff_t>(height_) - 1);
    const auto c = std::clamp<std::ptrdiff_t>(col, 0, static_cast<std::ptrdiff_t>(width_) - 1);
    return data_[static_cast<std::size_t>(r) * width_ + static_cast<std::size_t>(c)];
  }

  std::span<T> pixels() noexcept { return data_; }
  std::span<const T> pixels() const noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  bool same_shape(const Raster& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  void check_dims() const {
    if (width_ < 1 || height_ < 1) throw SizeError("raster dimensions must be >= 1");
  }

  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<T> data_;
};

using Image = Raster<double>;

// Source-pixel rectangle; x/y address the top-left pixel.
struct Rect {
  std::size_t x = 0;
  std::size_t y = 0;
  std::size_t width = 0;
  std::size_t height = 0;
};

inline double mean(const Image& img) {
  const auto px = img.pixels();
  return std::accumulate(px.begin(), px.end(), 0.0) / static_cast<double>(px.size());
}

inline std::pair<double, double> min_max(const Image& img) {
  const auto [lo, hi] = std::minmax_element(img.pixels().begin(), img.pixels().end());
  return {*lo, *hi};
}

inline Image scaled(const Image& img, double factor) {
  Image out = img;
  for (double& v : out.pixels()) v *= factor;
  return out;
}

inline double max_abs_diff(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw SizeError("max_abs_diff: shape mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a.pixels()[i] - b.pixels()[i]));
  }
  return worst;
}

inline double mean_abs_diff(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw SizeError("mean_abs_diff: shape mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a.pixels()[i] - b.pixels()[i]);
  return sum / static_cast<double>(a.size());
}

/// Linear min-max rescale into [lo, hi]. A flat image maps to the midpoint.
inline Image rescale(const Image& img, double lo = 0.0, double hi = 1.0) {
  const auto [mn, mx] = min_max(img);
  Image out = img;
  if (!(mx > mn)) {
    std::fill(out.pixels().begin(), out.pixels().end(), 0.5 * (lo + hi));
    return out;
  }
  const double scale = (hi - lo) / (mx - mn);
  for (double& v : out.pixels()) v = lo + (v - mn) * scale;
  return out;
}

/// Bilinear resample of `crop` to out_w x out_h. Pixel centers are aligned:
/// output pixel o samples source coordinate crop.x + (o + 0.5) * crop.w / out_w - 0.5,
/// clamped to the crop, so an identity crop at the same size is exact.
inline Image crop_resize(const Image& img, const Rect& crop, std::size_t out_w, std::size_t out_h) {
  if (out_w < 1 || out_h < 1) throw SizeError("crop_resize: output dimensions must be >= 1");
  if (crop.width < 1 || crop.height < 1 || crop.x + crop.width > img.width() ||
      crop.y + crop.height > img.height()) {
    throw BoundsError("crop_resize: crop rectangle outside image bounds");
  }

  auto axis = [](std::size_t origin, std::size_t extent, std::size_t out, std::size_t o) {
    const double step = static_cast<double>(extent) / static_cast<double>(out);
    double s = static_cast<double>(origin) + (static_cast<double>(o) + 0.5) * step - 0.5;
    s = std::clamp(s, static_cast<double>(origin), static_cast<double>(origin + extent - 1));
    auto i0 = static_cast<std::size_t>(std::floor(s));
    const std::size_t i1 = std::min(i0 + 1, origin + extent - 1);
    return std::tuple{i0, i1, s - static_cast<double>(i0)};
  };

  Image out(out_w, out_h);
  for (std::size_t oy = 0; oy < out_h; ++oy) {
    const auto [y0, y1, fy] = axis(crop.y, crop.height, out_h, oy);
    for (std::size_t ox = 0; ox < out_w; ++ox) {
      const auto [x0, x1, fx] = axis(crop.x, crop.width, out_w, ox);
      const double top = img(y0, x0) + fx * (img(y0, x1) - img(y0, x0));
      const double bottom = img(y1, x0) + fx * (img(y1, x1) - img(y1, x0));
      out(oy, ox) = top + fy * (bottom - top);
    }
  }
  return out;
}

}  // namespace facepipe
