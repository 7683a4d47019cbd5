#pragma once

// Hybrid Fourier features: two spectral domains (real/imaginary parts and
// magnitude) crossed with three radial frequency bands, one L2-normalized
// vector per combination.

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "facepipe/error.hpp"
#include "facepipe/image.hpp"
#include "facepipe/io.hpp"

namespace facepipe {

/// Unnormalized 2D DFT, DC at (0,0).
struct Spectrum {
  Raster<std::complex<double>> bins;

  std::size_t width() const noexcept { return bins.width(); }
  std::size_t height() const noexcept { return bins.height(); }
  double re(std::size_t u, std::size_t v) const { return bins(u, v).real(); }
  double im(std::size_t u, std::size_t v) const { return bins(u, v).imag(); }
};

enum class SpectralDomain { real_imag, magnitude };
enum class FrequencyBand { low, mid, full };

struct FeatureDescriptor {
  SpectralDomain domain = SpectralDomain::magnitude;
  FrequencyBand band = FrequencyBand::full;

  friend bool operator==(const FeatureDescriptor&, const FeatureDescriptor&) = default;
};

inline std::string to_string(SpectralDomain d) {
  return d == SpectralDomain::real_imag ? "real_imag" : "magnitude";
}

inline std::string to_string(FrequencyBand b) {
  switch (b) {
    case FrequencyBand::low: return "low";
    case FrequencyBand::mid: return "mid";
    case FrequencyBand::full: return "full";
  }
  return "full";
}

// Tag form "domain:band", e.g. "real_imag:low".
inline std::string to_string(const FeatureDescriptor& d) {
  return to_string(d.domain) + ":" + to_string(d.band);
}

inline FeatureDescriptor descriptor_from_string(const std::string& tag) {
  const auto colon = tag.find(':');
  if (colon == std::string::npos) throw ConfigError("descriptor '" + tag + "' must look like domain:band");
  const std::string domain = tag.substr(0, colon);
  const std::string band = tag.substr(colon + 1);
  FeatureDescriptor d;
  if (domain == "real_imag") d.domain = SpectralDomain::real_imag;
  else if (domain == "magnitude") d.domain = SpectralDomain::magnitude;
  else throw ConfigError("unknown spectral domain '" + domain + "'");
  if (band == "low") d.band = FrequencyBand::low;
  else if (band == "mid") d.band = FrequencyBand::mid;
  else if (band == "full") d.band = FrequencyBand::full;
  else throw ConfigError("unknown frequency band '" + band + "'");
  return d;
}

inline std::vector<FeatureDescriptor> default_descriptors() {
  std::vector<FeatureDescriptor> out;
  for (auto domain : {SpectralDomain::real_imag, SpectralDomain::magnitude}) {
    for (auto band : {FrequencyBand::low, FrequencyBand::mid, FrequencyBand::full}) {
      out.push_back({domain, band});
    }
  }
  return out;
}

struct FeatureVector {
  std::vector<double> values;
  FeatureDescriptor descriptor;
};

namespace detail {

// In-place 1D DFT along a strided line, twiddles indexed by (k*j) mod n.
inline void dft_line(std::vector<std::complex<double>>& line, const std::vector<std::complex<double>>& twiddle) {
  const std::size_t n = line.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc = 0.0;
    std::size_t idx = 0;
    for (std::size_t j = 0; j < n; ++j) {
      acc += line[j] * twiddle[idx];
      idx += k;
      if (idx >= n) idx -= n;
    }
    out[k] = acc;
  }
  line.swap(out);
}

inline std::vector<std::complex<double>> twiddles(std::size_t n) {
  std::vector<std::complex<double>> t(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    t[k] = {std::cos(angle), std::sin(angle)};
  }
  return t;
}

}  // namespace detail

/// F(u,v) = sum_ij X(i,j) exp(-2 pi i (u i / H + v j / W)), computed row then
/// column. F(0,0) is the pixel sum; Parseval reads sum|X|^2 = sum|F|^2 / (HW).
inline Spectrum dft2(const Image& img) {
  const std::size_t w = img.width();
  const std::size_t h = img.height();
  const auto tw_row = detail::twiddles(w);
  const auto tw_col = detail::twiddles(h);
  Raster<std::complex<double>> bins(w, h);

  std::vector<std::complex<double>> line(w);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) line[c] = img(r, c);
    detail::dft_line(line, tw_row);
    for (std::size_t c = 0; c < w; ++c) bins(r, c) = line[c];
  }
  line.resize(h);
  for (std::size_t c = 0; c < w; ++c) {
    for (std::size_t r = 0; r < h; ++r) line[r] = bins(r, c);
    detail::dft_line(line, tw_col);
    for (std::size_t r = 0; r < h; ++r) bins(r, c) = line[r];
  }
  return Spectrum{std::move(bins)};
}

/// Normalized radial frequency of bin (u, v): the Euclidean norm of the
/// folded frequencies (min(u, H-u)/H, min(v, W-v)/W), divided by sqrt 2 so
/// that the Nyquist corner sits at r = 1/2.
inline double radial_frequency(std::size_t u, std::size_t v, std::size_t height, std::size_t width) {
  const double fu = static_cast<double>(std::min(u, height - u)) / static_cast<double>(height);
  const double fv = static_cast<double>(std::min(v, width - v)) / static_cast<double>(width);
  return std::sqrt(0.5 * (fu * fu + fv * fv));
}

inline bool in_band(double r, FrequencyBand band) {
  switch (band) {
    case FrequencyBand::low: return r <= 0.125;
    case FrequencyBand::mid: return r > 0.125 && r <= 0.25;
    case FrequencyBand::full: return r <= 0.5;
  }
  return false;
}

/// Row-major flat indices (u * width + v) of the bins inside `band`.
inline std::vector<std::size_t> band_mask(std::size_t width, std::size_t height, FrequencyBand band) {
  std::vector<std::size_t> idx;
  for (std::size_t u = 0; u < height; ++u) {
    for (std::size_t v = 0; v < width; ++v) {
      if (in_band(radial_frequency(u, v, height, width), band)) idx.push_back(u * width + v);
    }
  }
  return idx;
}

inline void l2_normalize(std::vector<double>& v) {
  double ss = 0.0;
  for (double x : v) ss += x * x;
  if (ss == 0.0) return;
  const double inv = 1.0 / std::sqrt(ss);
  for (double& x : v) x *= inv;
}

inline FeatureVector extract_features(const Spectrum& spec, const FeatureDescriptor& desc) {
  const auto idx = band_mask(spec.width(), spec.height(), desc.band);
  const auto bins = spec.bins.pixels();
  FeatureVector fv;
  fv.descriptor = desc;
  if (desc.domain == SpectralDomain::real_imag) {
    fv.values.reserve(2 * idx.size());
    for (std::size_t i : idx) fv.values.push_back(bins[i].real());
    for (std::size_t i : idx) fv.values.push_back(bins[i].imag());
  } else {
    fv.values.reserve(idx.size());
    for (std::size_t i : idx) fv.values.push_back(std::abs(bins[i]));
  }
  l2_normalize(fv.values);
  return fv;
}

/// Optional spatial taper applied before the transform.
enum class Taper { none, hann };

inline std::string to_string(Taper t) { return t == Taper::hann ? "hann" : "none"; }

inline Taper taper_from_string(const std::string& s) {
  if (s == "none") return Taper::none;
  if (s == "hann") return Taper::hann;
  throw ConfigError("unknown taper '" + s + "'");
}

/// Hann taper: subtract the image mean, then multiply by the separable window
/// w(i) = 0.5 - 0.5 cos(2 pi (i + 0.5) / n). Shading that does not wrap around
/// the image border would otherwise leak into every frequency bin.
inline Image apply_taper(const Image& img, Taper taper) {
  if (taper == Taper::none) return img;
  auto window = [](std::size_t n) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * (static_cast<double>(i) + 0.5) / static_cast<double>(n));
    }
    return w;
  };
  const auto wr = window(img.height());
  const auto wc = window(img.width());
  const auto [lo, hi] = min_max(img);
  if (lo == hi) return Image(img.width(), img.height(), 0.0);  // exact, despite rounding in the mean
  const double mu = mean(img);
  Image out = img;
  for (std::size_t r = 0; r < img.height(); ++r)
    for (std::size_t c = 0; c < img.width(); ++c) out(r, c) = (img(r, c) - mu) * wr[r] * wc[c];
  return out;
}

/// One transform, one vector per requested descriptor (in request order).
inline std::vector<FeatureVector> feature_sets(const Image& img, const std::vector<FeatureDescriptor>& selection,
                                               Taper taper = Taper::none) {
  if (selection.empty()) throw ConfigError("feature selection must not be empty");
  const Spectrum spec = dft2(apply_taper(img, taper));
  std::vector<FeatureVector> out;
  out.reserve(selection.size());
  for (const auto& d : selection) out.push_back(extract_features(spec, d));
  return out;
}

/// One CSV row per vector: descriptor tag, then the values.
inline std::string features_csv(const std::vector<FeatureVector>& vectors) {
  std::string out;
  for (const auto& fv : vectors) {
    out += to_string(fv.descriptor);
    for (double v : fv.values) out += "," + io::format_double(v);
    out += "\n";
  }
  return out;
}

}  // namespace facepipe
