#pragma once

// Illumination-insensitive preprocessing: the integral normalized gradient
// image. The chain divides the image gradient by a smoothed copy of the image
// (cancelling slowly varying multiplicative lighting), denoises the two
// normalized components with Perona-Malik diffusion, then reintegrates them
// into an image by solving a Neumann Poisson problem.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "facepipe/error.hpp"
#include "facepipe/image.hpp"

namespace facepipe {

enum class GradientOperator { central, sobel };

inline std::string to_string(GradientOperator op) {
  return op == GradientOperator::central ? "central" : "sobel";
}

inline GradientOperator gradient_operator_from_string(const std::string& s) {
  if (s == "central") return GradientOperator::central;
  if (s == "sobel") return GradientOperator::sobel;
  throw ConfigError("unknown gradient operator '" + s + "'");
}

/// Horizontal / vertical derivative rasters of equal shape.
struct GradientField {
  Image gx;
  Image gy;

  GradientField() = default;
  GradientField(Image x, Image y) : gx(std::move(x)), gy(std::move(y)) {
    if (!gx.same_shape(gy)) throw SizeError("gradient field components differ in shape");
  }

  std::size_t width() const noexcept { return gx.width(); }
  std::size_t height() const noexcept { return gx.height(); }
};

struct PreprocessConfig {
  GradientOperator gradient_operator = GradientOperator::central;
  double smoothing_sigma = 3.0;    // pixels, width of the illumination estimate
  double epsilon = 1e-3;           // floor on the smoothed image before dividing
  double diffusion_kappa = 0.1;
  double diffusion_lambda = 0.2;
  std::size_t diffusion_iters = 10;
  std::size_t integration_iters = 10000;
  double integration_tol = 1e-6;
  bool equalize_first = false;

  void validate() const {
    if (!(smoothing_sigma > 0)) throw ConfigError("smoothing_sigma must be > 0");
    if (!(epsilon > 0)) throw ConfigError("epsilon must be > 0");
    if (!(diffusion_kappa > 0)) throw ConfigError("diffusion_kappa must be > 0");
    if (!(diffusion_lambda > 0 && diffusion_lambda <= 0.25)) {
      throw ConfigError("diffusion_lambda must lie in (0, 0.25]");
    }
    if (integration_iters < 1) throw ConfigError("integration_iters must be >= 1");
    if (!(integration_tol > 0)) throw ConfigError("integration_tol must be > 0");
  }
};

/// 256-bin histogram equalization on the grid round(v * 255).
/// Level q maps to (cdf(q) - cdf_min) / (N - cdf_min); when a single level is
/// occupied the quantized input is returned unchanged.
inline Image histogram_equalize(const Image& img) {
  std::array<std::size_t, 256> hist{};
  std::vector<std::uint8_t> level(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    level[i] = static_cast<std::uint8_t>(std::lround(std::clamp(img.pixels()[i], 0.0, 1.0) * 255.0));
    ++hist[level[i]];
  }
  std::array<std::size_t, 256> cdf{};
  std::size_t running = 0;
  for (std::size_t q = 0; q < 256; ++q) cdf[q] = running += hist[q];
  const std::size_t cdf_min = *std::find_if(cdf.begin(), cdf.end(), [](std::size_t c) { return c > 0; });
  const std::size_t total = img.size();

  std::array<double, 256> lut{};
  for (std::size_t q = 0; q < 256; ++q) {
    lut[q] = total == cdf_min
                 ? static_cast<double>(q) / 255.0
                 : static_cast<double>(cdf[q] > cdf_min ? cdf[q] - cdf_min : 0) /
                       static_cast<double>(total - cdf_min);
  }
  Image out(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) out.pixels()[i] = lut[level[i]];
  return out;
}

namespace detail {

struct StencilTap {
  int dr;
  int dc;
  double wx;  // weight in the horizontal derivative
  double wy;  // weight in the vertical derivative
};

// Correlation taps; both operators are exact (gradient 1) on unit ramps.
inline std::vector<StencilTap> gradient_taps(GradientOperator op) {
  if (op == GradientOperator::central) {
    return {{0, -1, -0.5, 0.0}, {0, 1, 0.5, 0.0}, {-1, 0, 0.0, -0.5}, {1, 0, 0.0, 0.5}};
  }
  std::vector<StencilTap> taps;
  for (int dr = -1; dr <= 1; ++dr) {
    for (int dc = -1; dc <= 1; ++dc) {
      const double wx = dc * (2 - std::abs(dr)) / 8.0;
      const double wy = dr * (2 - std::abs(dc)) / 8.0;
      if (wx != 0.0 || wy != 0.0) taps.push_back({dr, dc, wx, wy});
    }
  }
  return taps;
}

inline void check_gradient_support(const Image& img, GradientOperator op) {
  const std::size_t need = op == GradientOperator::sobel ? 3 : 2;
  if (img.width() < need || img.height() < need) {
    throw SizeError(to_string(op) + " gradient needs an image of at least " + std::to_string(need) +
                    "x" + std::to_string(need));
  }
}

}  // namespace detail

/// Image derivatives with replicate-edge boundaries.
inline GradientField gradient(const Image& img, GradientOperator op) {
  detail::check_gradient_support(img, op);
  const auto taps = detail::gradient_taps(op);
  Image gx(img.width(), img.height());
  Image gy(img.width(), img.height());
  for (std::size_t r = 0; r < img.height(); ++r) {
    for (std::size_t c = 0; c < img.width(); ++c) {
      double sx = 0.0;
      double sy = 0.0;
      // Antisymmetric taps are summed as differences so flat regions give
      // exactly zero.
      const auto at = [&](int dr, int dc) {
        return img.clamped(static_cast<std::ptrdiff_t>(r) + dr, static_cast<std::ptrdiff_t>(c) + dc);
      };
      for (const auto& t : taps) {
        if (t.wx > 0.0) sx += t.wx * (at(t.dr, t.dc) - at(t.dr, -t.dc));
        if (t.wy > 0.0) sy += t.wy * (at(t.dr, t.dc) - at(-t.dr, t.dc));
      }
      gx(r, c) = sx;
      gy(r, c) = sy;
    }
  }
  return {std::move(gx), std::move(gy)};
}

/// Truncated Gaussian taps for offsets -radius..radius, radius = ceil(3 sigma),
/// normalized to sum 1.
inline std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0)) throw ConfigError("gaussian sigma must be > 0");
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
    const double w = std::exp(-static_cast<double>(i * i) / (2.0 * sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = w;
    sum += w;
  }
  for (double& w : k) w /= sum;
  return k;
}

/// Separable Gaussian blur, replicate-edge boundary.
inline Image gaussian_smooth(const Image& img, double sigma) {
  const auto kernel = gaussian_kernel(sigma);
  const auto radius = static_cast<std::ptrdiff_t>(kernel.size() / 2);
  Image tmp(img.width(), img.height());
  for (std::size_t r = 0; r < img.height(); ++r) {
    for (std::size_t c = 0; c < img.width(); ++c) {
      double s = 0.0;
      for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
        s += kernel[static_cast<std::size_t>(k + radius)] *
             img.clamped(static_cast<std::ptrdiff_t>(r), static_cast<std::ptrdiff_t>(c) + k);
      }
      tmp(r, c) = s;
    }
  }
  Image out(img.width(), img.height());
  for (std::size_t r = 0; r < img.height(); ++r) {
    for (std::size_t c = 0; c < img.width(); ++c) {
      double s = 0.0;
      for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
        s += kernel[static_cast<std::size_t>(k + radius)] *
             tmp.clamped(static_cast<std::ptrdiff_t>(r) + k, static_cast<std::ptrdiff_t>(c));
      }
      out(r, c) = s;
    }
  }
  return out;
}

/// N = grad(X) / max(smooth(X), epsilon). A global gain on X cancels.
inline GradientField normalized_gradient(const Image& img, const PreprocessConfig& cfg) {
  GradientField g = gradient(img, cfg.gradient_operator);
  const Image illum = gaussian_smooth(img, cfg.smoothing_sigma);
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double denom = std::max(illum.pixels()[i], cfg.epsilon);
    g.gx.pixels()[i] /= denom;
    g.gy.pixels()[i] /= denom;
  }
  return g;
}

/// Perona-Malik diffusion with conductance g(t) = 1 / (1 + (t/kappa)^2) over
/// the four nearest neighbours. Boundaries are zero-flux, so the mean is
/// conserved up to rounding.
inline Image anisotropic_diffuse(const Image& img, double kappa, double lambda, std::size_t iters) {
  if (!(kappa > 0)) throw ConfigError("diffusion kappa must be > 0");
  if (!(lambda > 0 && lambda <= 0.25)) throw ConfigError("diffusion lambda must lie in (0, 0.25]");
  const std::size_t w = img.width();
  const std::size_t h = img.height();
  const double inv_k2 = 1.0 / (kappa * kappa);
  auto flux = [inv_k2](double d) { return d / (1.0 + d * d * inv_k2); };

  Image cur = img;
  Image next = img;
  for (std::size_t it = 0; it < iters; ++it) {
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < w; ++c) {
        const double x = cur(r, c);
        double sum = 0.0;
        if (r > 0) sum += flux(cur(r - 1, c) - x);
        if (r + 1 < h) sum += flux(cur(r + 1, c) - x);
        if (c > 0) sum += flux(cur(r, c - 1) - x);
        if (c + 1 < w) sum += flux(cur(r, c + 1) - x);
        next(r, c) = x + lambda * sum;
      }
    }
    std::swap(cur, next);
  }
  return cur;
}

namespace detail {

// Normal-equation operator A = G^T G of a gradient stencil G (replicate
// edges), stored as CSR without the diagonal.
struct PoissonSystem {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> diag;
  std::vector<std::size_t> row_start;
  std::vector<std::size_t> cols;
  std::vector<double> vals;
  // Per pixel p: columns and weights of rows p of G_x and G_y.
  std::vector<std::vector<std::pair<std::size_t, double>>> gx_rows;
  std::vector<std::vector<std::pair<std::size_t, double>>> gy_rows;
};

inline void accumulate(std::vector<std::pair<std::size_t, double>>& row, std::size_t col, double v) {
  for (auto& [c, w] : row) {
    if (c == col) {
      w += v;
      return;
    }
  }
  row.emplace_back(col, v);
}

inline PoissonSystem build_poisson_system(std::size_t width, std::size_t height, GradientOperator op) {
  const auto taps = gradient_taps(op);
  const std::size_t n = width * height;
  PoissonSystem sys;
  sys.width = width;
  sys.height = height;
  sys.gx_rows.resize(n);
  sys.gy_rows.resize(n);
  std::vector<std::vector<std::pair<std::size_t, double>>> a(n);

  auto add_outer = [&a](const std::vector<std::pair<std::size_t, double>>& g) {
    for (const auto& [qi, wi] : g) {
      if (wi == 0.0) continue;
      for (const auto& [qj, wj] : g) {
        if (wj != 0.0) accumulate(a[qi], qj, wi * wj);
      }
    }
  };

  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      const std::size_t p = r * width + c;
      for (const auto& t : taps) {
        const auto rr = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(r) + t.dr, 0,
                                                   static_cast<std::ptrdiff_t>(height) - 1);
        const auto cc = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(c) + t.dc, 0,
                                                   static_cast<std::ptrdiff_t>(width) - 1);
        const auto q = static_cast<std::size_t>(rr) * width + static_cast<std::size_t>(cc);
        if (t.wx != 0.0) accumulate(sys.gx_rows[p], q, t.wx);
        if (t.wy != 0.0) accumulate(sys.gy_rows[p], q, t.wy);
      }
      add_outer(sys.gx_rows[p]);
      add_outer(sys.gy_rows[p]);
    }
  }

  sys.diag.assign(n, 0.0);
  sys.row_start.reserve(n + 1);
  sys.row_start.push_back(0);
  for (std::size_t q = 0; q < n; ++q) {
    std::sort(a[q].begin(), a[q].end());
    for (const auto& [col, v] : a[q]) {
      if (col == q) {
        sys.diag[q] = v;
      } else if (v != 0.0) {
        sys.cols.push_back(col);
        sys.vals.push_back(v);
      }
    }
    sys.row_start.push_back(sys.cols.size());
  }
  return sys;
}

}  // namespace detail

struct IntegrationResult {
  Image image;
  std::size_t iterations = 0;
  double residual = 0.0;  // max |b - A x| at exit
  bool converged = false;
};

/// Least-squares reintegration of a gradient field.
///
/// Solves G^T G x = G^T n, where G is the configured gradient stencil with
/// replicate edges. G^T G is the discrete Laplacian (with sign flipped)
/// consistent with G and carries zero-flux boundaries; G^T n is the matching
/// divergence. Gauss-Seidel sweeps stop once the max residual drops below
/// cfg.integration_tol or after cfg.integration_iters sweeps; a non-converged
/// result is still returned with `converged == false`. The solution is fixed
/// to mean 0.5, since the Neumann problem only determines it up to a constant.
inline IntegrationResult integrate_gradients(const GradientField& field, const PreprocessConfig& cfg) {
  const std::size_t w = field.width();
  const std::size_t h = field.height();
  if (cfg.gradient_operator == GradientOperator::sobel && (w < 3 || h < 3)) {
    throw SizeError("sobel integration needs at least 3x3");
  }
  if (w * h < 2) throw SizeError("integration needs at least two pixels");
  const auto sys = detail::build_poisson_system(w, h, cfg.gradient_operator);
  const std::size_t n = w * h;

  std::vector<double> b(n, 0.0);
  for (std::size_t p = 0; p < n; ++p) {
    for (const auto& [q, wt] : sys.gx_rows[p]) b[q] += wt * field.gx.pixels()[p];
    for (const auto& [q, wt] : sys.gy_rows[p]) b[q] += wt * field.gy.pixels()[p];
  }

  std::vector<double> x(n, 0.0);
  auto max_residual = [&] {
    double worst = 0.0;
    for (std::size_t q = 0; q < n; ++q) {
      double s = b[q] - sys.diag[q] * x[q];
      for (std::size_t k = sys.row_start[q]; k < sys.row_start[q + 1]; ++k) s -= sys.vals[k] * x[sys.cols[k]];
      worst = std::max(worst, std::abs(s));
    }
    return worst;
  };

  IntegrationResult result;
  result.residual = max_residual();
  while (result.residual >= cfg.integration_tol && result.iterations < cfg.integration_iters) {
    for (std::size_t q = 0; q < n; ++q) {
      double s = b[q];
      for (std::size_t k = sys.row_start[q]; k < sys.row_start[q + 1]; ++k) s -= sys.vals[k] * x[sys.cols[k]];
      x[q] = s / sys.diag[q];
    }
    ++result.iterations;
    result.residual = max_residual();
  }
  result.converged = result.residual < cfg.integration_tol;

  double mu = 0.0;
  for (double v : x) mu += v;
  mu /= static_cast<double>(n);
  for (double& v : x) v += 0.5 - mu;
  result.image = Image(w, h, std::move(x));
  return result;
}

/// Full chain: [equalize] -> normalized gradient -> diffuse each component ->
/// reintegrate -> min-max rescale to [0,1] (flat output becomes all 0.5).
inline Image preprocess_chain(const Image& img, const PreprocessConfig& cfg, IntegrationResult* status = nullptr) {
  cfg.validate();
  if (img.width() < 3 || img.height() < 3) throw SizeError("preprocess_chain needs at least 3x3");
  const Image input = cfg.equalize_first ? histogram_equalize(img) : img;
  GradientField n = normalized_gradient(input, cfg);
  n.gx = anisotropic_diffuse(n.gx, cfg.diffusion_kappa, cfg.diffusion_lambda, cfg.diffusion_iters);
  n.gy = anisotropic_diffuse(n.gy, cfg.diffusion_kappa, cfg.diffusion_lambda, cfg.diffusion_iters);
  IntegrationResult integrated = integrate_gradients(n, cfg);
  Image out = rescale(integrated.image);
  if (status != nullptr) *status = std::move(integrated);
  return out;
}

}  // namespace facepipe
