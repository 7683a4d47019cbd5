#pragma once

// Deterministic synthetic faces: identity textures made of oriented Gaussian
// blobs, rendered under multiplicative illumination fields plus sensor noise.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iterator>
#include <numbers>
#include <string>
#include <vector>

#include "facepipe/error.hpp"
#include "facepipe/image.hpp"
#include "facepipe/io.hpp"
#include "facepipe/pgm.hpp"
#include "facepipe/preprocess.hpp"
#include "facepipe/rng.hpp"

namespace facepipe {

struct IdentitySpec {
  std::uint64_t seed = 0;
  std::size_t n_blobs = 12;
  std::size_t size = 64;

  void validate() const {
    if (size < 16) throw ConfigError("identity size must be >= 16");
    if (n_blobs < 1) throw ConfigError("identity needs at least one blob");
  }
};

enum class IlluminationKind { uniform_scale, linear_ramp, smooth_field };

inline std::string to_string(IlluminationKind k) {
  switch (k) {
    case IlluminationKind::uniform_scale: return "uniform_scale";
    case IlluminationKind::linear_ramp: return "linear_ramp";
    case IlluminationKind::smooth_field: return "smooth_field";
  }
  return "smooth_field";
}

inline IlluminationKind illumination_kind_from_string(const std::string& s) {
  if (s == "uniform_scale") return IlluminationKind::uniform_scale;
  if (s == "linear_ramp") return IlluminationKind::linear_ramp;
  if (s == "smooth_field") return IlluminationKind::smooth_field;
  throw ConfigError("unknown illumination kind '" + s + "'");
}

struct IlluminationSpec {
  IlluminationKind kind = IlluminationKind::smooth_field;
  double strength = 0.6;
  double direction = 0.0;     // radians, linear_ramp only
  double field_sigma = 16.0;  // pixels, smooth_field only
  double noise_sigma = 0.02;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(strength >= 0)) throw ConfigError("illumination strength must be >= 0");
    if (!(noise_sigma >= 0)) throw ConfigError("noise_sigma must be >= 0");
    if (kind == IlluminationKind::smooth_field && !(field_sigma > 0)) {
      throw ConfigError("smooth_field needs field_sigma > 0");
    }
  }
};

struct Blob {
  double cx = 0.0;  // column coordinate
  double cy = 0.0;  // row coordinate
  double sigma_major = 1.0;
  double sigma_minor = 1.0;
  double angle = 0.0;
  double amplitude = 1.0;
};

namespace detail {

// Nominal face layout in unit coordinates: (x, y, base sigma as a fraction of
// size, signed base amplitude). Blob 0 is the bright face region.
struct BlobAnchor {
  double x;
  double y;
  double sigma;
  double amplitude;
};

inline constexpr BlobAnchor kFaceAnchors[] = {
    {0.50, 0.52, 0.35, 1.0},    // face
    {0.35, 0.40, 0.05, -0.6},   // left eye
    {0.65, 0.40, 0.05, -0.6},   // right eye
    {0.50, 0.57, 0.05, 0.4},    // nose
    {0.50, 0.73, 0.07, -0.5},   // mouth
    {0.34, 0.30, 0.06, -0.35},  // left brow
    {0.66, 0.30, 0.06, -0.35},  // right brow
    {0.30, 0.60, 0.07, 0.3},    // left cheek
    {0.70, 0.60, 0.07, 0.3},    // right cheek
    {0.50, 0.86, 0.07, 0.25},   // chin
    {0.50, 0.18, 0.09, 0.3},    // forehead
    {0.50, 0.46, 0.04, 0.3},    // nose bridge
};

}  // namespace detail

/// Blob parameters drawn, in order, from SplitMix64(spec.seed). Blob k
/// follows anchor k of a fixed face layout (blobs beyond the layout are
/// placed uniformly in [0.2, 0.8] * size with amplitude in [-0.4, 0.4]); per
/// blob the draws are: center jitter dx, dy in [-0.06, 0.06] * size, sigma
/// factors for both axes in [0.7, 1.4], angle in [0, pi), amplitude factor
/// in [0.6, 1.4].
inline std::vector<Blob> identity_blobs(const IdentitySpec& spec) {
  spec.validate();
  SplitMix64 rng(spec.seed);
  const auto s = static_cast<double>(spec.size);
  constexpr std::size_t n_anchors = std::size(detail::kFaceAnchors);
  std::vector<Blob> blobs(spec.n_blobs);
  for (std::size_t k = 0; k < blobs.size(); ++k) {
    detail::BlobAnchor a{0.0, 0.0, 0.06, 0.0};
    if (k < n_anchors) {
      a = detail::kFaceAnchors[k];
    } else {
      a.x = rng.uniform(0.2, 0.8);
      a.y = rng.uniform(0.2, 0.8);
      a.amplitude = rng.uniform(-0.4, 0.4);
    }
    auto& b = blobs[k];
    b.cx = (a.x + rng.uniform(-0.06, 0.06)) * s;
    b.cy = (a.y + rng.uniform(-0.06, 0.06)) * s;
    b.sigma_major = a.sigma * s * rng.uniform(0.7, 1.4);
    b.sigma_minor = a.sigma * s * rng.uniform(0.7, 1.4);
    b.angle = rng.uniform(0.0, std::numbers::pi);
    b.amplitude = a.amplitude * rng.uniform(0.6, 1.4);
  }
  return blobs;
}

/// Sum of the identity's blobs, min-max normalized to [0.1, 0.9].
inline Image generate_identity(const IdentitySpec& spec) {
  const auto blobs = identity_blobs(spec);
  Image img(spec.size, spec.size);
  for (std::size_t r = 0; r < spec.size; ++r) {
    for (std::size_t c = 0; c < spec.size; ++c) {
      double v = 0.0;
      for (const auto& b : blobs) {
        const double dx = static_cast<double>(c) - b.cx;
        const double dy = static_cast<double>(r) - b.cy;
        const double u = dx * std::cos(b.angle) + dy * std::sin(b.angle);
        const double w = -dx * std::sin(b.angle) + dy * std::cos(b.angle);
        v += b.amplitude * std::exp(-0.5 * (u * u / (b.sigma_major * b.sigma_major) +
                                            w * w / (b.sigma_minor * b.sigma_minor)));
      }
      img(r, c) = v;
    }
  }
  return rescale(img, 0.1, 0.9);
}

/// Multiplicative gain field L for `spec` at the given size (all ones when
/// strength is 0). Draws from `rng` for uniform_scale and smooth_field.
inline Image illumination_field(std::size_t width, std::size_t height, const IlluminationSpec& spec, SplitMix64& rng) {
  Image field(width, height, 1.0);
  if (spec.strength == 0.0) return field;
  switch (spec.kind) {
    case IlluminationKind::uniform_scale: {
      const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
      for (double& v : field.pixels()) v = 1.0 + spec.strength * sign;
      break;
    }
    case IlluminationKind::linear_ramp: {
      const double cx = 0.5 * static_cast<double>(width - 1);
      const double cy = 0.5 * static_cast<double>(height - 1);
      const double ux = std::cos(spec.direction);
      const double uy = std::sin(spec.direction);
      double extent = 0.0;
      for (std::size_t r = 0; r < height; ++r)
        for (std::size_t c = 0; c < width; ++c)
          extent = std::max(extent, std::abs((static_cast<double>(c) - cx) * ux + (static_cast<double>(r) - cy) * uy));
      for (std::size_t r = 0; r < height; ++r) {
        for (std::size_t c = 0; c < width; ++c) {
          const double t = (static_cast<double>(c) - cx) * ux + (static_cast<double>(r) - cy) * uy;
          field(r, c) = 1.0 + spec.strength * (extent > 0 ? t / extent : 0.0);
        }
      }
      break;
    }
    case IlluminationKind::smooth_field: {
      for (double& v : field.pixels()) v = rng.uniform();
      field = rescale(gaussian_smooth(field, spec.field_sigma), 1.0 - spec.strength, 1.0 + spec.strength);
      break;
    }
  }
  return field;
}

/// out = clamp(img * L + noise, 0, 1). Field draws come first from
/// SplitMix64(spec.seed), then one normal deviate per pixel when noise_sigma > 0.
inline Image apply_illumination(const Image& img, const IlluminationSpec& spec) {
  spec.validate();
  SplitMix64 rng(spec.seed);
  const Image field = illumination_field(img.width(), img.height(), spec, rng);
  Image out(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) {
    double v = img.pixels()[i] * field.pixels()[i];
    if (spec.noise_sigma > 0) v += spec.noise_sigma * rng.normal();
    out.pixels()[i] = std::clamp(v, 0.0, 1.0);
  }
  return out;
}

struct Sample {
  std::size_t identity = 0;        // index within the dataset
  std::uint64_t identity_seed = 0;
  IlluminationSpec illumination;
  Image image;
};

struct Dataset {
  std::uint64_t seed = 0;
  std::vector<Sample> samples;  // identity-major order
};

// Identity seeds of different dataset seeds never collide for n_ids < 2^20.
inline std::uint64_t identity_seed(std::uint64_t dataset_seed, std::size_t identity) {
  return (dataset_seed << 20) + identity;
}

struct DatasetSpec {
  std::size_t n_ids = 20;
  std::size_t imgs_per_id = 4;
  std::size_t size = 64;
  std::size_t n_blobs = 12;
  std::vector<IlluminationSpec> pool{IlluminationSpec{}};
};

/// Renders every identity under `imgs_per_id` illuminations. Each rendering
/// picks a pool entry and a fresh illumination seed from a generator seeded by
/// mix(seed); the pool entry's own seed is ignored.
inline Dataset build_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  if (spec.n_ids < 2) throw ConfigError("dataset needs at least 2 identities");
  if (spec.imgs_per_id < 2) throw ConfigError("dataset needs at least 2 images per identity");
  if (spec.pool.empty()) throw ConfigError("illumination pool is empty");
  for (const auto& p : spec.pool) p.validate();

  SplitMix64 draw(SplitMix64::mix(seed ^ 0x5eedda7a5e7ULL));
  Dataset ds;
  ds.seed = seed;
  for (std::size_t id = 0; id < spec.n_ids; ++id) {
    const IdentitySpec ident{identity_seed(seed, id), spec.n_blobs, spec.size};
    const Image texture = generate_identity(ident);
    for (std::size_t k = 0; k < spec.imgs_per_id; ++k) {
      IlluminationSpec illum = spec.pool[draw.next() % spec.pool.size()];
      illum.seed = draw.next();
      ds.samples.push_back({id, ident.seed, illum, apply_illumination(texture, illum)});
    }
  }
  return ds;
}

inline std::string sample_filename(const Sample& s, std::size_t index) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "id%03zu_img%04zu.pgm", s.identity, index);
  return buf;
}

/// Writes every image as PGM under `dir` and returns the manifest CSV
/// (identity_id,image_path,illum_kind,illum_strength,seed) with paths relative
/// to `relative_to`. `seed` is the illumination seed of the rendering.
inline std::string write_dataset(const Dataset& ds, const std::filesystem::path& dir,
                                 const std::filesystem::path& relative_to) {
  std::filesystem::create_directories(dir);
  std::string manifest = "identity_id,image_path,illum_kind,illum_strength,seed\n";
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& s = ds.samples[i];
    const auto path = dir / sample_filename(s, i);
    write_pgm_file(path, s.image);
    manifest += std::to_string(s.identity) + "," + std::filesystem::relative(path, relative_to).generic_string() +
                "," + to_string(s.illumination.kind) + "," + io::format_double(s.illumination.strength) + "," +
                std::to_string(s.illumination.seed) + "\n";
  }
  return manifest;
}

struct ManifestEntry {
  std::string identity_id;
  std::filesystem::path image_path;  // resolved against the manifest's directory
};

inline std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  const auto lines = io::split_lines(io::read_text(path));
  if (lines.empty()) throw Error("manifest " + path.string() + " is empty");
  const auto header = io::split_csv_line(lines.front());
  if (header.size() < 2 || header[0] != "identity_id" || header[1] != "image_path") {
    throw Error("manifest header must start with identity_id,image_path");
  }
  std::vector<ManifestEntry> out;
  for (std::size_t l = 1; l < lines.size(); ++l) {
    const auto cells = io::split_csv_line(lines[l]);
    if (cells.size() != header.size()) throw Error("manifest line " + std::to_string(l + 1) + ": wrong column count");
    std::filesystem::path p = cells[1];
    if (p.is_relative()) p = path.parent_path() / p;
    out.push_back({cells[0], p});
  }
  return out;
}

}  // namespace facepipe
