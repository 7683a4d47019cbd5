#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "facepipe/image.hpp"
#include "facepipe/preprocess.hpp"
#include "facepipe/rng.hpp"

namespace facepipe::fixtures {

inline Image random_image(std::size_t w, std::size_t h, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  SplitMix64 rng(seed);
  Image img(w, h);
  for (double& v : img.pixels()) v = rng.uniform(lo, hi);
  return img;
}

// Random image smoothed to the given scale and rescaled to [lo, hi].
inline Image smooth_image(std::size_t w, std::size_t h, std::uint64_t seed, double sigma, double lo = 0.2,
                          double hi = 0.8) {
  return rescale(gaussian_smooth(random_image(w, h, seed), sigma), lo, hi);
}

inline std::vector<double> random_vector(std::size_t n, SplitMix64& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("facepipe_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace facepipe::fixtures
