#pragma once

// Log-likelihood-ratio score fusion under an independent-Gaussian model.
//
// Each classifier score s_i is modelled as N(m_same_i, v_same_i) for genuine
// pairs and N(m_diff_i, v_diff_i) for impostor pairs, independently across
// classifiers. The fused score is
//
//   S = sum_i [ log N(s_i; same_i) - log N(s_i; diff_i) ]
//
// and a pair is accepted when S >= threshold (threshold 0 is the Bayes test
// with equal priors).

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "facepipe/error.hpp"
#include "facepipe/linalg.hpp"

namespace facepipe {

inline constexpr double kMinVariance = 1e-8;

struct GaussianParams {
  double mean = 0.0;
  double var = 1.0;

  friend bool operator==(const GaussianParams&, const GaussianParams&) = default;
};

struct ClassifierParams {
  GaussianParams same;
  GaussianParams diff;

  friend bool operator==(const ClassifierParams&, const ClassifierParams&) = default;
};

struct FusionModel {
  std::vector<ClassifierParams> classifiers;

  std::size_t size() const noexcept { return classifiers.size(); }

  void validate() const {
    if (classifiers.empty()) throw ConfigError("fusion model has no classifiers");
    for (const auto& c : classifiers) {
      if (!(c.same.var > 0) || !(c.diff.var > 0) || !std::isfinite(c.same.mean) ||
          !std::isfinite(c.diff.mean)) {
        throw ConfigError("fusion model has invalid Gaussian parameters");
      }
    }
  }

  friend bool operator==(const FusionModel&, const FusionModel&) = default;
};

namespace detail {

inline GaussianParams fit_column(const Matrix& scores, std::size_t col) {
  const std::size_t k = scores.rows();
  double mean = 0.0;
  for (std::size_t r = 0; r < k; ++r) mean += scores(r, col);
  mean /= static_cast<double>(k);
  double ss = 0.0;
  for (std::size_t r = 0; r < k; ++r) ss += (scores(r, col) - mean) * (scores(r, col) - mean);
  return {mean, std::max(ss / static_cast<double>(k - 1), kMinVariance)};
}

}  // namespace detail

/// Rows are training pairs, columns are classifiers. Variance uses divisor
/// k-1 and is floored at kMinVariance.
inline FusionModel fit_fusion(const Matrix& same_scores, const Matrix& diff_scores) {
  if (same_scores.rows() < 2 || diff_scores.rows() < 2) {
    throw DegenerateError("fit_fusion needs at least 2 genuine and 2 impostor score rows");
  }
  if (same_scores.cols() != diff_scores.cols() || same_scores.cols() == 0) {
    throw DimensionError("fit_fusion: genuine and impostor score matrices have different column counts");
  }
  FusionModel model;
  for (std::size_t c = 0; c < same_scores.cols(); ++c) {
    model.classifiers.push_back({detail::fit_column(same_scores, c), detail::fit_column(diff_scores, c)});
  }
  return model;
}

inline double log_gaussian(double s, const GaussianParams& p) {
  const double d = s - p.mean;
  return -0.5 * std::log(2.0 * std::numbers::pi * p.var) - d * d / (2.0 * p.var);
}

inline double fuse(const FusionModel& model, std::span<const double> scores) {
  if (scores.size() != model.size()) {
    throw DimensionError("fuse: got " + std::to_string(scores.size()) + " scores for " +
                         std::to_string(model.size()) + " classifiers");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    s += log_gaussian(scores[i], model.classifiers[i].same) - log_gaussian(scores[i], model.classifiers[i].diff);
  }
  return s;
}

enum class Decision { accept, reject };

// Ties accept.
inline Decision decide(double fused, double threshold) noexcept {
  return fused >= threshold ? Decision::accept : Decision::reject;
}

inline nlohmann::json to_json(const FusionModel& model) {
  nlohmann::json classifiers = nlohmann::json::array();
  for (const auto& c : model.classifiers) {
    classifiers.push_back({{"same", {{"mean", c.same.mean}, {"var", c.same.var}}},
                           {"diff", {{"mean", c.diff.mean}, {"var", c.diff.var}}}});
  }
  return {{"classifiers", classifiers}};
}

inline FusionModel fusion_from_json(const nlohmann::json& doc) {
  FusionModel model;
  try {
    for (const auto& c : doc.at("classifiers")) {
      model.classifiers.push_back({{c.at("same").at("mean").get<double>(), c.at("same").at("var").get<double>()},
                                   {c.at("diff").at("mean").get<double>(), c.at("diff").at("var").get<double>()}});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed fusion model: ") + e.what());
  }
  model.validate();
  return model;
}

}  // namespace facepipe
