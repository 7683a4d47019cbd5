#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "facepipe/fusion.hpp"
#include "facepipe/roc.hpp"
#include "support.hpp"

using namespace facepipe;

namespace {

Matrix column(std::vector<double> v) {
  const std::size_t n = v.size();
  return Matrix(n, 1, std::move(v));
}

FusionModel one(double m_same, double v_same, double m_diff, double v_diff) {
  return FusionModel{{{{m_same, v_same}, {m_diff, v_diff}}}};
}

}  // namespace

TEST(FitFusion, ZeroVarianceIsFloored) {
  const auto m = fit_fusion(column({1, 1, 1}), column({0, 0, 0}));
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m.classifiers[0].same.mean, 1.0);
  EXPECT_EQ(m.classifiers[0].diff.mean, 0.0);
  EXPECT_EQ(m.classifiers[0].same.var, 1e-8);
  EXPECT_EQ(m.classifiers[0].diff.var, 1e-8);
}

TEST(FitFusion, TwoPointVarianceUsesUnbiasedDivisor) {
  const auto m = fit_fusion(column({0, 2}), column({0, 2}));
  EXPECT_EQ(m.classifiers[0].same.mean, 1.0);
  EXPECT_EQ(m.classifiers[0].same.var, 2.0);
}

TEST(FitFusion, Errors) {
  EXPECT_THROW(fit_fusion(column({1}), column({0, 1})), DegenerateError);
  EXPECT_THROW(fit_fusion(Matrix(3, 2), Matrix(3, 3)), DimensionError);
}

TEST(FitFusion, MonteCarloWithinThreeStandardErrors) {
  const double same_mean[] = {0.8, 0.5, 0.65};
  const double same_sd[] = {0.1, 0.2, 0.05};
  const double diff_mean[] = {0.2, 0.1, 0.4};
  const double diff_sd[] = {0.15, 0.1, 0.3};
  const std::size_t k = 50;
  SplitMix64 rng(2024);
  Matrix same(k, 3);
  Matrix diff(k, 3);
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t c = 0; c < 3; ++c) {
      same(r, c) = rng.normal(same_mean[c], same_sd[c]);
      diff(r, c) = rng.normal(diff_mean[c], diff_sd[c]);
    }
  }
  const auto m = fit_fusion(same, diff);
  const auto kd = static_cast<double>(k);
  for (std::size_t c = 0; c < 3; ++c) {
    const auto check = [&](const GaussianParams& p, double mean, double sd) {
      const double se_mean = sd / std::sqrt(kd);
      const double se_var = sd * sd * std::sqrt(2.0 / (kd - 1.0));
      EXPECT_LE(std::abs(p.mean - mean), 3 * se_mean) << "classifier " << c;
      EXPECT_LE(std::abs(p.var - sd * sd), 3 * se_var) << "classifier " << c;
    };
    check(m.classifiers[c].same, same_mean[c], same_sd[c]);
    check(m.classifiers[c].diff, diff_mean[c], diff_sd[c]);
  }
}

TEST(LogGaussian, Examples) {
  EXPECT_NEAR(log_gaussian(0.3, {0.3, 1.0 / (2.0 * std::numbers::pi)}), 0.0, 1e-15);
  EXPECT_NEAR(log_gaussian(-1.5, {-1.5, 0.04}), -0.5 * std::log(2 * std::numbers::pi * 0.04), 1e-15);
  EXPECT_NEAR(log_gaussian(2.0, {0.0, 1.0}), -2.9189385332046727, 1e-14);
  EXPECT_TRUE(std::isfinite(log_gaussian(1e3, {0.0, 1e-8})));
}

TEST(Fuse, IdenticalDensitiesGiveZero) {
  const FusionModel m{{{{0.4, 0.2}, {0.4, 0.2}}, {{-1.0, 3.0}, {-1.0, 3.0}}}};
  for (double s : {-2.0, 0.0, 0.7}) EXPECT_EQ(fuse(m, std::vector<double>{s, s * 2}), 0.0);
}

TEST(Fuse, MidpointGivesZero) {
  EXPECT_NEAR(fuse(one(0.9, 0.05, 0.1, 0.05), std::vector<double>{0.5}), 0.0, 1e-12);
}

TEST(Fuse, ClosedFormExample) {
  EXPECT_NEAR(fuse(one(1.0, 1.0, 0.0, 1.0), std::vector<double>{1.0}), 0.5, 1e-15);
}

TEST(Fuse, LengthMismatch) {
  EXPECT_THROW(fuse(one(1, 1, 0, 1), std::vector<double>{1.0, 2.0}), DimensionError);
}

TEST(Fuse, MonotoneInScore) {
  const auto m = one(0.7, 0.02, 0.3, 0.02);
  double prev = fuse(m, std::vector<double>{-1.0});
  for (int i = 1; i <= 200; ++i) {
    const double s = -1.0 + 0.015 * i;
    const double cur = fuse(m, std::vector<double>{s});
    EXPECT_GT(cur, prev) << s;
    prev = cur;
  }
}

TEST(Fuse, AdditiveAcrossClassifiers) {
  SplitMix64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    FusionModel m;
    std::vector<double> s;
    double sum = 0.0;
    for (int i = 0; i < 6; ++i) {
      const ClassifierParams c{{rng.uniform(-1, 1), rng.uniform(0.01, 1)}, {rng.uniform(-1, 1), rng.uniform(0.01, 1)}};
      m.classifiers.push_back(c);
      s.push_back(rng.uniform(-1, 1));
      sum += fuse(FusionModel{{c}}, std::vector<double>{s.back()});
    }
    EXPECT_NEAR(fuse(m, s), sum, 1e-12);
  }
}

TEST(Fuse, SwappingHypothesesNegates) {
  SplitMix64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    FusionModel m;
    FusionModel swapped;
    std::vector<double> s;
    for (int i = 0; i < 4; ++i) {
      const GaussianParams a{rng.uniform(-1, 1), rng.uniform(0.01, 1)};
      const GaussianParams b{rng.uniform(-1, 1), rng.uniform(0.01, 1)};
      m.classifiers.push_back({a, b});
      swapped.classifiers.push_back({b, a});
      s.push_back(rng.uniform(-1, 1));
    }
    EXPECT_EQ(fuse(swapped, s), -fuse(m, s));
  }
}

TEST(Decide, TiesAccept) {
  EXPECT_EQ(decide(0.1, 0.0), Decision::accept);
  EXPECT_EQ(decide(0.0, 0.0), Decision::accept);
  EXPECT_EQ(decide(-0.1, 0.0), Decision::reject);
  EXPECT_EQ(decide(-1e300, -INFINITY), Decision::accept);
}

TEST(Fuse, MatchedModelDominatesSingleClassifiers) {
  const FusionModel truth{{{{0.6, 0.04}, {0.4, 0.04}}, {{0.7, 0.09}, {0.45, 0.06}}, {{0.5, 0.01}, {0.42, 0.02}}}};
  const std::size_t pairs = 2000;
  SplitMix64 rng(99);
  auto draw = [&](bool same) {
    std::vector<double> s;
    for (const auto& c : truth.classifiers) {
      const auto& p = same ? c.same : c.diff;
      s.push_back(rng.normal(p.mean, std::sqrt(p.var)));
    }
    return s;
  };
  std::vector<std::vector<double>> gen;
  std::vector<std::vector<double>> imp;
  for (std::size_t i = 0; i < pairs; ++i) {
    gen.push_back(draw(true));
    imp.push_back(draw(false));
  }
  Matrix same(pairs, 3);
  Matrix diff(pairs, 3);
  for (std::size_t i = 0; i < pairs; ++i)
    for (std::size_t c = 0; c < 3; ++c) {
      same(i, c) = gen[i][c];
      diff(i, c) = imp[i][c];
    }
  const FusionModel fitted = fit_fusion(same, diff);
  ScoreSet fused;
  double best_single = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    ScoreSet single;
    for (std::size_t i = 0; i < pairs; ++i) {
      single.genuine.push_back(gen[i][c]);
      single.impostor.push_back(imp[i][c]);
    }
    best_single = std::max(best_single, auc(roc(single)));
  }
  for (std::size_t i = 0; i < pairs; ++i) {
    fused.genuine.push_back(fuse(fitted, gen[i]));
    fused.impostor.push_back(fuse(fitted, imp[i]));
  }
  EXPECT_GE(auc(roc(fused)), best_single - 0.01);
}

TEST(FusionJson, RoundTripIsExact) {
  SplitMix64 rng(7);
  FusionModel m;
  for (int i = 0; i < 6; ++i) {
    m.classifiers.push_back({{rng.uniform(-1, 1), rng.uniform(1e-8, 1)}, {rng.uniform(-1, 1), rng.uniform(1e-8, 1)}});
  }
  const auto text = to_json(m).dump();
  EXPECT_EQ(fusion_from_json(nlohmann::json::parse(text)), m);
}

TEST(FusionJson, RejectsMalformed) {
  EXPECT_THROW(fusion_from_json(nlohmann::json::parse(R"({"classifiers": []})")), ConfigError);
  EXPECT_THROW(fusion_from_json(nlohmann::json::parse(R"({"classifiers": [{"same": {"mean": 1}}]})")), ConfigError);
  EXPECT_THROW(fusion_from_json(nlohmann::json::parse(
                   R"({"classifiers": [{"same": {"mean": 1, "var": 0}, "diff": {"mean": 0, "var": 1}}]})")),
               ConfigError);
  EXPECT_THROW(fusion_from_json(nlohmann::json::parse(R"({"other": 1})")), ConfigError);
}
