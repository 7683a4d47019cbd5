#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "facepipe/kpca.hpp"
#include "support.hpp"

using namespace facepipe;

namespace {

Matrix random_matrix(std::size_t n, std::size_t d, std::uint64_t seed) {
  SplitMix64 rng(seed);
  return Matrix(n, d, fixtures::random_vector(n * d, rng));
}

Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(i, j);
  return out;
}

// Classical PCA scores via the covariance eigendecomposition, components in
// descending eigenvalue order.
Eigen::MatrixXd pca_scores(const Matrix& x) {
  const Eigen::MatrixXd a = to_eigen(x);
  const Eigen::MatrixXd centred = a.rowwise() - a.colwise().mean();
  const Eigen::MatrixXd cov = centred.transpose() * centred / static_cast<double>(x.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const Eigen::MatrixXd v = es.eigenvectors().rowwise().reverse();
  return centred * v;
}

}  // namespace

TEST(Kernel, Examples) {
  const std::vector<double> x{0.3, -0.2, 0.9};
  EXPECT_EQ(kernel_eval(x, x, {KernelKind::rbf, 2, 1.0, 0.7}), 1.0);
  EXPECT_EQ(kernel_eval(std::vector<double>{1, 0}, std::vector<double>{0, 1}, {KernelKind::linear}), 0.0);
  EXPECT_EQ(kernel_eval(std::vector<double>{1, 0}, std::vector<double>{1, 0}, {KernelKind::polynomial, 2, 1.0, 1.0}),
            4.0);
  EXPECT_THROW(kernel_eval(std::vector<double>{1, 0}, std::vector<double>{1}, {}), DimensionError);
}

TEST(Kernel, RbfMatchesDefinition) {
  const std::vector<double> x{1.0, 2.0};
  const std::vector<double> y{0.5, 0.0};
  EXPECT_NEAR(kernel_eval(x, y, {KernelKind::rbf, 2, 1.0, 0.3}), std::exp(-0.3 * 4.25), 1e-15);
}

TEST(Kernel, SpecValidation) {
  EXPECT_THROW((KernelSpec{KernelKind::polynomial, 0, 1.0, 1.0}.validate()), ConfigError);
  EXPECT_THROW((KernelSpec{KernelKind::polynomial, 2, -1.0, 1.0}.validate()), ConfigError);
  EXPECT_THROW((KernelSpec{KernelKind::rbf, 2, 1.0, 0.0}.validate()), ConfigError);
  EXPECT_THROW(kernel_kind_from_string("sigmoid"), ConfigError);
}

TEST(CenterGram, Examples) {
  const Matrix ones(4, 4, 1.0);
  const Matrix centred = center_gram(ones);
  for (double v : centred.values()) EXPECT_NEAR(v, 0.0, 1e-15);
  EXPECT_EQ(center_gram(Matrix(1, 1, 3.5)).values(), std::vector<double>{0.0});
  EXPECT_THROW(center_gram(Matrix(2, 3)), DimensionError);
}

TEST(CenterGram, RowSumsVanishAndSymmetric) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Matrix x = random_matrix(3 + seed, 4, seed);
    const Matrix k = center_gram(gram_matrix(x, {KernelKind::rbf, 2, 1.0, 0.5}));
    for (std::size_t i = 0; i < k.rows(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < k.cols(); ++j) {
        s += k(i, j);
        EXPECT_NEAR(k(i, j), k(j, i), 1e-15);
      }
      EXPECT_LT(std::abs(s), 1e-12);
    }
  }
}

TEST(Jacobi, MatchesEigenSolver) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Matrix x = random_matrix(7, 7, seed + 40);
    Matrix sym(7, 7);
    for (std::size_t i = 0; i < 7; ++i)
      for (std::size_t j = 0; j < 7; ++j) sym(i, j) = x(i, j) + x(j, i);
    auto eig = jacobi_eigen(sym);
    std::sort(eig.values.begin(), eig.values.end());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(to_eigen(sym));
    for (std::size_t i = 0; i < 7; ++i) EXPECT_NEAR(eig.values[i], es.eigenvalues()(static_cast<Eigen::Index>(i)), 1e-10);
  }
}

TEST(FitKpca, IdenticalPointsAreDegenerate) {
  const Matrix x(2, 3, std::vector<double>{0.1, 0.2, 0.3, 0.1, 0.2, 0.3});
  try {
    fit_kpca(x, {KernelKind::linear}, 1);
    FAIL();
  } catch (const DegenerateError& e) {
    EXPECT_NE(std::string(e.what()).find("degenerate training set"), std::string::npos);
  }
}

TEST(FitKpca, PreconditionErrors) {
  EXPECT_THROW(fit_kpca(random_matrix(1, 3, 1), {KernelKind::linear}, 1), DegenerateError);
  EXPECT_THROW(fit_kpca(random_matrix(4, 3, 1), {KernelKind::linear}, 5), ConfigError);
  EXPECT_THROW(fit_kpca(random_matrix(4, 3, 1), {KernelKind::linear}, 0), ConfigError);
  EXPECT_THROW(fit_kpca(random_matrix(4, 3, 1), {KernelKind::rbf, 2, 1.0, -1.0}, 2), ConfigError);
}

TEST(FitKpca, RankOfCenteredLinearGram) {
  for (std::size_t n : {3u, 5u, 8u}) {
    const auto model = fit_kpca(random_matrix(n, n + 2, n), {KernelKind::linear}, n);
    EXPECT_EQ(model.n_components(), n - 1);
  }
}

TEST(FitKpca, LinearKernelEqualsClassicalPca) {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    SplitMix64 rng(seed);
    const std::size_t n = 2 + rng.next() % 19;
    const std::size_t d = 1 + rng.next() % 10;
    const Matrix x = random_matrix(n, d, seed + 1000);
    const auto model = fit_kpca(x, {KernelKind::linear}, std::min(n, d));
    const Matrix proj = training_projections(model);
    const Eigen::MatrixXd oracle = pca_scores(x);
    ASSERT_LE(model.n_components(), std::min(n - 1, d));
    for (std::size_t c = 0; c < model.n_components(); ++c) {
      double same = 0.0;
      double flipped = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double o = oracle(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
        same = std::max(same, std::abs(proj(i, c) - o));
        flipped = std::max(flipped, std::abs(proj(i, c) + o));
      }
      EXPECT_LE(std::min(same, flipped), 1e-6) << "seed " << seed << " component " << c;
    }
  }
}

TEST(FitKpca, EigenvaluesAndVarianceContract) {
  for (auto kind : {KernelKind::linear, KernelKind::polynomial, KernelKind::rbf}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const std::size_t n = 12;
      const auto model = fit_kpca(random_matrix(n, 6, seed), {kind, 2, 1.0, 0.4}, 8);
      const Matrix proj = training_projections(model);
      for (std::size_t c = 0; c < model.n_components(); ++c) {
        EXPECT_GT(model.eigenvalues[c], 0.0);
        if (c > 0) {
          EXPECT_LE(model.eigenvalues[c], model.eigenvalues[c - 1]);
        }
        double mu = 0.0;
        for (std::size_t i = 0; i < n; ++i) mu += proj(i, c);
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) var += (proj(i, c) - mu) * (proj(i, c) - mu);
        var /= static_cast<double>(n);
        EXPECT_NEAR(var, model.eigenvalues[c] / static_cast<double>(n), 1e-6 * std::max(1.0, var));
      }
    }
  }
}

TEST(FitKpca, SignConvention) {
  const auto model = fit_kpca(random_matrix(9, 4, 3), {KernelKind::rbf, 2, 1.0, 0.25}, 5);
  for (std::size_t c = 0; c < model.n_components(); ++c) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < 9; ++i)
      if (std::abs(model.alphas(i, c)) > std::abs(model.alphas(arg, c))) arg = i;
    EXPECT_GT(model.alphas(arg, c), 0.0);
  }
}

TEST(Project, TrainingPointsReproduceThemselves) {
  const Matrix x = random_matrix(10, 5, 8);
  const auto model = fit_kpca(x, {KernelKind::rbf, 2, 1.0, 0.2}, 6);
  const Matrix proj = training_projections(model);
  // Row i of the training projections is row i of (centered Gram) * alphas.
  const Eigen::MatrixXd expect = to_eigen(center_gram(gram_matrix(x, model.kernel))) * to_eigen(model.alphas);
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t c = 0; c < model.n_components(); ++c)
      EXPECT_NEAR(proj(i, c), expect(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)), 1e-9);
}

TEST(Project, LinearMeanProjectsToZero) {
  const Matrix x = random_matrix(7, 4, 12);
  const auto model = fit_kpca(x, {KernelKind::linear}, 3);
  std::vector<double> mu(4, 0.0);
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 4; ++j) mu[j] += x(i, j) / 7.0;
  for (double v : project(model, mu)) EXPECT_NEAR(v, 0.0, 1e-9);
}

TEST(Project, RbfMatchesExplicitProduct) {
  const Matrix x = random_matrix(4, 3, 77);
  const KernelSpec spec{KernelKind::rbf, 2, 1.0, 1.0 / 3.0};
  const auto model = fit_kpca(x, spec, 3);
  const std::vector<double> probe{0.1, -0.4, 0.25};

  // Build k, the training Gram and its statistics directly with Eigen.
  Eigen::MatrixXd gram(4, 4);
  Eigen::VectorXd k(4);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      double d2 = 0.0;
      for (int c = 0; c < 3; ++c) d2 += std::pow(x(static_cast<std::size_t>(i), static_cast<std::size_t>(c)) -
                                                     x(static_cast<std::size_t>(j), static_cast<std::size_t>(c)),
                                                 2);
      gram(i, j) = std::exp(-d2 / 3.0);
    }
    double d2 = 0.0;
    for (int c = 0; c < 3; ++c) d2 += std::pow(probe[static_cast<std::size_t>(c)] - x(static_cast<std::size_t>(i), static_cast<std::size_t>(c)), 2);
    k(i) = std::exp(-d2 / 3.0);
  }
  const Eigen::VectorXd row_means = gram.rowwise().mean();
  const Eigen::VectorXd kt = k.array() - k.mean() - row_means.array() + gram.mean();
  const Eigen::MatrixXd alphas = to_eigen(model.alphas);
  const Eigen::VectorXd expect = alphas.transpose() * kt;
  const auto got = project(model, probe);
  ASSERT_EQ(got.size(), static_cast<std::size_t>(expect.size()));
  for (std::size_t c = 0; c < got.size(); ++c) EXPECT_NEAR(got[c], expect(static_cast<Eigen::Index>(c)), 1e-12);
}

TEST(Project, DimensionMismatch) {
  const auto model = fit_kpca(random_matrix(5, 3, 2), {KernelKind::linear}, 2);
  EXPECT_THROW(project(model, std::vector<double>{1.0, 2.0}), DimensionError);
}

TEST(Cosine, Examples) {
  const std::vector<double> u{0.2, -0.7, 1.1};
  EXPECT_NEAR(cosine_score(u, u), 1.0, 1e-15);
  EXPECT_EQ(cosine_score(std::vector<double>{1, 0}, std::vector<double>{0, 1}), 0.0);
  EXPECT_NEAR(cosine_score(std::vector<double>{1, 1}, std::vector<double>{1, 0}), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_EQ(cosine_score(std::vector<double>{0, 0}, std::vector<double>{1, 0}), 0.0);
  EXPECT_THROW(cosine_score(std::vector<double>{1}, std::vector<double>{1, 0}), DimensionError);
  EXPECT_THROW(cosine_score(std::vector<double>{}, std::vector<double>{}), DimensionError);
}

TEST(Kpca1, RoundTripIsBitExact) {
  for (auto kind : {KernelKind::linear, KernelKind::polynomial, KernelKind::rbf}) {
    const auto model = fit_kpca(random_matrix(6, 4, 5), {kind, 3, 0.5, 0.8}, 4);
    const auto bytes = save_kpca(model);
    EXPECT_EQ(load_kpca(bytes), model);
    EXPECT_EQ(save_kpca(load_kpca(bytes)), bytes);
  }
}

TEST(Kpca1, HeaderLayout) {
  const auto model = fit_kpca(random_matrix(3, 2, 5), {KernelKind::rbf, 2, 1.0, 0.5}, 2);
  const auto bytes = save_kpca(model);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 5), "KPCA1");
  EXPECT_EQ(bytes[5], 2);
  EXPECT_EQ(bytes[6], 'd');
  EXPECT_EQ(bytes[15], 'o');
  EXPECT_EQ(bytes[24], 'g');
  const std::size_t n = 3, d = 2, m = model.n_components();
  EXPECT_EQ(bytes.size(), 33 + 24 + 8 * (n * d + n * m + m + n + 1));
}

TEST(Kpca1, CorruptInputsRaiseFormatErrors) {
  const auto model = fit_kpca(random_matrix(5, 3, 9), {KernelKind::rbf, 2, 1.0, 0.5}, 3);
  const auto good = save_kpca(model);
  auto expect_offset = [](std::vector<std::uint8_t> bytes, std::size_t offset) {
    try {
      load_kpca(bytes);
      ADD_FAILURE() << "expected FormatError";
    } catch (const FormatError& e) {
      EXPECT_EQ(e.offset(), offset) << e.what();
    }
  };
  auto bad = good;
  bad[0] = 'X';
  expect_offset(bad, 0);
  bad = good;
  bad[5] = 7;
  expect_offset(bad, 5);
  bad = good;
  bad[15] = 'z';
  expect_offset(bad, 15);
  bad = good;
  bad.resize(good.size() - 3);
  expect_offset(bad, 57);
  bad = good;
  bad.push_back(0);
  expect_offset(bad, 57);
  expect_offset(std::vector<std::uint8_t>(good.begin(), good.begin() + 20), 16);
  // gamma <= 0
  bad = good;
  for (int i = 0; i < 8; ++i) bad[25 + i] = 0;
  expect_offset(bad, 33);
}
