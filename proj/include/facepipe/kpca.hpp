#pragma once

// Kernel PCA subspaces and cosine scoring.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "facepipe/error.hpp"
#include "facepipe/linalg.hpp"

namespace facepipe {

enum class KernelKind : std::uint8_t { linear = 0, polynomial = 1, rbf = 2 };

inline std::string to_string(KernelKind k) {
  switch (k) {
    case KernelKind::linear: return "linear";
    case KernelKind::polynomial: return "polynomial";
    case KernelKind::rbf: return "rbf";
  }
  return "linear";
}

inline KernelKind kernel_kind_from_string(const std::string& s) {
  if (s == "linear") return KernelKind::linear;
  if (s == "polynomial") return KernelKind::polynomial;
  if (s == "rbf") return KernelKind::rbf;
  throw ConfigError("unknown kernel kind '" + s + "'");
}

struct KernelSpec {
  KernelKind kind = KernelKind::rbf;
  int degree = 2;       // polynomial
  double offset = 1.0;  // polynomial
  double gamma = 1.0;   // rbf

  void validate() const {
    if (kind == KernelKind::polynomial && (degree < 1 || !(offset >= 0))) {
      throw ConfigError("polynomial kernel needs degree >= 1 and offset >= 0");
    }
    if (kind == KernelKind::rbf && !(gamma > 0)) throw ConfigError("rbf kernel needs gamma > 0");
  }

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

inline double kernel_eval(std::span<const double> x, std::span<const double> y, const KernelSpec& spec) {
  if (x.size() != y.size()) {
    throw DimensionError("kernel_eval: dimension " + std::to_string(x.size()) + " vs " +
                         std::to_string(y.size()));
  }
  switch (spec.kind) {
    case KernelKind::linear:
      return dot(x, y);
    case KernelKind::polynomial:
      return std::pow(dot(x, y) + spec.offset, spec.degree);
    case KernelKind::rbf: {
      double d2 = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) d2 += (x[i] - y[i]) * (x[i] - y[i]);
      return std::exp(-spec.gamma * d2);
    }
  }
  return 0.0;
}

/// Double centering K - 1K - K1 + 1K1 (1 = the n x n matrix of 1/n).
inline Matrix center_gram(const Matrix& k) {
  const std::size_t n = k.rows();
  if (k.cols() != n) throw DimensionError("center_gram: Gram matrix is not square");
  std::vector<double> row_mean(n, 0.0);
  std::vector<double> col_mean(n, 0.0);
  double grand = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      row_mean[i] += k(i, j);
      col_mean[j] += k(i, j);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    grand += row_mean[i];
    row_mean[i] /= static_cast<double>(n);
    col_mean[i] /= static_cast<double>(n);
  }
  grand /= static_cast<double>(n * n);
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) = k(i, j) - row_mean[i] - col_mean[j] + grand;
  return out;
}

/// A fitted KPCA subspace. Column k of `alphas` is the k-th unit eigenvector
/// of the centered Gram matrix divided by sqrt(eigenvalues[k]); projected
/// training data then has per-component (divisor-n) variance eigenvalue / n.
struct SubspaceModel {
  KernelSpec kernel;
  Matrix train_features;                // n x d
  Matrix alphas;                        // n x m
  std::vector<double> eigenvalues;      // m, descending
  std::vector<double> train_row_means;  // n, of the uncentered Gram
  double train_grand_mean = 0.0;

  std::size_t n_components() const noexcept { return eigenvalues.size(); }
  std::size_t dim() const noexcept { return train_features.cols(); }

  friend bool operator==(const SubspaceModel&, const SubspaceModel&) = default;
};

inline Matrix gram_matrix(const Matrix& x, const KernelSpec& spec) {
  const std::size_t n = x.rows();
  Matrix k(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      k(i, j) = kernel_eval(x.row(i), x.row(j), spec);
      k(j, i) = k(i, j);
    }
  }
  return k;
}

/// Fits KPCA on the rows of `x`. Keeps at most `n_components` eigenpairs with
/// eigenvalue above 1e-10 of the largest; eigenvectors are sign-normalized so
/// their largest-magnitude entry is positive.
inline SubspaceModel fit_kpca(const Matrix& x, const KernelSpec& spec, std::size_t n_components) {
  spec.validate();
  const std::size_t n = x.rows();
  if (n < 2) throw DegenerateError("fit_kpca needs at least 2 training samples");
  if (n_components < 1 || n_components > n) {
    throw ConfigError("n_components must lie in [1, " + std::to_string(n) + "]");
  }

  const Matrix k = gram_matrix(x, spec);
  SubspaceModel model;
  model.kernel = spec;
  model.train_features = x;
  model.train_row_means.assign(n, 0.0);
  double kmax = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      model.train_row_means[i] += k(i, j);
      kmax = std::max(kmax, std::abs(k(i, j)));
    }
    model.train_grand_mean += model.train_row_means[i];
    model.train_row_means[i] /= static_cast<double>(n);
  }
  model.train_grand_mean /= static_cast<double>(n * n);

  const SymmetricEigen eig = jacobi_eigen(center_gram(k));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return eig.values[a] > eig.values[b]; });

  const double lmax = eig.values[order.front()];
  if (!(lmax > 1e-12 * std::max(kmax, 1e-300))) throw DegenerateError("degenerate training set");
  const double floor = 1e-10 * lmax;

  std::vector<std::size_t> kept;
  for (std::size_t idx : order) {
    if (kept.size() == n_components || !(eig.values[idx] > floor)) break;
    kept.push_back(idx);
  }

  model.alphas = Matrix(n, kept.size());
  for (std::size_t c = 0; c < kept.size(); ++c) {
    const std::size_t idx = kept[c];
    std::size_t arg = 0;
    for (std::size_t i = 1; i < n; ++i) {
      if (std::abs(eig.vectors(i, idx)) > std::abs(eig.vectors(arg, idx))) arg = i;
    }
    const double sign = eig.vectors(arg, idx) < 0 ? -1.0 : 1.0;
    const double scale = sign / std::sqrt(eig.values[idx]);
    for (std::size_t i = 0; i < n; ++i) model.alphas(i, c) = eig.vectors(i, idx) * scale;
    model.eigenvalues.push_back(eig.values[idx]);
  }
  return model;
}

/// Projects one sample: alphas^T k~, with k~_i = k_i - mean(k) - row_mean_i + grand_mean.
inline std::vector<double> project(const SubspaceModel& model, std::span<const double> sample) {
  if (sample.size() != model.dim()) {
    throw DimensionError("project: sample dimension " + std::to_string(sample.size()) +
                         " does not match model dimension " + std::to_string(model.dim()));
  }
  const std::size_t n = model.train_features.rows();
  std::vector<double> k(n);
  for (std::size_t i = 0; i < n; ++i) k[i] = kernel_eval(sample, model.train_features.row(i), model.kernel);
  const double kmean = std::accumulate(k.begin(), k.end(), 0.0) / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) k[i] = k[i] - kmean - model.train_row_means[i] + model.train_grand_mean;

  std::vector<double> out(model.n_components(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += model.alphas(i, c) * k[i];
  }
  return out;
}

// Rows are the projections of the stored training samples.
inline Matrix training_projections(const SubspaceModel& model) {
  const std::size_t n = model.train_features.rows();
  Matrix out(n, model.n_components());
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = project(model, model.train_features.row(i));
    std::copy(p.begin(), p.end(), out.row(i).begin());
  }
  return out;
}

/// Cosine similarity; 0 when either vector has zero norm.
inline double cosine_score(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw DimensionError("cosine_score: dimension " + std::to_string(u.size()) + " vs " +
                         std::to_string(v.size()));
  }
  if (u.empty()) throw DimensionError("cosine_score: empty vectors");
  const double nu = std::sqrt(dot(u, u));
  const double nv = std::sqrt(dot(v, v));
  if (nu == 0.0 || nv == 0.0) return 0.0;
  return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

// ---------------------------------------------------------------------------
// "KPCA1" binary container. All integers and doubles little-endian:
//
//   "KPCA1"                     5 bytes magic
//   u8   kernel kind            0 linear, 1 polynomial, 2 rbf
//   'd'  i64 degree             tagged kernel fields, always all three,
//   'o'  f64 offset             in this order
//   'g'  f64 gamma
//   u64  n, u64 d, u64 m
//   f64  train_features[n*d]    row-major
//   f64  alphas[n*m]            row-major
//   f64  eigenvalues[m]
//   f64  train_row_means[n]
//   f64  train_grand_mean
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_f64(std::vector<std::uint8_t>& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

class ByteReader {
 public:
  // Offsets in errors and pos() are absolute: `base` is where `buf` starts.
  ByteReader(std::span<const std::uint8_t> buf, std::size_t base) : buf_(buf), base_(base) {}

  std::uint8_t u8() {
    need(1);
    return buf_[pos_++];
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf_[pos_++]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  void expect_tag(char tag) {
    const std::size_t at = pos_;
    if (u8() != static_cast<std::uint8_t>(tag)) {
      throw FormatError(std::string("expected kernel field tag '") + tag + "'", base_ + at);
    }
  }
  std::size_t pos() const { return base_ + pos_; }
  bool done() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n) const {
    if (buf_.size() - pos_ < n) throw FormatError("truncated KPCA1 model", base_ + pos_);
  }
  std::span<const std::uint8_t> buf_;
  std::size_t base_ = 0;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<std::uint8_t> save_kpca(const SubspaceModel& m) {
  std::vector<std::uint8_t> out{'K', 'P', 'C', 'A', '1'};
  out.push_back(static_cast<std::uint8_t>(m.kernel.kind));
  out.push_back('d');
  detail::put_u64(out, static_cast<std::uint64_t>(static_cast<std::int64_t>(m.kernel.degree)));
  out.push_back('o');
  detail::put_f64(out, m.kernel.offset);
  out.push_back('g');
  detail::put_f64(out, m.kernel.gamma);
  detail::put_u64(out, m.train_features.rows());
  detail::put_u64(out, m.train_features.cols());
  detail::put_u64(out, m.n_components());
  for (double v : m.train_features.values()) detail::put_f64(out, v);
  for (double v : m.alphas.values()) detail::put_f64(out, v);
  for (double v : m.eigenvalues) detail::put_f64(out, v);
  for (double v : m.train_row_means) detail::put_f64(out, v);
  detail::put_f64(out, m.train_grand_mean);
  return out;
}

inline SubspaceModel load_kpca(std::span<const std::uint8_t> bytes) {
  static constexpr std::uint8_t kMagic[] = {'K', 'P', 'C', 'A', '1'};
  if (bytes.size() < 5 || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
    throw FormatError("bad magic, expected \"KPCA1\"", 0);
  }
  detail::ByteReader in(bytes.subspan(5), 5);
  SubspaceModel m;
  const std::size_t kind_at = in.pos();
  const std::uint8_t kind = in.u8();
  if (kind > 2) throw FormatError("unknown kernel kind " + std::to_string(kind), kind_at);
  m.kernel.kind = static_cast<KernelKind>(kind);
  in.expect_tag('d');
  m.kernel.degree = static_cast<int>(static_cast<std::int64_t>(in.u64()));
  in.expect_tag('o');
  m.kernel.offset = in.f64();
  in.expect_tag('g');
  m.kernel.gamma = in.f64();
  try {
    m.kernel.validate();
  } catch (const ConfigError& e) {
    throw FormatError(e.what(), in.pos());
  }

  const std::uint64_t n = in.u64();
  const std::uint64_t d = in.u64();
  const std::uint64_t k = in.u64();
  const std::uint64_t payload = (n * d + n * k + k + n + 1) * 8;
  if (n == 0 || d == 0 || k > n || n > (1u << 24) || d > (1u << 28) ||
      bytes.size() - in.pos() != payload) {
    throw FormatError("KPCA1 payload size does not match header dimensions", in.pos());
  }
  auto read_vec = [&in](std::size_t count) {
    std::vector<double> v(count);
    for (double& x : v) x = in.f64();
    return v;
  };
  m.train_features = Matrix(n, d, read_vec(n * d));
  m.alphas = Matrix(n, k, read_vec(n * k));
  m.eigenvalues = read_vec(k);
  m.train_row_means = read_vec(n);
  m.train_grand_mean = in.f64();
  return m;
}

}  // namespace facepipe
