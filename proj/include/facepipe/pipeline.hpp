#pragma once

// End-to-end verification pipeline: preprocessing, hybrid Fourier features,
// one KPCA subspace per feature descriptor, cosine classifiers, and Gaussian
// log-likelihood-ratio fusion. Also hosts the synthetic benchmark driver.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "facepipe/error.hpp"
#include "facepipe/fourier.hpp"
#include "facepipe/fusion.hpp"
#include "facepipe/image.hpp"
#include "facepipe/io.hpp"
#include "facepipe/kpca.hpp"
#include "facepipe/preprocess.hpp"
#include "facepipe/roc.hpp"
#include "facepipe/synth.hpp"

namespace facepipe {

// Kernel settings before the feature dimension is known; an empty gamma
// resolves to 1 / d per descriptor.
struct KernelConfig {
  KernelKind kind = KernelKind::rbf;
  int degree = 2;
  double offset = 1.0;
  std::optional<double> gamma;

  KernelSpec resolve(std::size_t dim) const {
    KernelSpec spec{kind, degree, offset, gamma.value_or(1.0 / static_cast<double>(dim))};
    spec.validate();
    return spec;
  }
};

struct BenchmarkConfig {
  DatasetSpec dataset;
  std::uint64_t train_seed = 1;
  std::uint64_t test_seed = 2;
};

/// Benchmark seed s >= 1 maps to train_seed 2s-1 and test_seed 2s, so seed 1
/// is the default pair (1, 2) and different s never share a dataset.
inline BenchmarkConfig seeded(BenchmarkConfig bench, std::uint64_t s) {
  if (s < 1) throw ConfigError("benchmark seed must be >= 1");
  bench.train_seed = 2 * s - 1;
  bench.test_seed = 2 * s;
  return bench;
}

struct PipelineConfig {
  PreprocessConfig preprocess;
  std::vector<FeatureDescriptor> feature_selection = default_descriptors();
  Taper taper = Taper::hann;
  KernelConfig kernel;
  std::size_t n_components = 40;
  BenchmarkConfig bench;

  void validate() const {
    preprocess.validate();
    if (feature_selection.empty()) throw ConfigError("feature_selection must not be empty");
    if (n_components < 1) throw ConfigError("n_components must be >= 1");
    if (kernel.gamma && !(*kernel.gamma > 0)) throw ConfigError("kernel gamma must be > 0");
  }
};

// ---------------------------------------------------------------------------
// JSON configuration. Every key is optional; unknown keys are rejected.
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
void read_key(const nlohmann::json& obj, const char* key, T& out) {
  if (auto it = obj.find(key); it != obj.end()) out = it->get<T>();
}

inline void reject_unknown(const nlohmann::json& obj, std::initializer_list<const char*> known, const char* where) {
  if (!obj.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
  for (const auto& [k, v] : obj.items()) {
    bool ok = false;
    for (const char* name : known) ok = ok || k == name;
    if (!ok) throw ConfigError("unknown key '" + k + "' in " + where);
  }
}

inline nlohmann::json illumination_to_json(const IlluminationSpec& s) {
  return {{"kind", to_string(s.kind)},          {"strength", s.strength},
          {"direction", s.direction},           {"field_sigma", s.field_sigma},
          {"noise_sigma", s.noise_sigma}};
}

inline IlluminationSpec illumination_from_json(const nlohmann::json& j) {
  reject_unknown(j, {"kind", "strength", "direction", "field_sigma", "noise_sigma"}, "illumination entry");
  IlluminationSpec s;
  if (auto it = j.find("kind"); it != j.end()) s.kind = illumination_kind_from_string(it->get<std::string>());
  read_key(j, "strength", s.strength);
  read_key(j, "direction", s.direction);
  read_key(j, "field_sigma", s.field_sigma);
  read_key(j, "noise_sigma", s.noise_sigma);
  s.validate();
  return s;
}

}  // namespace detail

inline nlohmann::json to_json(const PreprocessConfig& p) {
  return {{"gradient_operator", to_string(p.gradient_operator)},
          {"smoothing_sigma", p.smoothing_sigma},
          {"epsilon", p.epsilon},
          {"diffusion_kappa", p.diffusion_kappa},
          {"diffusion_lambda", p.diffusion_lambda},
          {"diffusion_iters", p.diffusion_iters},
          {"integration_iters", p.integration_iters},
          {"integration_tol", p.integration_tol},
          {"equalize_first", p.equalize_first}};
}

inline PreprocessConfig preprocess_from_json(const nlohmann::json& j) {
  detail::reject_unknown(j,
                         {"gradient_operator", "smoothing_sigma", "epsilon", "diffusion_kappa", "diffusion_lambda",
                          "diffusion_iters", "integration_iters", "integration_tol", "equalize_first"},
                         "preprocess");
  PreprocessConfig p;
  if (auto it = j.find("gradient_operator"); it != j.end()) {
    p.gradient_operator = gradient_operator_from_string(it->get<std::string>());
  }
  detail::read_key(j, "smoothing_sigma", p.smoothing_sigma);
  detail::read_key(j, "epsilon", p.epsilon);
  detail::read_key(j, "diffusion_kappa", p.diffusion_kappa);
  detail::read_key(j, "diffusion_lambda", p.diffusion_lambda);
  detail::read_key(j, "diffusion_iters", p.diffusion_iters);
  detail::read_key(j, "integration_iters", p.integration_iters);
  detail::read_key(j, "integration_tol", p.integration_tol);
  detail::read_key(j, "equalize_first", p.equalize_first);
  p.validate();
  return p;
}

inline nlohmann::json to_json(const PipelineConfig& cfg) {
  nlohmann::json selection = nlohmann::json::array();
  for (const auto& d : cfg.feature_selection) selection.push_back(to_string(d));
  nlohmann::json kernel = {{"kind", to_string(cfg.kernel.kind)},
                           {"degree", cfg.kernel.degree},
                           {"offset", cfg.kernel.offset}};
  kernel["gamma"] = cfg.kernel.gamma ? nlohmann::json(*cfg.kernel.gamma) : nlohmann::json("auto");
  nlohmann::json pool = nlohmann::json::array();
  for (const auto& p : cfg.bench.dataset.pool) pool.push_back(detail::illumination_to_json(p));
  return {{"preprocess", to_json(cfg.preprocess)},
          {"feature_selection", selection},
          {"taper", to_string(cfg.taper)},
          {"kernel", kernel},
          {"n_components", cfg.n_components},
          {"bench",
           {{"n_ids", cfg.bench.dataset.n_ids},
            {"imgs_per_id", cfg.bench.dataset.imgs_per_id},
            {"size", cfg.bench.dataset.size},
            {"n_blobs", cfg.bench.dataset.n_blobs},
            {"illumination_pool", pool},
            {"train_seed", cfg.bench.train_seed},
            {"test_seed", cfg.bench.test_seed}}}};
}

inline PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
  PipelineConfig cfg;
  try {
    detail::reject_unknown(j, {"preprocess", "feature_selection", "taper", "kernel", "n_components", "bench"},
                           "config");
    if (auto it = j.find("preprocess"); it != j.end()) cfg.preprocess = preprocess_from_json(*it);
    if (auto it = j.find("feature_selection"); it != j.end()) {
      cfg.feature_selection.clear();
      for (const auto& tag : *it) cfg.feature_selection.push_back(descriptor_from_string(tag.get<std::string>()));
    }
    if (auto it = j.find("taper"); it != j.end()) cfg.taper = taper_from_string(it->get<std::string>());
    if (auto it = j.find("kernel"); it != j.end()) {
      detail::reject_unknown(*it, {"kind", "degree", "offset", "gamma"}, "kernel");
      if (auto k = it->find("kind"); k != it->end()) cfg.kernel.kind = kernel_kind_from_string(k->get<std::string>());
      detail::read_key(*it, "degree", cfg.kernel.degree);
      detail::read_key(*it, "offset", cfg.kernel.offset);
      if (auto g = it->find("gamma"); g != it->end()) {
        if (g->is_string()) {
          if (g->get<std::string>() != "auto") throw ConfigError("kernel gamma must be a number or \"auto\"");
          cfg.kernel.gamma.reset();
        } else {
          cfg.kernel.gamma = g->get<double>();
        }
      }
    }
    detail::read_key(j, "n_components", cfg.n_components);
    if (auto it = j.find("bench"); it != j.end()) {
      detail::reject_unknown(
          *it, {"n_ids", "imgs_per_id", "size", "n_blobs", "illumination_pool", "train_seed", "test_seed"}, "bench");
      auto& ds = cfg.bench.dataset;
      detail::read_key(*it, "n_ids", ds.n_ids);
      detail::read_key(*it, "imgs_per_id", ds.imgs_per_id);
      detail::read_key(*it, "size", ds.size);
      detail::read_key(*it, "n_blobs", ds.n_blobs);
      if (auto p = it->find("illumination_pool"); p != it->end()) {
        ds.pool.clear();
        for (const auto& e : *p) ds.pool.push_back(detail::illumination_from_json(e));
      }
      detail::read_key(*it, "train_seed", cfg.bench.train_seed);
      detail::read_key(*it, "test_seed", cfg.bench.test_seed);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// Training and scoring
// ---------------------------------------------------------------------------

/// Runs fn(i) for i in [0, n) on up to hardware_concurrency threads. Each
/// index must write only its own output slot.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// Per-descriptor subspace coordinates of one image.
using Embedding = std::vector<std::vector<double>>;

struct TrainedPipeline {
  PreprocessConfig preprocess;
  std::vector<FeatureDescriptor> descriptors;
  Taper taper = Taper::hann;
  std::vector<SubspaceModel> subspaces;  // parallel to descriptors
  FusionModel fusion;

  std::vector<FeatureVector> features(const Image& img) const {
    return feature_sets(preprocess_chain(img, preprocess), descriptors, taper);
  }

  Embedding embed(const Image& img) const {
    const auto feats = features(img);
    Embedding out;
    for (std::size_t i = 0; i < feats.size(); ++i) out.push_back(project(subspaces[i], feats[i].values));
    return out;
  }

  std::vector<double> classifier_scores(const Embedding& a, const Embedding& b) const {
    std::vector<double> s;
    for (std::size_t i = 0; i < a.size(); ++i) s.push_back(cosine_score(a[i], b[i]));
    return s;
  }
};

// ---------------------------------------------------------------------------
// Model directory: fusion.json plus one KPCA1 file per descriptor.
// ---------------------------------------------------------------------------

inline constexpr const char* kFusionFile = "fusion.json";

inline std::string model_file_name(const FeatureDescriptor& d) {
  return "kpca_" + to_string(d.domain) + "_" + to_string(d.band) + ".bin";
}

/// fusion.json carries the fusion parameters together with everything needed
/// to recompute features for a new image (descriptor order, taper, preprocess).
inline nlohmann::json model_manifest(const TrainedPipeline& tp) {
  nlohmann::json doc = to_json(tp.fusion);
  nlohmann::json tags = nlohmann::json::array();
  for (const auto& d : tp.descriptors) tags.push_back(to_string(d));
  doc["descriptors"] = tags;
  doc["taper"] = to_string(tp.taper);
  doc["preprocess"] = to_json(tp.preprocess);
  return doc;
}

inline void save_model(const TrainedPipeline& tp, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < tp.descriptors.size(); ++i) {
    io::write_atomic(dir / model_file_name(tp.descriptors[i]), save_kpca(tp.subspaces[i]));
  }
  io::write_atomic(dir / kFusionFile, model_manifest(tp).dump(2) + "\n");
}

inline TrainedPipeline load_model(const std::filesystem::path& dir) {
  TrainedPipeline tp;
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(io::read_text(dir / kFusionFile));
    tp.fusion = fusion_from_json(doc);
    detail::reject_unknown(doc, {"classifiers", "descriptors", "taper", "preprocess"}, "fusion.json");
    for (const auto& tag : doc.at("descriptors")) tp.descriptors.push_back(descriptor_from_string(tag.get<std::string>()));
    tp.taper = taper_from_string(doc.at("taper").get<std::string>());
    tp.preprocess = preprocess_from_json(doc.at("preprocess"));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError((dir / kFusionFile).string() + ": " + e.what());
  }
  if (tp.descriptors.size() != tp.fusion.size()) {
    throw ConfigError("fusion.json lists " + std::to_string(tp.descriptors.size()) + " descriptors for " +
                      std::to_string(tp.fusion.size()) + " classifiers");
  }
  for (const auto& d : tp.descriptors) {
    const auto path = dir / model_file_name(d);
    try {
      tp.subspaces.push_back(load_kpca(io::read_bytes(path)));
    } catch (const Error& e) {
      throw Error(path.string() + ": " + e.what());
    }
  }
  return tp;
}

struct TrainingSummary {
  std::vector<std::vector<double>> eigenvalues;  // per descriptor
  std::size_t genuine_pairs = 0;
  std::size_t impostor_pairs = 0;
};

/// All unordered pairs (i < j) of a labelled set, in lexicographic order.
template <typename Label>
std::vector<std::pair<std::size_t, std::size_t>> all_pairs(const std::vector<Label>& labels) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < labels.size(); ++i)
    for (std::size_t j = i + 1; j < labels.size(); ++j) pairs.emplace_back(i, j);
  return pairs;
}

/// Fits one KPCA per descriptor on the preprocessed training images, scores
/// every training pair with each subspace's cosine classifier, and fits the
/// fusion model on those scores.
template <typename Label>
TrainedPipeline train_pipeline(const std::vector<Image>& images, const std::vector<Label>& labels,
                               const PipelineConfig& cfg, TrainingSummary* summary = nullptr) {
  cfg.validate();
  if (images.size() != labels.size()) throw DimensionError("train_pipeline: images and labels differ in length");
  std::vector<Label> distinct = labels;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 2) throw DegenerateError("need ≥ 2 identities for impostor pairs");
  for (const auto& id : distinct) {
    if (std::count(labels.begin(), labels.end(), id) < 2) {
      throw DegenerateError("need ≥ 2 images per identity for genuine pairs");
    }
  }

  TrainedPipeline tp;
  tp.preprocess = cfg.preprocess;
  tp.descriptors = cfg.feature_selection;
  tp.taper = cfg.taper;

  const std::size_t n = images.size();
  std::vector<std::vector<FeatureVector>> feats(n);
  parallel_for(n, [&](std::size_t i) { feats[i] = tp.features(images[i]); });

  const std::size_t nd = tp.descriptors.size();
  std::vector<Matrix> projections(nd);
  for (std::size_t d = 0; d < nd; ++d) {
    const std::size_t dim = feats[0][d].values.size();
    Matrix x(n, dim);
    for (std::size_t i = 0; i < n; ++i) std::copy(feats[i][d].values.begin(), feats[i][d].values.end(), x.row(i).begin());
    tp.subspaces.push_back(fit_kpca(x, cfg.kernel.resolve(dim), std::min(cfg.n_components, n)));
    projections[d] = training_projections(tp.subspaces.back());
  }

  const auto pairs = all_pairs(labels);
  std::vector<double> same;
  std::vector<double> diff;
  for (const auto& [i, j] : pairs) {
    auto& dst = labels[i] == labels[j] ? same : diff;
    for (std::size_t d = 0; d < nd; ++d) dst.push_back(cosine_score(projections[d].row(i), projections[d].row(j)));
  }
  const std::size_t n_same = same.size() / nd;
  const std::size_t n_diff = diff.size() / nd;
  const Matrix same_m(n_same, nd, std::move(same));
  const Matrix diff_m(n_diff, nd, std::move(diff));
  tp.fusion = fit_fusion(same_m, diff_m);

  if (summary != nullptr) {
    summary->eigenvalues.clear();
    for (const auto& s : tp.subspaces) summary->eigenvalues.push_back(s.eigenvalues);
    summary->genuine_pairs = same_m.rows();
    summary->impostor_pairs = diff_m.rows();
  }
  return tp;
}

// ---------------------------------------------------------------------------
// Synthetic benchmark
// ---------------------------------------------------------------------------

struct VariantResult {
  std::vector<ScoreRow> rows;
  RocCurve curve;
  EvalReport report;
};

struct BenchmarkReport {
  Dataset train;
  Dataset test;
  FusionModel fusion;
  std::vector<FeatureDescriptor> descriptors;
  VariantResult pipeline;
  VariantResult baseline;
  std::vector<double> classifier_auc;  // per descriptor, on the test pairs

  std::string summary() const;
};

inline VariantResult finish_variant(std::vector<ScoreRow> rows) {
  VariantResult v;
  v.rows = std::move(rows);
  v.curve = roc(fused_score_set(v.rows));
  v.report = evaluate(fused_score_set(v.rows));
  return v;
}

inline std::string pair_id(std::size_t i, std::size_t j) { return std::to_string(i) + "-" + std::to_string(j); }

/// Trains on one synthetic dataset and evaluates on an identity-disjoint one,
/// for the full pipeline and a raw-pixel cosine baseline.
inline BenchmarkReport run_benchmark(const PipelineConfig& cfg) {
  cfg.validate();
  if (cfg.bench.train_seed == cfg.bench.test_seed) throw ConfigError("train_seed and test_seed must differ");
  BenchmarkReport rep;
  rep.descriptors = cfg.feature_selection;

  auto stage = [](const char* name, auto&& fn) {
    try {
      return fn();
    } catch (const std::exception& e) {
      throw Error(std::string("benchmark stage '") + name + "' failed: " + e.what());
    }
  };

  rep.train = stage("dataset", [&] { return build_dataset(cfg.bench.dataset, cfg.bench.train_seed); });
  rep.test = stage("dataset", [&] { return build_dataset(cfg.bench.dataset, cfg.bench.test_seed); });

  auto images_of = [](const Dataset& ds) {
    std::vector<Image> out;
    for (const auto& s : ds.samples) out.push_back(s.image);
    return out;
  };
  auto labels_of = [](const Dataset& ds) {
    std::vector<std::size_t> out;
    for (const auto& s : ds.samples) out.push_back(s.identity);
    return out;
  };

  const TrainedPipeline tp =
      stage("train", [&] { return train_pipeline(images_of(rep.train), labels_of(rep.train), cfg); });
  rep.fusion = tp.fusion;

  const auto test_images = images_of(rep.test);
  const auto test_labels = labels_of(rep.test);
  std::vector<Embedding> emb(test_images.size());
  stage("embed", [&] {
    parallel_for(test_images.size(), [&](std::size_t i) { emb[i] = tp.embed(test_images[i]); });
    return 0;
  });

  const auto pairs = all_pairs(test_labels);
  std::vector<ScoreRow> pipe_rows;
  std::vector<ScoreRow> base_rows;
  std::vector<ScoreSet> per_classifier(tp.descriptors.size());
  for (const auto& [i, j] : pairs) {
    const bool genuine = test_labels[i] == test_labels[j];
    ScoreRow row{pair_id(i, j), genuine, tp.classifier_scores(emb[i], emb[j]), 0.0};
    row.fused = fuse(tp.fusion, row.scores);
    for (std::size_t d = 0; d < row.scores.size(); ++d) {
      (genuine ? per_classifier[d].genuine : per_classifier[d].impostor).push_back(row.scores[d]);
    }
    pipe_rows.push_back(std::move(row));

    const double raw = cosine_score(test_images[i].pixels(), test_images[j].pixels());
    base_rows.push_back({pair_id(i, j), genuine, {raw}, raw});
  }
  rep.pipeline = finish_variant(std::move(pipe_rows));
  rep.baseline = finish_variant(std::move(base_rows));
  for (const auto& set : per_classifier) rep.classifier_auc.push_back(auc(roc(set)));
  return rep;
}

inline std::string BenchmarkReport::summary() const {
  std::string out = "# synthetic illumination benchmark\n";
  out += "train_seed: " + std::to_string(train.seed) + "\n";
  out += "test_seed: " + std::to_string(test.seed) + "\n";
  out += "illumination: synthetic stand-in conditions (multiplicative fields + sensor noise)\n\n";
  out += format_summary("pipeline", pipeline.report) + "\n";
  out += format_summary("baseline", baseline.report) + "\n";
  out += "[per-classifier auc]\n";
  for (std::size_t d = 0; d < descriptors.size(); ++d) {
    out += to_string(descriptors[d]) + ": " + io::format_fixed(classifier_auc[d]) + "\n";
  }
  out += "\n[comparison]\n";
  for (const auto& [f, v] : pipeline.report.vr_at) {
    out += "vr@" + io::format_double(f) + " improvement: " + io::format_fixed(v - baseline.report.vr(f)) + "\n";
  }
  return out;
}

}  // namespace facepipe
