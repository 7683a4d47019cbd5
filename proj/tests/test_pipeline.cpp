#include <gtest/gtest.h>

#include <filesystem>
#include <string>
#include <vector>

#include "facepipe/pipeline.hpp"
#include "support.hpp"

using namespace facepipe;

namespace {

struct Small {
  std::vector<Image> images;
  std::vector<std::size_t> labels;
};

Small small_set(std::size_t n_ids, std::size_t per_id, std::uint64_t seed) {
  DatasetSpec spec;
  spec.n_ids = std::max<std::size_t>(n_ids, 2);
  spec.imgs_per_id = std::max<std::size_t>(per_id, 2);
  spec.size = 24;
  spec.pool = {IlluminationSpec{}};
  const Dataset ds = build_dataset(spec, seed);
  Small out;
  for (const auto& s : ds.samples) {
    if (s.identity >= n_ids) continue;
    if (std::count(out.labels.begin(), out.labels.end(), s.identity) >= static_cast<std::ptrdiff_t>(per_id)) continue;
    out.images.push_back(s.image);
    out.labels.push_back(s.identity);
  }
  return out;
}

PipelineConfig small_config() {
  PipelineConfig cfg;
  cfg.n_components = 6;
  return cfg;
}

}  // namespace

TEST(Config, DefaultsRoundTrip) {
  const PipelineConfig cfg;
  const auto j = to_json(cfg);
  EXPECT_EQ(j.at("kernel").at("gamma"), "auto");
  EXPECT_EQ(j.at("taper"), "hann");
  EXPECT_EQ(j.at("n_components"), 40);
  EXPECT_EQ(j.at("feature_selection").size(), 6u);
  EXPECT_EQ(to_json(pipeline_config_from_json(j)), j);
}

TEST(Config, CustomValuesRoundTrip) {
  PipelineConfig cfg;
  cfg.kernel.kind = KernelKind::polynomial;
  cfg.kernel.degree = 3;
  cfg.kernel.gamma = 0.25;
  cfg.taper = Taper::none;
  cfg.feature_selection = {{SpectralDomain::magnitude, FrequencyBand::mid}};
  cfg.preprocess.diffusion_iters = 7;
  cfg.bench.dataset.pool = {IlluminationSpec{IlluminationKind::linear_ramp, 0.3, 1.2, 16.0, 0.01, 0}};
  cfg.bench.train_seed = 9;
  cfg.bench.test_seed = 10;
  const auto j = to_json(cfg);
  const auto back = pipeline_config_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(to_json(back), j);
  EXPECT_EQ(back.kernel.gamma, 0.25);
  EXPECT_EQ(back.bench.dataset.pool[0].kind, IlluminationKind::linear_ramp);
}

TEST(Config, PartialDocumentKeepsDefaults) {
  const auto cfg = pipeline_config_from_json(nlohmann::json::parse(R"({"n_components": 12})"));
  EXPECT_EQ(cfg.n_components, 12u);
  EXPECT_EQ(cfg.taper, Taper::hann);
  EXPECT_EQ(cfg.feature_selection, default_descriptors());
}

TEST(Config, RejectsUnknownAndMalformed) {
  for (const char* doc : {R"({"n_component": 4})", R"({"kernel": {"sigma": 1}})", R"({"bench": {"seed": 1}})",
                          R"({"preprocess": {"kappa": 1}})", R"({"kernel": {"gamma": "big"}})",
                          R"({"feature_selection": ["phase:low"]})", R"({"n_components": "many"})",
                          R"({"bench": {"illumination_pool": [{"kind": "strobe"}]}})", R"([1, 2])"}) {
    EXPECT_THROW(pipeline_config_from_json(nlohmann::json::parse(doc)), ConfigError) << doc;
  }
}

TEST(Train, RejectsTooFewIdentitiesOrImages) {
  const Small s = small_set(3, 2, 1);
  const std::vector<std::size_t> one_id(s.images.size(), 0);
  EXPECT_THROW(train_pipeline(s.images, one_id, small_config()), DegenerateError);
  std::vector<std::size_t> singleton = s.labels;
  singleton.back() = 99;
  EXPECT_THROW(train_pipeline(s.images, singleton, small_config()), DegenerateError);
  EXPECT_THROW(train_pipeline(s.images, std::vector<std::size_t>{0, 1}, small_config()), DimensionError);
}

TEST(Train, SummaryCountsPairs) {
  const Small s = small_set(3, 3, 2);
  TrainingSummary summary;
  const auto tp = train_pipeline(s.images, s.labels, small_config(), &summary);
  EXPECT_EQ(summary.genuine_pairs, 9u);
  EXPECT_EQ(summary.impostor_pairs, 27u);
  ASSERT_EQ(summary.eigenvalues.size(), 6u);
  ASSERT_EQ(tp.subspaces.size(), 6u);
  for (const auto& ev : summary.eigenvalues) {
    EXPECT_LE(ev.size(), 6u);
    for (std::size_t i = 1; i < ev.size(); ++i) EXPECT_GE(ev[i - 1], ev[i]);
  }
}

TEST(Train, ComponentsCappedByTrainingSize) {
  const Small s = small_set(2, 2, 3);
  PipelineConfig cfg;
  cfg.n_components = 40;
  const auto tp = train_pipeline(s.images, s.labels, cfg);
  for (const auto& sub : tp.subspaces) EXPECT_LE(sub.n_components(), 4u);
}

TEST(Train, Deterministic) {
  const Small s = small_set(3, 2, 4);
  const auto a = train_pipeline(s.images, s.labels, small_config());
  const auto b = train_pipeline(s.images, s.labels, small_config());
  EXPECT_EQ(a.subspaces, b.subspaces);
  EXPECT_EQ(a.fusion, b.fusion);
}

TEST(Model, SaveLoadIsBitIdentical) {
  const Small s = small_set(3, 2, 5);
  const auto tp = train_pipeline(s.images, s.labels, small_config());
  const auto dir = fixtures::scratch_dir("model");
  save_model(tp, dir);
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir)) ++files;
  EXPECT_EQ(files, 7u);
  const auto back = load_model(dir);
  EXPECT_EQ(back.subspaces, tp.subspaces);
  EXPECT_EQ(back.fusion, tp.fusion);
  EXPECT_EQ(back.descriptors, tp.descriptors);
  EXPECT_EQ(back.taper, tp.taper);
  EXPECT_EQ(to_json(back.preprocess), to_json(tp.preprocess));

  const auto a = tp.embed(s.images[0]);
  const auto b = back.embed(s.images[1]);
  const auto lhs = fuse(tp.fusion, tp.classifier_scores(a, tp.embed(s.images[1])));
  const auto rhs = fuse(back.fusion, back.classifier_scores(back.embed(s.images[0]), b));
  EXPECT_EQ(lhs, rhs);

  const auto again = fixtures::scratch_dir("model_again");
  save_model(back, again);
  for (const auto& d : tp.descriptors) {
    EXPECT_EQ(io::read_bytes(dir / model_file_name(d)), io::read_bytes(again / model_file_name(d)));
  }
  EXPECT_EQ(io::read_text(dir / kFusionFile), io::read_text(again / kFusionFile));
}

TEST(Model, LoadErrorsNameTheFile) {
  const Small s = small_set(2, 2, 6);
  const auto tp = train_pipeline(s.images, s.labels, small_config());
  const auto dir = fixtures::scratch_dir("model_broken");
  save_model(tp, dir);
  const auto victim = dir / model_file_name(tp.descriptors[2]);
  auto bytes = io::read_bytes(victim);
  bytes[0] = 'X';
  io::write_atomic(victim, bytes);
  try {
    load_model(dir);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find(victim.filename().string()), std::string::npos) << e.what();
  }
  std::filesystem::remove(victim);
  EXPECT_THROW(load_model(dir), Error);
  EXPECT_THROW(load_model(fixtures::scratch_dir("model_empty")), Error);
}

TEST(Model, GenuinePairsOutscoreImpostorsOnTraining) {
  const Small s = small_set(4, 3, 7);
  const auto tp = train_pipeline(s.images, s.labels, small_config());
  std::vector<Embedding> emb;
  for (const auto& img : s.images) emb.push_back(tp.embed(img));
  ScoreSet set;
  for (const auto& [i, j] : all_pairs(s.labels)) {
    const double f = fuse(tp.fusion, tp.classifier_scores(emb[i], emb[j]));
    (s.labels[i] == s.labels[j] ? set.genuine : set.impostor).push_back(f);
  }
  EXPECT_GT(auc(roc(set)), 0.9);
}
