// facepipe: command-line front end for the verification pipeline.
//
// Exit codes: 0 success (verify: accept), 2 verify reject, 1 any error.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "facepipe/pipeline.hpp"

namespace fs = std::filesystem;
using namespace facepipe;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitReject = 2;

PipelineConfig load_config(const std::string& path) {
  if (path.empty()) return PipelineConfig{};
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(io::read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return pipeline_config_from_json(doc);
}

double parse_threshold(const std::string& text) {
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  if (text == "inf" || text == "+inf") return std::numeric_limits<double>::infinity();
  try {
    return io::parse_double(text);
  } catch (const Error&) {
    throw ConfigError("threshold must be a number, -inf or inf (got '" + text + "')");
  }
}

std::string summarize_eigenvalues(const std::vector<double>& ev) {
  double total = 0.0;
  for (double v : ev) total += v;
  std::string out = std::to_string(ev.size()) + " components, trace " + io::format_fixed(total, 4) + ", top";
  for (std::size_t i = 0; i < std::min<std::size_t>(5, ev.size()); ++i) out += " " + io::format_fixed(ev[i], 4);
  return out;
}

void flatten(const nlohmann::json& j, const std::string& prefix, std::string& out) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) flatten(v, prefix.empty() ? k : prefix + "." + k, out);
  } else {
    out += "  " + prefix + " = " + j.dump() + "\n";
  }
}

// Help footer listing every config key with its default value.
std::string config_defaults_footer() {
  std::string out = "\nConfig file keys and defaults (JSON; every key optional):\n";
  flatten(to_json(PipelineConfig{}), "", out);
  return out;
}

// ---------------------------------------------------------------------------

int cmd_preprocess(const std::string& in_dir, const std::string& out_dir, const std::string& config_path) {
  const PipelineConfig cfg = load_config(config_path);
  if (!fs::is_directory(in_dir)) throw Error("input directory " + in_dir + " does not exist");
  std::vector<fs::path> inputs;
  for (const auto& entry : fs::directory_iterator(in_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pgm") inputs.push_back(entry.path());
  }
  std::sort(inputs.begin(), inputs.end());
  if (inputs.empty()) throw Error("no .pgm files in " + in_dir);
  fs::create_directories(out_dir);
  for (const auto& path : inputs) {
    const auto t0 = std::chrono::steady_clock::now();
    Image img;
    try {
      img = read_pgm_file(path);
    } catch (const Error& e) {
      throw Error(path.string() + ": " + e.what());
    }
    IntegrationResult status;
    const Image out = preprocess_chain(img, cfg.preprocess, &status);
    write_pgm_file(fs::path(out_dir) / path.filename(), out);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    std::cout << path.filename().string() << ": " << io::format_fixed(ms, 1) << " ms, " << status.iterations
              << " integration sweeps";
    if (!status.converged) std::cout << " (warning: not converged, residual " << io::format_double(status.residual) << ")";
    std::cout << "\n";
  }
  return kExitOk;
}

int cmd_train(const std::string& manifest_path, const std::string& config_path, const std::string& out_dir) {
  const PipelineConfig cfg = load_config(config_path);
  const auto entries = read_manifest(manifest_path);
  std::vector<Image> images;
  std::vector<std::string> labels;
  for (const auto& e : entries) {
    try {
      images.push_back(read_pgm_file(e.image_path));
    } catch (const Error& err) {
      throw Error(e.image_path.string() + ": " + err.what());
    }
    labels.push_back(e.identity_id);
  }
  TrainingSummary summary;
  const TrainedPipeline tp = train_pipeline(images, labels, cfg, &summary);
  save_model(tp, out_dir);

  std::cout << "trained on " << images.size() << " images: " << summary.genuine_pairs << " genuine / "
            << summary.impostor_pairs << " impostor pairs\n";
  for (std::size_t i = 0; i < tp.descriptors.size(); ++i) {
    const auto& c = tp.fusion.classifiers[i];
    std::cout << to_string(tp.descriptors[i]) << ": " << summarize_eigenvalues(summary.eigenvalues[i]) << "\n"
              << "  same N(" << io::format_fixed(c.same.mean) << ", " << io::format_double(c.same.var) << ")"
              << "  diff N(" << io::format_fixed(c.diff.mean) << ", " << io::format_double(c.diff.var) << ")\n";
  }
  std::cout << "model written to " << out_dir << "\n";
  return kExitOk;
}

int cmd_verify(const std::string& model_dir, const std::string& probe, const std::string& gallery,
               const std::string& threshold_text) {
  const double threshold = parse_threshold(threshold_text);
  const TrainedPipeline tp = load_model(model_dir);
  auto load = [](const std::string& path) {
    try {
      return read_pgm_file(path);
    } catch (const Error& e) {
      throw Error(path + ": " + e.what());
    }
  };
  const Image a = load(probe);
  const Image b = load(gallery);
  const auto scores = tp.classifier_scores(tp.embed(a), tp.embed(b));
  for (std::size_t i = 0; i < scores.size(); ++i) {
    std::cout << "score " << to_string(tp.descriptors[i]) << ": " << io::format_fixed(scores[i]) << "\n";
  }
  const double fused = fuse(tp.fusion, scores);
  const Decision d = decide(fused, threshold);
  std::cout << "fused: " << io::format_fixed(fused) << "\n"
            << "threshold: " << threshold_text << "\n"
            << (d == Decision::accept ? "ACCEPT" : "REJECT") << "\n";
  return d == Decision::accept ? kExitOk : kExitReject;
}

int cmd_bench(const std::string& config_path, std::uint64_t seed, const std::string& out_dir) {
  PipelineConfig cfg = load_config(config_path);
  if (seed != 0) cfg.bench = seeded(cfg.bench, seed);
  const BenchmarkReport rep = run_benchmark(cfg);

  const fs::path out(out_dir);
  fs::create_directories(out);
  io::write_atomic(out / "manifest_train.csv", write_dataset(rep.train, out / "train", out));
  io::write_atomic(out / "manifest_test.csv", write_dataset(rep.test, out / "test", out));
  io::write_atomic(out / "scores_pipeline.csv", scores_csv(rep.pipeline.rows));
  io::write_atomic(out / "scores_baseline.csv", scores_csv(rep.baseline.rows));
  io::write_atomic(out / "roc_pipeline.csv", roc_csv(rep.pipeline.curve));
  io::write_atomic(out / "roc_baseline.csv", roc_csv(rep.baseline.curve));
  io::write_atomic(out / "fusion.json", to_json(rep.fusion).dump(2) + "\n");
  io::write_atomic(out / "config.json", to_json(cfg).dump(2) + "\n");
  const std::string summary = rep.summary();
  io::write_atomic(out / "summary.txt", summary);
  std::cout << summary;
  return kExitOk;
}

int cmd_score_eval(const std::string& scores_path, const std::string& roc_out) {
  const auto rows = parse_scores_csv(io::read_text(scores_path));
  const ScoreSet set = fused_score_set(rows);
  std::cout << format_summary(fs::path(scores_path).stem().string(), evaluate(set));
  if (!roc_out.empty()) io::write_atomic(roc_out, roc_csv(roc(set)));
  return kExitOk;
}

int cmd_synth(const std::string& config_path, std::uint64_t seed, const std::string& out_dir) {
  const PipelineConfig cfg = load_config(config_path);
  const Dataset ds = build_dataset(cfg.bench.dataset, seed);
  const fs::path out(out_dir);
  fs::create_directories(out);
  io::write_atomic(out / "manifest.csv", write_dataset(ds, out / "images", out));
  std::cout << ds.samples.size() << " images of " << cfg.bench.dataset.n_ids << " identities written to "
            << out_dir << "\n";
  return kExitOk;
}

int cmd_features(const std::string& image_path, const std::string& config_path) {
  const PipelineConfig cfg = load_config(config_path);
  const Image img = read_pgm_file(image_path);
  std::cout << features_csv(feature_sets(preprocess_chain(img, cfg.preprocess), cfg.feature_selection, cfg.taper));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"facepipe: illumination-insensitive face verification pipeline"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  app.footer("Pipeline parameters come from a JSON config file (--config); run `facepipe config` for the defaults.");

  std::string config_path;
  std::string in_dir;
  std::string out_dir;

  auto* pre = app.add_subcommand("preprocess", "Run the preprocessing chain on every .pgm in a directory");
  pre->add_option("--in", in_dir, "Input directory of PGM files")->required();
  pre->add_option("--out", out_dir, "Output directory (same basenames)")->required();
  pre->add_option("--config", config_path, "Pipeline config JSON (empty: built-in defaults)");

  std::string manifest;
  std::string model_dir = "model";
  auto* train = app.add_subcommand("train", "Fit KPCA subspaces and the fusion model from a manifest");
  train->add_option("--manifest", manifest, "CSV with identity_id,image_path columns")->required();
  train->add_option("--config", config_path, "Pipeline config JSON (empty: built-in defaults)");
  train->add_option("--out", model_dir, "Model output directory");

  std::string probe;
  std::string gallery;
  std::string threshold = "0";
  auto* verify = app.add_subcommand("verify", "Score one probe/gallery pair; exit 0 accept, 2 reject");
  verify->add_option("--model", model_dir, "Model directory written by train");
  verify->add_option("--probe", probe, "Probe PGM")->required();
  verify->add_option("--gallery", gallery, "Gallery PGM")->required();
  verify->add_option("--threshold", threshold, "Accept when fused score >= threshold (number, -inf or inf)");

  std::uint64_t seed = 0;
  std::string bench_out = "bench_out";
  auto* bench = app.add_subcommand("bench", "Run the synthetic benchmark: pipeline vs raw-pixel baseline");
  bench->add_option("--config", config_path, "Pipeline config JSON (empty: built-in defaults)");
  bench->add_option("--seed", seed, "Benchmark seed s >= 1 (train seed 2s-1, test seed 2s); 0 keeps the config seeds");
  bench->add_option("--out", bench_out, "Output directory for manifests, scores, ROC curves and summary");

  std::string scores;
  std::string roc_out;
  auto* score_eval = app.add_subcommand("score-eval", "Evaluate the fused column of a score CSV");
  score_eval->add_option("--scores", scores, "CSV pair_id,label,score_1..score_n,fused")->required();
  score_eval->add_option("--roc-out", roc_out, "Optional far,vr CSV output");

  std::uint64_t synth_seed = 1;
  std::string synth_out = "synth_out";
  auto* synth = app.add_subcommand("synth", "Write one synthetic dataset and its manifest");
  synth->add_option("--config", config_path, "Pipeline config JSON (bench section is used)");
  synth->add_option("--seed", synth_seed, "Dataset seed");
  synth->add_option("--out", synth_out, "Output directory");

  std::string image;
  auto* features = app.add_subcommand("features", "Print the feature vectors of one image as CSV rows");
  features->add_option("--image", image, "Input PGM")->required();
  features->add_option("--config", config_path, "Pipeline config JSON (empty: built-in defaults)");

  auto* config = app.add_subcommand("config", "Print the default pipeline config as JSON");

  for (auto* sub : {pre, train, bench, synth, features}) sub->footer(config_defaults_footer());

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitError;
  }

  try {
    if (*pre) return cmd_preprocess(in_dir, out_dir, config_path);
    if (*train) return cmd_train(manifest, config_path, model_dir);
    if (*verify) return cmd_verify(model_dir, probe, gallery, threshold);
    if (*bench) return cmd_bench(config_path, seed, bench_out);
    if (*score_eval) return cmd_score_eval(scores, roc_out);
    if (*synth) return cmd_synth(config_path, synth_seed, synth_out);
    if (*features) return cmd_features(image, config_path);
    if (*config) {
      std::cout << to_json(PipelineConfig{}).dump(2) << "\n";
      return kExitOk;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
