#pragma once

// Verification metrics: ROC sweep, verification rate at a target false
// acceptance rate, and area under the curve. A pair is accepted when its
// score is >= the threshold, everywhere in this file.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <iterator>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "facepipe/error.hpp"
#include "facepipe/io.hpp"

namespace facepipe {

struct ScoreSet {
  std::vector<double> genuine;   // same-identity pairs
  std::vector<double> impostor;  // different-identity pairs
};

struct RocPoint {
  double far = 0.0;
  double vr = 0.0;
  double threshold = 0.0;

  friend bool operator==(const RocPoint&, const RocPoint&) = default;
};

struct RocCurve {
  std::vector<RocPoint> points;  // far non-decreasing
};

/// Sweeps t over +inf followed by every distinct score, descending, so far is
/// non-decreasing along the curve. The +inf threshold contributes (0, 0).
inline RocCurve roc(const ScoreSet& set) {
  if (set.genuine.empty() || set.impostor.empty()) throw Error("roc: genuine and impostor sets must be non-empty");
  std::vector<double> g = set.genuine;
  std::vector<double> i = set.impostor;
  std::sort(g.begin(), g.end(), std::greater<>());
  std::sort(i.begin(), i.end(), std::greater<>());
  std::vector<double> thresholds;
  thresholds.reserve(g.size() + i.size());
  std::merge(g.begin(), g.end(), i.begin(), i.end(), std::back_inserter(thresholds), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  const auto ng = static_cast<double>(g.size());
  const auto ni = static_cast<double>(i.size());
  RocCurve curve;
  curve.points.reserve(thresholds.size() + 1);
  curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::size_t gi = 0;
  std::size_t ii = 0;
  for (double t : thresholds) {
    while (gi < g.size() && g[gi] >= t) ++gi;
    while (ii < i.size() && i[ii] >= t) ++ii;
    curve.points.push_back({static_cast<double>(ii) / ni, static_cast<double>(gi) / ng, t});
  }
  return curve;
}

/// Largest verification rate among thresholds whose empirical FAR does not
/// exceed `far_target`. No interpolation between operating points.
inline double vr_at_far(const RocCurve& curve, double far_target) {
  if (!(far_target > 0 && far_target <= 1)) throw Error("far_target must lie in (0, 1]");
  double best = 0.0;
  for (const auto& p : curve.points) {
    if (p.far <= far_target) best = std::max(best, p.vr);
  }
  return best;
}

inline double vr_at_far(const ScoreSet& set, double far_target) { return vr_at_far(roc(set), far_target); }

/// Trapezoidal area under (far, vr), clipped to [0, 1].
inline double auc(const RocCurve& curve) {
  double area = 0.0;
  for (std::size_t k = 1; k < curve.points.size(); ++k) {
    const auto& a = curve.points[k - 1];
    const auto& b = curve.points[k];
    area += (b.far - a.far) * (a.vr + b.vr) * 0.5;
  }
  return std::clamp(area, 0.0, 1.0);
}

struct EvalReport {
  std::size_t genuine_pairs = 0;
  std::size_t impostor_pairs = 0;
  std::vector<std::pair<double, double>> vr_at;  // (far target, vr)
  double auc = 0.0;
  std::vector<std::string> warnings;

  double vr(double far_target) const {
    for (const auto& [f, v] : vr_at)
      if (f == far_target) return v;
    throw Error("far target " + io::format_double(far_target) + " was not evaluated");
  }
};

inline constexpr double kReportFarTargets[] = {0.001, 0.01};

/// Evaluates a score set; flags any FAR target finer than 1 / |impostor|.
inline EvalReport evaluate(const ScoreSet& set, std::span<const double> far_targets = kReportFarTargets) {
  const RocCurve curve = roc(set);
  EvalReport rep;
  rep.genuine_pairs = set.genuine.size();
  rep.impostor_pairs = set.impostor.size();
  for (double f : far_targets) {
    rep.vr_at.emplace_back(f, vr_at_far(curve, f));
    if (static_cast<double>(set.impostor.size()) * f < 1.0) {
      rep.warnings.push_back("FAR target " + io::format_double(f) + " is unresolvable with " +
                             std::to_string(set.impostor.size()) + " impostor pairs (needs >= " +
                             std::to_string(static_cast<std::size_t>(std::ceil(1.0 / f))) + ")");
    }
  }
  rep.auc = auc(curve);
  return rep;
}

inline std::string format_summary(const std::string& variant, const EvalReport& rep) {
  std::string out = "[" + variant + "]\n";
  out += "genuine_pairs: " + std::to_string(rep.genuine_pairs) + "\n";
  out += "impostor_pairs: " + std::to_string(rep.impostor_pairs) + "\n";
  for (const auto& [f, v] : rep.vr_at) out += "vr@" + io::format_double(f) + ": " + io::format_fixed(v) + "\n";
  out += "auc: " + io::format_fixed(rep.auc) + "\n";
  for (const auto& w : rep.warnings) out += "warning: " + w + "\n";
  return out;
}

inline std::string roc_csv(const RocCurve& curve) {
  std::string out = "far,vr\n";
  for (const auto& p : curve.points) out += io::format_double(p.far) + "," + io::format_double(p.vr) + "\n";
  return out;
}

// One row of a score file: per-classifier scores plus the fused score.
struct ScoreRow {
  std::string pair_id;
  bool genuine = false;
  std::vector<double> scores;
  double fused = 0.0;
};

inline std::string scores_csv(std::span<const ScoreRow> rows) {
  const std::size_t n = rows.empty() ? 0 : rows.front().scores.size();
  std::string out = "pair_id,label";
  for (std::size_t i = 1; i <= n; ++i) out += ",score_" + std::to_string(i);
  out += ",fused\n";
  for (const auto& r : rows) {
    if (r.scores.size() != n) throw DimensionError("score rows have differing classifier counts");
    out += r.pair_id + (r.genuine ? ",genuine" : ",impostor");
    for (double s : r.scores) out += "," + io::format_double(s);
    out += "," + io::format_double(r.fused) + "\n";
  }
  return out;
}

inline std::vector<ScoreRow> parse_scores_csv(std::string_view text) {
  const auto lines = io::split_lines(text);
  if (lines.empty()) throw Error("score file is empty");
  const auto header = io::split_csv_line(lines.front());
  if (header.size() < 3 || header[0] != "pair_id" || header[1] != "label" || header.back() != "fused") {
    throw Error("score file header must be pair_id,label,score_1,...,score_n,fused");
  }
  const std::size_t n = header.size() - 3;
  std::vector<ScoreRow> rows;
  for (std::size_t l = 1; l < lines.size(); ++l) {
    const auto cells = io::split_csv_line(lines[l]);
    if (cells.size() != header.size()) throw Error("score file line " + std::to_string(l + 1) + ": wrong column count");
    ScoreRow row;
    row.pair_id = cells[0];
    if (cells[1] == "genuine") row.genuine = true;
    else if (cells[1] != "impostor") throw Error("score file line " + std::to_string(l + 1) + ": bad label '" + cells[1] + "'");
    for (std::size_t i = 0; i < n; ++i) row.scores.push_back(io::parse_double(cells[2 + i]));
    row.fused = io::parse_double(cells.back());
    rows.push_back(std::move(row));
  }
  return rows;
}

inline ScoreSet fused_score_set(std::span<const ScoreRow> rows) {
  ScoreSet set;
  for (const auto& r : rows) (r.genuine ? set.genuine : set.impostor).push_back(r.fused);
  return set;
}

}  // namespace facepipe
