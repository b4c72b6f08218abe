#pragma once

// Segmentation metrics over a horizon/hood region of interest, PR sweeps and
// per-scene report tables.
//
// Degenerate denominators:
//   IoU = tp / (tp + fp + fn), 1 when pred and gt are both empty
//   F1  = 2 tp / (2 tp + fp + fn), 1 when pred and gt are both empty
//   PRE = tp / (tp + fp); with tp + fp = 0 it is 1 if fn = 0 else 0
//   REC = tp / (tp + fn); with tp + fn = 0 it is 1 if fp = 0 else 0

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "tadap/error.hpp"
#include "tadap/grid.hpp"
#include "tadap/labeler.hpp"

namespace tadap {

/// Rows [first_row, end_row) are evaluated.
struct Roi {
  std::size_t first_row = 0;
  std::size_t end_row = 0;
};

struct CroppedMask {
  PixelMask mask;  // bits outside the ROI cleared
  Roi roi;
};

inline Roi make_roi(std::size_t height, std::size_t horizon_row, std::size_t hood_rows = 0) {
  require(hood_rows <= height && horizon_row < height - hood_rows, Errc::empty_roi,
          "horizon row " + std::to_string(horizon_row) + " and hood rows " + std::to_string(hood_rows) +
              " leave nothing of a " + std::to_string(height) + "-row mask");
  return {horizon_row, height - hood_rows};
}

inline CroppedMask crop_roi(const PixelMask& mask, std::size_t horizon_row, std::size_t hood_rows = 0) {
  CroppedMask out{mask, make_roi(mask.rows(), horizon_row, hood_rows)};
  for (std::size_t r = 0; r < mask.rows(); ++r) {
    if (r >= out.roi.first_row && r < out.roi.end_row) continue;
    for (std::size_t c = 0; c < mask.cols(); ++c) out.mask(r, c) = 0;
  }
  return out;
}

struct ConfusionCounts {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::uint64_t total() const noexcept { return tp + fp + fn + tn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

inline ConfusionCounts confusion(const PixelMask& pred, const PixelMask& gt, const Roi& roi) {
  require(pred.same_shape(gt), Errc::dimension_mismatch, "prediction and ground truth differ in size");
  require(roi.first_row < roi.end_row && roi.end_row <= gt.rows(), Errc::empty_roi, "invalid ROI");
  ConfusionCounts c;
  for (std::size_t r = roi.first_row; r < roi.end_row; ++r)
    for (std::size_t col = 0; col < gt.cols(); ++col) {
      const bool p = pred(r, col) != 0, g = gt(r, col) != 0;
      if (p && g) ++c.tp;
      else if (p) ++c.fp;
      else if (g) ++c.fn;
      else ++c.tn;
    }
  return c;
}

struct Metrics {
  double iou = 1, f1 = 1, precision = 1, recall = 1;
};

inline Metrics metrics(const ConfusionCounts& c) {
  const auto tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp), fn = static_cast<double>(c.fn);
  Metrics m;
  m.iou = c.tp + c.fp + c.fn == 0 ? 1.0 : tp / (tp + fp + fn);
  m.f1 = c.tp + c.fp + c.fn == 0 ? 1.0 : 2.0 * tp / (2.0 * tp + fp + fn);
  m.precision = c.tp + c.fp == 0 ? (c.fn == 0 ? 1.0 : 0.0) : tp / (tp + fp);
  m.recall = c.tp + c.fn == 0 ? (c.fp == 0 ? 1.0 : 0.0) : tp / (tp + fn);
  return m;
}

struct PrSample {
  double threshold = 0;
  double precision = 0;
  double recall = 0;
  ConfusionCounts counts;
};

/// Patch-resolution scores against pixel ground truth; each patch score is
/// applied to its whole pixel block (nearest-neighbour upsampling).
struct ScoredFrame {
  const PatchMap* score = nullptr;
  const PixelMask* gt = nullptr;
};

inline std::vector<double> default_thresholds() {
  std::vector<double> t;
  for (int i = 0; i <= 100; ++i) t.push_back(i / 100.0);
  return t;
}

/// Micro-averaged precision/recall per threshold; a pixel is predicted
/// drivable when its score >= threshold.
inline std::vector<PrSample> pr_curve(const std::vector<ScoredFrame>& frames, const std::vector<double>& thresholds,
                                      std::size_t horizon_row, std::size_t hood_rows = 0) {
  require(!frames.empty() && !thresholds.empty(), Errc::empty_input, "PR curve needs frames and thresholds");
  std::vector<PrSample> out(thresholds.size());
  for (std::size_t k = 0; k < thresholds.size(); ++k) out[k].threshold = thresholds[k];
  for (const auto& f : frames) {
    const PatchMap& s = *f.score;
    const PixelMask& gt = *f.gt;
    require(s.rows() > 0 && gt.rows() % s.rows() == 0 && gt.cols() % s.cols() == 0, Errc::dimension_mismatch,
            "score grid does not tile the ground-truth mask");
    const Roi roi = make_roi(gt.rows(), horizon_row, hood_rows);
    const std::size_t ph = gt.rows() / s.rows(), pw = gt.cols() / s.cols();
    for (std::size_t pr = 0; pr < s.rows(); ++pr)
      for (std::size_t pc = 0; pc < s.cols(); ++pc) {
        std::uint64_t pos = 0, neg = 0;
        for (std::size_t r = std::max(pr * ph, roi.first_row); r < std::min((pr + 1) * ph, roi.end_row); ++r)
          for (std::size_t c = pc * pw; c < (pc + 1) * pw; ++c) (gt(r, c) ? pos : neg) += 1;
        if (pos + neg == 0) continue;
        const double v = s(pr, pc);
        require(std::isfinite(v), Errc::non_finite, "non-finite score");
        for (auto& sample : out) {
          if (v >= sample.threshold) {
            sample.counts.tp += pos;
            sample.counts.fp += neg;
          } else {
            sample.counts.fn += pos;
            sample.counts.tn += neg;
          }
        }
      }
  }
  for (auto& sample : out) {
    const Metrics m = metrics(sample.counts);
    sample.precision = m.precision;
    sample.recall = m.recall;
  }
  return out;
}

/// Exact curve: one sample per distinct score, descending, so every
/// operating point of the scores is present regardless of how they cluster.
inline std::vector<PrSample> pr_curve_exact(const std::vector<ScoredFrame>& frames, std::size_t horizon_row,
                                            std::size_t hood_rows = 0) {
  require(!frames.empty(), Errc::empty_input, "PR curve needs frames");
  struct Entry {
    double score;
    std::uint64_t pos, neg;
  };
  std::vector<Entry> entries;
  std::uint64_t total_pos = 0, total_neg = 0;
  for (const auto& f : frames) {
    const PatchMap& s = *f.score;
    const PixelMask& gt = *f.gt;
    require(s.rows() > 0 && gt.rows() % s.rows() == 0 && gt.cols() % s.cols() == 0, Errc::dimension_mismatch,
            "score grid does not tile the ground-truth mask");
    const Roi roi = make_roi(gt.rows(), horizon_row, hood_rows);
    const std::size_t ph = gt.rows() / s.rows(), pw = gt.cols() / s.cols();
    for (std::size_t pr = 0; pr < s.rows(); ++pr)
      for (std::size_t pc = 0; pc < s.cols(); ++pc) {
        Entry e{s(pr, pc), 0, 0};
        for (std::size_t r = std::max(pr * ph, roi.first_row); r < std::min((pr + 1) * ph, roi.end_row); ++r)
          for (std::size_t c = pc * pw; c < (pc + 1) * pw; ++c) (gt(r, c) ? e.pos : e.neg) += 1;
        if (e.pos + e.neg == 0) continue;
        require(std::isfinite(e.score), Errc::non_finite, "non-finite score");
        total_pos += e.pos;
        total_neg += e.neg;
        entries.push_back(e);
      }
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.score > b.score; });
  std::vector<PrSample> out;
  ConfusionCounts c{0, 0, total_pos, total_neg};
  for (std::size_t i = 0; i < entries.size(); ++i) {
    c.tp += entries[i].pos;
    c.fn -= entries[i].pos;
    c.fp += entries[i].neg;
    c.tn -= entries[i].neg;
    if (i + 1 < entries.size() && entries[i + 1].score == entries[i].score) continue;
    const Metrics m = metrics(c);
    out.push_back({entries[i].score, m.precision, m.recall, c});
  }
  return out;
}

inline void write_pr_csv(std::ostream& out, const std::vector<PrSample>& curve) {
  out << "threshold,precision,recall\n";
  char buf[96];
  for (const auto& s : curve) {
    std::snprintf(buf, sizeof buf, "%.2f,%.10f,%.10f\n", s.threshold, s.precision, s.recall);
    out << buf;
  }
}

struct FrameResult {
  std::string frame_id;
  Scene scene = Scene::suburban;
  ConfusionCounts counts;
};

struct SceneSummary {
  std::size_t frames = 0;
  ConfusionCounts counts;
  Metrics micro;  // from pooled counts
  Metrics macro;  // mean of per-frame metrics
};

struct EvalReport {
  std::map<std::string, SceneSummary> scenes;  // keyed by scene name, plus "all"
  std::string config_fingerprint;
  std::vector<PrSample> pr;
};

inline EvalReport aggregate(const std::vector<FrameResult>& frames, std::string fingerprint = {}) {
  require(!frames.empty(), Errc::empty_input, "no frames to aggregate");
  EvalReport report;
  report.config_fingerprint = std::move(fingerprint);
  std::map<std::string, std::array<double, 4>> macro_sums;
  const auto add = [&](const std::string& key, const FrameResult& f) {
    auto& s = report.scenes[key];
    ++s.frames;
    s.counts += f.counts;
    const Metrics m = metrics(f.counts);
    auto& acc = macro_sums[key];
    acc[0] += m.iou;
    acc[1] += m.f1;
    acc[2] += m.precision;
    acc[3] += m.recall;
  };
  for (Scene s : kScenes) report.scenes[std::string(scene_name(s))];
  for (const auto& f : frames) {
    add("all", f);
    add(std::string(scene_name(f.scene)), f);
  }
  for (auto& [key, s] : report.scenes) {
    if (s.frames == 0) continue;
    s.micro = metrics(s.counts);
    const auto& acc = macro_sums[key];
    const double n = static_cast<double>(s.frames);
    s.macro = {acc[0] / n, acc[1] / n, acc[2] / n, acc[3] / n};
  }
  return report;
}

inline nlohmann::json to_json(const Metrics& m) {
  return {{"iou", m.iou}, {"f1", m.f1}, {"precision", m.precision}, {"recall", m.recall}};
}

inline nlohmann::ordered_json report_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["averaging"] = "micro";
  j["config"] = report.config_fingerprint;
  const auto scene = [&](const std::string& key) {
    const auto& s = report.scenes.at(key);
    nlohmann::ordered_json o;
    o["frames"] = s.frames;
    o["counts"] = {{"tp", s.counts.tp}, {"fp", s.counts.fp}, {"fn", s.counts.fn}, {"tn", s.counts.tn}};
    if (s.frames > 0) {
      o["micro"] = to_json(s.micro);
      o["macro"] = to_json(s.macro);
    } else {
      o["micro"] = nullptr;
      o["macro"] = nullptr;
    }
    return o;
  };
  j["overall"] = scene("all");
  for (Scene s : kScenes) j["scenes"][std::string(scene_name(s))] = scene(std::string(scene_name(s)));
  if (!report.pr.empty()) {
    auto& pr = j["pr_curve"] = nlohmann::ordered_json::array();
    for (const auto& p : report.pr) pr.push_back({{"threshold", p.threshold}, {"precision", p.precision}, {"recall", p.recall}});
  }
  return j;
}

/// Aligned table: one column per scene, metrics in percent.
inline std::string report_text(const EvalReport& report) {
  std::vector<std::string> keys{"all"};
  for (Scene s : kScenes) keys.emplace_back(scene_name(s));
  std::string out;
  char buf[64];
  const auto cell = [&](const std::string& text) {
    std::snprintf(buf, sizeof buf, "%14s", text.c_str());
    out += buf;
  };
  std::snprintf(buf, sizeof buf, "%-8s", "");
  out += buf;
  for (const auto& k : keys) cell(k);
  out += '\n';
  std::snprintf(buf, sizeof buf, "%-8s", "frames");
  out += buf;
  for (const auto& k : keys) cell(std::to_string(report.scenes.at(k).frames));
  out += '\n';
  const char* names[] = {"IoU", "F1", "PRE", "REC"};
  for (int m = 0; m < 4; ++m) {
    std::snprintf(buf, sizeof buf, "%-8s", names[m]);
    out += buf;
    for (const auto& k : keys) {
      const auto& s = report.scenes.at(k);
      if (s.frames == 0) {
        cell("-");
        continue;
      }
      const double v = m == 0 ? s.micro.iou : m == 1 ? s.micro.f1 : m == 2 ? s.micro.precision : s.micro.recall;
      char num[32];
      std::snprintf(num, sizeof num, "%.2f", 100.0 * v);
      cell(num);
    }
    out += '\n';
  }
  return out;
}

}  // namespace tadap
