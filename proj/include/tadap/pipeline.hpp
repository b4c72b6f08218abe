#pragma once

// Directory-level commands behind the command-line tool.
//
// Dataset conventions:
//   frames.csv          frame,timestamp,scene   (header line required)
//   images/<frame>.png  RGB
//   features/<frame>.tdfg
//   gnss.csv, boxes.jsonl, calibration.txt
//   split files         one frame id per line
// Label/prediction output: <frame>.png mask, <frame>.json diagnostics,
// skipped.json listing frames that produced no mask.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "tadap/boxes.hpp"
#include "tadap/calibration.hpp"
#include "tadap/config.hpp"
#include "tadap/eval.hpp"
#include "tadap/features.hpp"
#include "tadap/gnss_log.hpp"
#include "tadap/head.hpp"
#include "tadap/image_io.hpp"
#include "tadap/labeler.hpp"
#include "tadap/synth.hpp"
#include "tadap/trajectory.hpp"

namespace tadap {

namespace fs = std::filesystem;

class Logger {
 public:
  explicit Logger(LogLevel level = LogLevel::info, std::ostream& out = std::cerr) : level_(level), out_(&out) {}

  void log(LogLevel level, const std::string& msg) {
    if (level > level_) return;
    static constexpr const char* names[] = {"error", "warn", "info", "debug"};
    std::lock_guard lock(mutex_);
    *out_ << "[" << names[static_cast<int>(level)] << "] " << msg << '\n';
  }
  void error(const std::string& m) { log(LogLevel::error, m); }
  void warn(const std::string& m) { log(LogLevel::warn, m); }
  void info(const std::string& m) { log(LogLevel::info, m); }
  void debug(const std::string& m) { log(LogLevel::debug, m); }

 private:
  LogLevel level_;
  std::ostream* out_;
  std::mutex mutex_;
};

struct FrameEntry {
  std::string id;
  double timestamp = 0;
  Scene scene = Scene::suburban;
};

inline std::vector<FrameEntry> read_frames(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), Errc::io, "cannot open frame index " + path);
  std::vector<FrameEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 || line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    FrameEntry e;
    std::string scene;
    if (!(fields >> e.id >> e.timestamp >> scene))
      throw Error(Errc::parse, path + " line " + std::to_string(lineno) + ": expected frame,timestamp,scene");
    e.scene = parse_scene(scene);
    out.push_back(e);
  }
  return out;
}

inline std::vector<std::string> read_split(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), Errc::io, "cannot open split file " + path);
  std::vector<std::string> ids;
  for (std::string line; std::getline(in, line);) {
    const std::string id = detail::trim(line);
    if (!id.empty() && id[0] != '#') ids.push_back(id);
  }
  return ids;
}

/// Trajectory sample for a frame: closest GNSS pose, future window, arc
/// fit, corridor, vehicle-box removal and patch reduction. Poses are taken
/// to ENU about the frame's own pose.
inline PatchMask trajectory_sample(const std::vector<GeodeticPose>& log, double frame_time, const Calibration& cal,
                                   const std::vector<BoundingBox>& boxes, std::size_t width, std::size_t height,
                                   const LabelConfig& label, const TrajectoryConfig& traj, PixelMask* corridor = nullptr) {
  require(!log.empty(), Errc::insufficient_trajectory, "empty GNSS log");
  auto it = std::lower_bound(log.begin(), log.end(), frame_time,
                             [](const GeodeticPose& p, double t) { return p.timestamp < t; });
  std::size_t idx = static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - log.begin(), static_cast<std::ptrdiff_t>(log.size()) - 1));
  if (idx > 0 && std::abs(log[idx - 1].timestamp - frame_time) <= std::abs(log[idx].timestamp - frame_time)) --idx;
  require(std::abs(log[idx].timestamp - frame_time) <= traj.time_tolerance, Errc::insufficient_trajectory,
          "no GNSS pose within " + std::to_string(traj.time_tolerance) + " s of the frame");
  const GeodeticPose& origin = log[idx];
  std::vector<EnuPose> enu;
  double length = 0.0;
  for (std::size_t i = idx; i < log.size(); ++i) {
    enu.push_back(geodetic_to_enu(log[i], origin));
    if (enu.size() > 1) length += std::hypot(enu.back().x - enu[enu.size() - 2].x, enu.back().y - enu[enu.size() - 2].y);
    if (length >= traj.horizon_m) break;
  }
  const auto window = window_future_poses(enu, origin.timestamp, traj.horizon_m, traj.min_length_m);
  const ArcModel arc = fit_arc(window);
  PixelMask mask = rasterize_corridor(arc, cal.homography, enu.front(), cal.vehicle_width, width, height,
                                      label.horizon_for(height));
  mask = remove_vehicle_boxes(std::move(mask), boxes, traj.min_box_confidence);
  if (corridor) *corridor = mask;
  return mask_to_patch_grid(mask, label.patch_size, label.coverage);
}

namespace detail {

inline nlohmann::json grid_json(const PatchMap& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline PatchMap grid_from_json(const nlohmann::json& j) {
  require(j.is_array() && !j.empty() && j[0].is_array(), Errc::parse, "score grid must be a 2-D array");
  PatchMap m(j.size(), j[0].size());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    require(j[r].size() == m.cols(), Errc::parse, "ragged score grid");
    for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), Errc::io, "cannot create " + path.string());
  out << text;
  require(static_cast<bool>(out), Errc::io, "failed writing " + path.string());
}

/// Runs `work(i)` for i in [0, n) on up to `workers` threads.
template <class F>
void parallel_for(std::size_t n, unsigned workers, F&& work) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(n, 1)));
  std::atomic<std::size_t> next{0};
  const auto run = [&] {
    for (std::size_t i = next++; i < n; i = next++) work(i);
  };
  if (workers <= 1) {
    run();
    return;
  }
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run);
  for (auto& t : pool) t.join();
}

inline std::string label_fingerprint(const LabelConfig& c) {
  char buf[400];
  std::snprintf(buf, sizeof buf,
                "threshold=%.17g;iterations=%d;crf=%d;second_sample=%s;patch=%zu;coverage=%.17g;a=%.17g;b=%.17g;"
                "ta=%.17g;tb=%.17g;tg=%.17g;crf_iterations=%d;eps=%.17g",
                c.threshold, c.iterations, c.use_crf ? 1 : 0, c.second_sample == SecondSample::crf ? "crf" : "threshold",
                c.patch_size, c.coverage, c.crf.appearance_weight, c.crf.smoothness_weight, c.crf.theta_alpha,
                c.crf.theta_beta, c.crf.theta_gamma, c.crf.iterations, c.crf.epsilon);
  return buf;
}

}  // namespace detail

inline nlohmann::ordered_json diagnostics_json(const LabelDiagnostics& d) {
  nlohmann::ordered_json j;
  j["frame"] = d.frame_id;
  j["scene"] = scene_name(d.scene);
  j["iterations_run"] = d.iterations_run;
  j["crf_applied"] = d.crf_applied;
  j["patches"] = {{"trajectory", d.trajectory_patches},
                  {"baseline", d.baseline_patches},
                  {"second_sample", d.second_sample_patches},
                  {"final", d.final_patches}};
  j["drivable_pixels"] = d.drivable_pixels;
  j["zero_norm_patches"] = d.zero_norm_patches;
  j["warnings"] = d.warnings;
  j["baseline_score"] = detail::grid_json(d.baseline_map);
  j["score"] = detail::grid_json(d.final_map);
  return j;
}

struct LabelRunSummary {
  std::size_t labeled = 0;
  std::size_t skipped = 0;
};

/// Labels every frame in the index. Per-frame failures become entries of
/// skipped.json; configuration and I/O problems with shared inputs throw.
inline LabelRunSummary cmd_label(const RunConfig& cfg, bool dry_run, Logger& log) {
  const auto& p = cfg.paths;
  for (const auto& [name, path] : {std::pair{"images", p.images}, {"features", p.features}, {"gnss", p.gnss},
                                   {"calibration", p.calibration}, {"frames", p.frames}})
    require(!path.empty() && fs::exists(path), Errc::config, std::string(name) + " path '" + path + "' does not exist");
  require(p.boxes.empty() || fs::exists(p.boxes), Errc::config, "boxes path '" + p.boxes + "' does not exist");
  require(dry_run || !p.output.empty(), Errc::config, "no output directory configured");
  cfg.label.validate();

  const Calibration cal = read_calibration(p.calibration);
  const auto gnss = read_gnss_log(p.gnss);
  const auto frames = read_frames(p.frames);
  const auto boxes = p.boxes.empty() ? std::map<std::string, std::vector<BoundingBox>>{} : group_by_frame(read_boxes(p.boxes));
  log.info("loaded " + std::to_string(frames.size()) + " frames, " + std::to_string(gnss.size()) + " GNSS poses");
  if (dry_run) {
    std::size_t missing = 0;
    for (const auto& f : frames) {
      const bool ok = fs::exists(fs::path(p.images) / (f.id + ".png")) && fs::exists(fs::path(p.features) / (f.id + ".tdfg"));
      if (!ok) {
        ++missing;
        log.warn("frame " + f.id + ": missing image or feature file");
      }
    }
    log.info("dry run: " + std::to_string(frames.size() - missing) + " frames ready, " + std::to_string(missing) + " incomplete");
    return {0, missing};
  }
  fs::create_directories(p.output);

  std::vector<std::string> skip_reason(frames.size());
  std::vector<char> done(frames.size(), 0);
  detail::parallel_for(frames.size(), cfg.workers, [&](std::size_t i) {
    const FrameEntry& f = frames[i];
    try {
      const fs::path image_path = fs::path(p.images) / (f.id + ".png");
      const fs::path feature_path = fs::path(p.features) / (f.id + ".tdfg");
      require(fs::exists(feature_path), Errc::io, "no feature file");
      require(fs::exists(image_path), Errc::io, "no image file");
      FrameBundle b;
      b.frame_id = f.id;
      b.scene = f.scene;
      b.image = read_rgb_png(image_path.string());
      b.features = load_feature_grid(feature_path.string());
      if (const auto it = boxes.find(f.id); it != boxes.end()) b.boxes = it->second;
      b.trajectory = trajectory_sample(gnss, f.timestamp, cal, b.boxes, b.image.width, b.image.height, cfg.label,
                                       cfg.trajectory);
      const FrameLabel result = tadap_label(b, cfg.label);
      write_mask_png((fs::path(p.output) / (f.id + ".png")).string(), result.mask);
      detail::write_text(fs::path(p.output) / (f.id + ".json"), diagnostics_json(result.diagnostics).dump(1) + "\n");
      done[i] = 1;
      log.debug("frame " + f.id + ": " + std::to_string(result.diagnostics.drivable_pixels) + " drivable pixels");
    } catch (const std::exception& e) {
      skip_reason[i] = e.what();
      log.warn("frame " + f.id + " skipped: " + e.what());
    }
  });

  nlohmann::ordered_json skipped = nlohmann::ordered_json::array();
  LabelRunSummary summary;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (done[i]) {
      ++summary.labeled;
    } else {
      ++summary.skipped;
      skipped.push_back({{"frame", frames[i].id}, {"reason", skip_reason[i]}});
    }
  }
  detail::write_text(fs::path(p.output) / "skipped.json", skipped.dump(1) + "\n");
  return summary;
}

/// Evaluates `pred_dir` against `gt_dir` for every frame in the index.
/// Returns the number of frames that were missing a prediction or ground
/// truth; in strict mode any missing frame throws before reports are written.
inline std::size_t cmd_eval(const RunConfig& cfg, const std::string& pred_dir, const std::string& gt_dir,
                            const std::string& out_dir, Logger& log, EvalReport* report_out = nullptr) {
  require(fs::is_directory(pred_dir), Errc::config, "prediction directory '" + pred_dir + "' does not exist");
  require(fs::is_directory(gt_dir), Errc::config, "ground-truth directory '" + gt_dir + "' does not exist");
  const auto frames = read_frames(cfg.paths.frames);
  std::vector<FrameResult> results;
  std::vector<PatchMap> scores;
  std::vector<PixelMask> score_gts;
  std::vector<std::string> missing;
  for (const auto& f : frames) {
    const fs::path pred = fs::path(pred_dir) / (f.id + ".png");
    const fs::path gt = fs::path(gt_dir) / (f.id + ".png");
    if (!fs::exists(pred) || !fs::exists(gt)) {
      missing.push_back(f.id);
      continue;
    }
    const PixelMask pm = read_mask_png(pred.string());
    const PixelMask gm = read_mask_png(gt.string(), cfg.eval.strict_masks);
    const Roi roi = make_roi(gm.rows(), cfg.label.horizon_for(gm.rows()), cfg.eval.hood_rows);
    results.push_back({f.id, f.scene, confusion(pm, gm, roi)});
    const fs::path diag = fs::path(pred_dir) / (f.id + ".json");
    if (fs::exists(diag)) {
      std::ifstream in(diag);
      const auto j = nlohmann::json::parse(in, nullptr, false);
      if (!j.is_discarded() && j.contains("score")) {
        scores.push_back(detail::grid_from_json(j["score"]));
        score_gts.push_back(gm);
      }
    }
  }
  for (const auto& id : missing) log.warn("frame " + id + ": missing prediction or ground truth, excluded");
  require(!cfg.eval.strict || missing.empty(), Errc::io,
          std::to_string(missing.size()) + " frame(s) lack a prediction or ground truth (strict mode)");
  EvalReport report = aggregate(results, detail::label_fingerprint(cfg.label));
  if (!scores.empty() && scores.size() == results.size()) {
    std::vector<ScoredFrame> sf;
    for (std::size_t i = 0; i < scores.size(); ++i) sf.push_back({&scores[i], &score_gts[i]});
    const std::size_t horizon = cfg.label.horizon_for(score_gts.front().rows());
    report.pr = pr_curve(sf, default_thresholds(), horizon, cfg.eval.hood_rows);
  }
  fs::create_directories(out_dir);
  detail::write_text(fs::path(out_dir) / "report.json", report_json(report).dump(2) + "\n");
  detail::write_text(fs::path(out_dir) / "report.txt", report_text(report));
  if (!report.pr.empty()) {
    std::ostringstream csv;
    write_pr_csv(csv, report.pr);
    detail::write_text(fs::path(out_dir) / "pr.csv", csv.str());
  }
  if (report_out) *report_out = report;
  return missing.size();
}

/// Trains the head on label masks of `train_split` and selects the epoch by
/// IoU against ground truth of `val_split`.
inline HeadWeights cmd_train_head(const RunConfig& cfg, const std::string& label_dir, const std::string& train_split,
                                  const std::string& val_split, const std::string& weights_path, Logger& log,
                                  TrainingHistory* history = nullptr) {
  const auto load = [&](const std::vector<std::string>& ids, const std::string& mask_dir, std::vector<FeatureGrid>& grids,
                        std::vector<PatchMask>& masks) {
    for (const auto& id : ids) {
      const fs::path mask_path = fs::path(mask_dir) / (id + ".png");
      if (!fs::exists(mask_path)) {
        log.warn("frame " + id + ": no mask in " + mask_dir + ", not used for training");
        continue;
      }
      grids.push_back(load_feature_grid((fs::path(cfg.paths.features) / (id + ".tdfg")).string()));
      masks.push_back(mask_to_patch_grid(read_mask_png(mask_path.string()), cfg.label.patch_size, cfg.label.coverage));
    }
  };
  require(!cfg.paths.ground_truth.empty(), Errc::config, "no ground-truth directory configured for validation");
  std::vector<FeatureGrid> tg, vg;
  std::vector<PatchMask> tm, vm;
  load(read_split(train_split), label_dir, tg, tm);
  load(read_split(val_split), cfg.paths.ground_truth, vg, vm);
  std::vector<std::pair<const FeatureGrid*, const PatchMask*>> train, val;
  for (std::size_t i = 0; i < tg.size(); ++i) train.emplace_back(&tg[i], &tm[i]);
  for (std::size_t i = 0; i < vg.size(); ++i) val.emplace_back(&vg[i], &vm[i]);
  TrainConfig tc = cfg.train;
  tc.patch_size = cfg.label.patch_size;
  if (!tg.empty()) tc.horizon_row = cfg.label.horizon_for(tg.front().rows() * cfg.label.patch_size);
  log.info("training head on " + std::to_string(train.size()) + " frames, validating on " + std::to_string(val.size()));
  const HeadWeights w = train_head(train, val, tc, history);
  log.info("best epoch " + std::to_string(w.epoch) + ", validation IoU " + std::to_string(w.validation_iou));
  if (!weights_path.empty()) save_head(weights_path, w);
  return w;
}

/// Head predictions for the frames of `split` (all indexed frames if empty).
inline std::size_t cmd_predict(const RunConfig& cfg, const HeadWeights& w, const std::string& split, bool refine,
                               const std::string& out_dir, Logger& log) {
  std::vector<std::string> ids;
  if (split.empty()) {
    for (const auto& f : read_frames(cfg.paths.frames)) ids.push_back(f.id);
  } else {
    ids = read_split(split);
  }
  fs::create_directories(out_dir);
  std::vector<char> ok(ids.size(), 0);
  detail::parallel_for(ids.size(), cfg.workers, [&](std::size_t i) {
    const auto& id = ids[i];
    try {
      const FeatureGrid grid = load_feature_grid((fs::path(cfg.paths.features) / (id + ".tdfg")).string());
      const Prediction pred = predict(grid, w);
      const std::size_t height = grid.rows() * cfg.label.patch_size, width = grid.cols() * cfg.label.patch_size;
      PixelMask mask;
      if (refine) {
        const RgbImage image = read_rgb_png((fs::path(cfg.paths.images) / (id + ".png")).string());
        require(image.height == height && image.width == width, Errc::dimension_mismatch, "image does not match features");
        mask = predict_refined(grid, w, image, cfg.label.crf, cfg.label.horizon_for(height));
      } else {
        mask = upsample_nearest(pred.mask, height, width);
        clear_above(mask, cfg.label.horizon_for(height));
      }
      write_mask_png((fs::path(out_dir) / (id + ".png")).string(), mask);
      nlohmann::ordered_json j;
      j["frame"] = id;
      j["refined"] = refine;
      j["score"] = detail::grid_json(pred.probability);
      detail::write_text(fs::path(out_dir) / (id + ".json"), j.dump(1) + "\n");
      ok[i] = 1;
    } catch (const std::exception& e) {
      log.warn("frame " + id + " not predicted: " + e.what());
    }
  });
  return static_cast<std::size_t>(std::count(ok.begin(), ok.end(), 1));
}

/// Alpha-blends `tint` over drivable pixels.
inline RgbImage overlay(const RgbImage& image, const PixelMask& mask, double alpha,
                        std::array<std::uint8_t, 3> tint = {0, 255, 0}) {
  require(image.height == mask.rows() && image.width == mask.cols(), Errc::dimension_mismatch,
          "mask and image differ in size");
  require(alpha >= 0 && alpha <= 1, Errc::invalid_argument, "alpha must lie in [0, 1]");
  RgbImage out = image;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    for (std::size_t k = 0; k < 3; ++k) {
      const double v = (1.0 - alpha) * image.rgb[3 * i + k] + alpha * tint[k];
      out.rgb[3 * i + k] = static_cast<std::uint8_t>(std::lround(v));
    }
  }
  return out;
}

inline std::size_t cmd_overlay(const std::string& image_dir, const std::string& mask_dir, const std::string& out_dir,
                               double alpha, Logger& log) {
  require(fs::is_directory(image_dir) && fs::is_directory(mask_dir), Errc::config, "image or mask directory missing");
  fs::create_directories(out_dir);
  std::vector<fs::path> masks;
  for (const auto& e : fs::directory_iterator(mask_dir))
    if (e.path().extension() == ".png") masks.push_back(e.path());
  std::sort(masks.begin(), masks.end());
  std::size_t written = 0;
  for (const auto& m : masks) {
    const fs::path img = fs::path(image_dir) / m.filename();
    if (!fs::exists(img)) {
      log.warn(m.filename().string() + ": no matching image");
      continue;
    }
    try {
      write_rgb_png((fs::path(out_dir) / m.filename()).string(),
                    overlay(read_rgb_png(img.string()), read_mask_png(m.string()), alpha));
      ++written;
    } catch (const Error& e) {
      log.warn(m.filename().string() + ": " + e.what());
    }
  }
  return written;
}

}  // namespace tadap
