#pragma once

// Per-frame labeling: trajectory-similarity baseline, second-iteration
// update and optional CRF refinement.

#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tadap/boxes.hpp"
#include "tadap/crf.hpp"
#include "tadap/error.hpp"
#include "tadap/features.hpp"
#include "tadap/grid.hpp"
#include "tadap/trajectory.hpp"

namespace tadap {

enum class Scene { suburban, highway, countryside, intersection };

inline constexpr Scene kScenes[] = {Scene::suburban, Scene::highway, Scene::countryside, Scene::intersection};

constexpr std::string_view scene_name(Scene s) {
  switch (s) {
    case Scene::suburban: return "suburban";
    case Scene::highway: return "highway";
    case Scene::countryside: return "countryside";
    case Scene::intersection: return "intersection";
  }
  return "?";
}

inline Scene parse_scene(std::string_view name) {
  for (Scene s : kScenes)
    if (scene_name(s) == name) return s;
  throw Error(Errc::unknown_scene, "unknown scene tag '" + std::string(name) + "'");
}

/// Which mask seeds the second similarity pass.
enum class SecondSample {
  threshold,  // thresholded first-pass similarity map
  crf,        // CRF-refined first-pass mask, reduced to patches by majority
};

struct LabelConfig {
  double threshold = 0.5;
  int iterations = 2;
  bool use_crf = true;
  CrfParams crf;
  /// Pixel row of the horizon crop; unset means 0.375 * image height.
  std::optional<std::size_t> horizon_row;
  std::size_t patch_size = 14;
  double coverage = 0.5;
  SecondSample second_sample = SecondSample::threshold;
  /// Search for the normalising maximum only below the horizon crop.
  bool fmax_below_horizon = false;

  void validate() const {
    require(threshold > 0 && threshold < 1, Errc::invalid_argument, "threshold must lie in (0, 1)");
    require(iterations == 1 || iterations == 2, Errc::invalid_argument, "iterations must be 1 or 2");
    require(patch_size > 0, Errc::invalid_argument, "patch size must be positive");
    require(coverage > 0 && coverage <= 1, Errc::invalid_argument, "coverage must lie in (0, 1]");
    crf.validate();
  }

  std::size_t horizon_for(std::size_t height) const {
    return horizon_row ? std::min(*horizon_row, height)
                       : static_cast<std::size_t>(std::floor(0.375 * static_cast<double>(height)));
  }
};

struct FrameBundle {
  std::string frame_id;
  Scene scene = Scene::suburban;
  RgbImage image;
  FeatureGrid features;
  PatchMask trajectory;  // vehicle boxes already removed
  std::vector<BoundingBox> boxes;
};

struct PatchLabel {
  PatchMask mask;
  SimilarityMap map;  // normalised
};

struct LabelDiagnostics {
  std::string frame_id;
  Scene scene = Scene::suburban;
  std::size_t trajectory_patches = 0;
  std::size_t baseline_patches = 0;
  std::size_t second_sample_patches = 0;
  std::size_t final_patches = 0;
  std::size_t drivable_pixels = 0;
  std::size_t zero_norm_patches = 0;
  int iterations_run = 0;
  bool crf_applied = false;
  std::vector<std::string> warnings;
  PatchMap baseline_map;  // first-pass normalised similarity
  PatchMap final_map;     // map that was thresholded or fed to the CRF
  PatchMask baseline_mask;
  PatchMask final_mask;
  /// Wall-clock seconds per stage; informational only.
  double seconds_similarity = 0, seconds_crf = 0;
};

struct FrameLabel {
  PixelMask mask;
  LabelDiagnostics diagnostics;
};

namespace detail {

inline void check_bundle(const FrameBundle& b, const LabelConfig& cfg) {
  require(b.trajectory.rows() == b.features.rows() && b.trajectory.cols() == b.features.cols(),
          Errc::dimension_mismatch, "trajectory mask does not match the feature grid");
  require(b.image.height == b.features.rows() * cfg.patch_size && b.image.width == b.features.cols() * cfg.patch_size,
          Errc::dimension_mismatch,
          "image " + std::to_string(b.image.width) + "x" + std::to_string(b.image.height) +
              " does not match feature grid " + std::to_string(b.features.cols()) + "x" +
              std::to_string(b.features.rows()) + " at patch size " + std::to_string(cfg.patch_size));
}

inline std::size_t fmax_row(const FrameBundle& b, const LabelConfig& cfg) {
  if (!cfg.fmax_below_horizon) return 0;
  const std::size_t row = cfg.horizon_for(b.image.height) / cfg.patch_size;
  return std::min(row, b.features.rows() - 1);
}

inline PatchLabel similarity_label(const FrameBundle& b, const PatchMask& sample, const LabelConfig& cfg) {
  const FeatureVec mean = mean_feature(b.features, sample);
  const SimilarityMap raw = similarity_map(b.features, mean);
  SimilarityMap norm = normalize_map(raw, fmax_row(b, cfg));
  PatchMask mask = threshold_map(norm.values, cfg.threshold);
  return {std::move(mask), std::move(norm)};
}

inline CrfResult refine(const FrameBundle& b, const PatchMap& prob, const LabelConfig& cfg) {
  return crf_refine(build_unary(prob, b.image.height, b.image.width, cfg.crf.epsilon), b.image, cfg.crf);
}

}  // namespace detail

inline PatchLabel label_baseline(const FrameBundle& bundle, const LabelConfig& cfg) {
  cfg.validate();
  detail::check_bundle(bundle, cfg);
  return detail::similarity_label(bundle, bundle.trajectory, cfg);
}

/// Second pass seeded by the first-pass label. Returns the first-pass result
/// unchanged when that label is empty, adding a warning to `warnings`.
inline PatchLabel label_second_iteration(const FrameBundle& bundle, const LabelConfig& cfg,
                                         std::vector<std::string>* warnings = nullptr,
                                         PatchLabel* first_pass = nullptr, std::size_t* sample_size = nullptr) {
  PatchLabel first = label_baseline(bundle, cfg);
  if (first_pass) *first_pass = first;
  PatchMask sample = first.mask;
  if (cfg.second_sample == SecondSample::crf) {
    const CrfResult refined = detail::refine(bundle, first.map.values, cfg);
    PixelMask m = refined.labels;
    clear_above(m, cfg.horizon_for(bundle.image.height));
    sample = mask_to_patch_grid(m, cfg.patch_size, 0.5);
  }
  if (sample_size) *sample_size = popcount(sample);
  if (popcount(sample) == 0) {
    if (warnings) warnings->push_back("first-iteration label is empty; keeping the baseline result");
    return first;
  }
  return detail::similarity_label(bundle, sample, cfg);
}

/// Full labeling per `cfg`. Errors propagate; callers turn them into skip
/// records so that no partial mask is ever written.
inline FrameLabel tadap_label(const FrameBundle& bundle, const LabelConfig& cfg) {
  using clock = std::chrono::steady_clock;
  cfg.validate();
  detail::check_bundle(bundle, cfg);
  FrameLabel out;
  auto& d = out.diagnostics;
  d.frame_id = bundle.frame_id;
  d.scene = bundle.scene;
  d.trajectory_patches = popcount(bundle.trajectory);

  const auto t0 = clock::now();
  PatchLabel first, final_label;
  if (cfg.iterations == 1) {
    first = label_baseline(bundle, cfg);
    final_label = first;
    d.iterations_run = 1;
  } else {
    final_label = label_second_iteration(bundle, cfg, &d.warnings, &first, &d.second_sample_patches);
    d.iterations_run = d.second_sample_patches > 0 ? 2 : 1;
  }
  const auto t1 = clock::now();
  d.seconds_similarity = std::chrono::duration<double>(t1 - t0).count();
  d.zero_norm_patches = final_label.map.zero_norm_patches;
  d.baseline_map = first.map.values;
  d.baseline_mask = first.mask;
  d.baseline_patches = popcount(first.mask);
  d.final_map = final_label.map.values;
  d.final_mask = final_label.mask;
  d.final_patches = popcount(final_label.mask);

  if (cfg.use_crf) {
    out.mask = detail::refine(bundle, final_label.map.values, cfg).labels;
    d.crf_applied = true;
    d.seconds_crf = std::chrono::duration<double>(clock::now() - t1).count();
  } else {
    out.mask = upsample_nearest(final_label.mask, bundle.image.height, bundle.image.width);
  }
  clear_above(out.mask, cfg.horizon_for(bundle.image.height));
  d.drivable_pixels = popcount(out.mask);
  return out;
}

}  // namespace tadap
