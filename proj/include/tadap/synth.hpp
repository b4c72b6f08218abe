#pragma once

// Synthetic oracle scenes. Each scene is one camera frame of a vehicle at
// the start of a road, with a GNSS trace of the drive that follows, a patch
// feature grid, a rendered image, planted detector boxes and an exact
// ground-truth mask.
//
// Geometry is laid out in the receiver frame of the frame pose (+Y forward,
// +X right). The camera is a level pinhole at height `camera_height`, so the
// pixel->ground homography is exact on the ground plane.
//
// Feature model: every class c has a mean direction u_c and all means have
// norm n = s * separation / sqrt(2), so orthogonal classes sit `separation`
// noise norms apart. Per-patch noise is isotropic Gaussian with
// E|eps|^2 = s^2, s = feature_scale. Road comes
// in two appearance variants (packed ego lane vs. untouched snow); a road
// pixel at lateral offset l from the driven path blends from the frame's
// ego variant toward the other one as |l| grows, which makes adjacent lanes
// and crossing roads less similar to the trajectory sample.

#include <nlohmann/json.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "tadap/boxes.hpp"
#include "tadap/calibration.hpp"
#include "tadap/error.hpp"
#include "tadap/features.hpp"
#include "tadap/geometry.hpp"
#include "tadap/gnss_log.hpp"
#include "tadap/grid.hpp"
#include "tadap/image_io.hpp"
#include "tadap/labeler.hpp"
#include "tadap/trajectory.hpp"

namespace tadap {

/// mt19937_64 with portable uniform and normal draws, so generated scenes do
/// not depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }
  bool chance(double p) { return uniform() < p; }
  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

enum class SceneKind { straight, curve, intersection, adjacent_lane };

constexpr std::string_view kind_name(SceneKind k) {
  switch (k) {
    case SceneKind::straight: return "straight";
    case SceneKind::curve: return "curve";
    case SceneKind::intersection: return "intersection";
    case SceneKind::adjacent_lane: return "adjacent-lane";
  }
  return "?";
}

/// Pixel classes of the rendered scene.
enum class SceneClass : std::uint8_t { sky, background, road, sidewalk, vehicle };

struct SceneSpec {
  std::uint64_t seed = 1;
  SceneKind kind = SceneKind::straight;
  Scene tag = Scene::countryside;
  double road_half_width = 2.5;  // metres, ego lane
  double curve_radius = 80.0;    // metres; curves only
  double separation = 4.0;       // class-mean distance in units of the within-class stddev
  double gnss_noise = 0.1;       // metres, per pose and axis
  bool sidewalks = false;
  double sidewalk_width = 1.5;     // metres
  double sidewalk_distance = 3.0;  // feature distance from the ego-road mean, stddev units
  double variant_cosine = 0.4;     // cosine between the two road appearance variants
  double drift = 1.0;              // 0 disables the lateral appearance blend
  double drift_start = 0.9;        // |l| where the blend begins, metres
  double drift_end = 2.5;          // |l| where it is complete
  double vehicle_probability = 0.3;
  double pixel_noise = 12.0;       // stddev of rendered intensities
  double feature_scale = 10.0;     // RMS norm of the per-patch feature noise
  std::size_t image_size = 644;
  std::size_t patch_size = 14;
  std::size_t feature_dim = 64;
  double vehicle_width = 1.8;
  double camera_height = 1.5;
  /// Seeds the class-mean directions; shared by every scene of a suite so a
  /// head trained on one scene transfers to the others.
  std::uint64_t feature_seed = 7;

  void validate() const {
    require(separation > 0 && std::isfinite(separation), Errc::config, "separation must be positive");
    require(road_half_width > 0.5 && road_half_width <= 8.0, Errc::config, "road half-width must lie in (0.5, 8] m");
    require(kind != SceneKind::curve || curve_radius >= 20.0, Errc::config, "curve radius must be >= 20 m");
    require(gnss_noise >= 0 && pixel_noise >= 0, Errc::config, "noise levels must be >= 0");
    require(variant_cosine > -1 && variant_cosine < 1, Errc::config, "variant cosine must lie in (-1, 1)");
    require(sidewalk_distance > 0, Errc::config, "sidewalk distance must be positive");
    require(drift >= 0 && drift <= 1 && drift_end > drift_start, Errc::config, "bad drift settings");
    require(patch_size > 0 && image_size % patch_size == 0 && image_size >= 8 * patch_size, Errc::config,
            "image size must be a multiple of the patch size and at least 8 patches");
    require(feature_dim >= 8, Errc::config, "feature dim must be >= 8");
    require(feature_scale > 0 && std::isfinite(feature_scale), Errc::config, "feature scale must be positive");
    require(vehicle_width > 0 && vehicle_width < 2 * road_half_width, Errc::config,
            "vehicle must fit inside the ego lane");
  }
};

/// Level pinhole camera scaled to the image size.
struct CanonicalCamera {
  double focal = 0, cu = 0, v0 = 0, height = 0;

  static CanonicalCamera for_image(std::size_t size, double camera_height) {
    const double s = static_cast<double>(size);
    return {0.87 * s, 0.5 * s, std::floor(0.34 * s), camera_height};
  }

  /// Pixel -> receiver-frame ground point: [X Y 1] ~ H [u v 1].
  Homography homography() const {
    Eigen::Matrix3d m;
    m << height, 0.0, -cu * height, 0.0, 0.0, focal * height, 0.0, 1.0, -v0;
    return Homography(m);
  }

  double row_of(double y, double z = 0.0) const { return v0 + focal * (height - z) / y; }
  double col_of(double x, double y) const { return cu + focal * x / y; }
};

struct SyntheticScene {
  std::string frame_id;
  SceneSpec spec;
  RgbImage image;
  PixelMask ground_truth;
  Grid<std::uint8_t, PixelTag> classes;
  FeatureGrid features;
  std::vector<GeodeticPose> gnss;
  double frame_time = 0;
  std::vector<BoundingBox> boxes;
  Calibration calibration;
  // Planted geometry, for tests.
  double curvature = 0;   // signed, 1/m, positive turning right
  int ego_variant = 0;    // 0 or 1
  int adjacent_side = 0;  // -1 left, +1 right, 0 none

  PatchMask ground_truth_patches() const { return mask_to_patch_grid(ground_truth, spec.patch_size, 0.5); }
};

namespace detail {

// Unit class directions with a prescribed Gram matrix, embedded in a random
// orthonormal basis of R^dim.
inline std::vector<Eigen::VectorXd> class_directions(const SceneSpec& spec) {
  const double n = spec.separation / std::sqrt(2.0);
  // |side_cos| < sqrt((1 + variant_cosine) / 2) keeps the Gram matrix positive definite.
  const double side_max = 0.95 * std::sqrt((1.0 + spec.variant_cosine) / 2.0);
  const double side_cos =
      std::clamp(1.0 - spec.sidewalk_distance * spec.sidewalk_distance / (2.0 * n * n), -side_max, side_max);
  // order: road variant 0, road variant 1, sidewalk, background, sky, vehicle
  constexpr int k = 6;
  Eigen::MatrixXd gram = Eigen::MatrixXd::Identity(k, k);
  gram(0, 1) = gram(1, 0) = spec.variant_cosine;
  gram(0, 2) = gram(2, 0) = side_cos;
  gram(1, 2) = gram(2, 1) = side_cos;
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  require(llt.info() == Eigen::Success, Errc::config, "class similarity settings are inconsistent");
  const Eigen::MatrixXd l = llt.matrixL();
  Rng rng(spec.feature_seed);
  const auto dim = static_cast<Eigen::Index>(spec.feature_dim);
  Eigen::MatrixXd g(dim, k);
  for (Eigen::Index c = 0; c < k; ++c)
    for (Eigen::Index r = 0; r < dim; ++r) g(r, c) = rng.normal();
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ() * Eigen::MatrixXd::Identity(dim, k);
  std::vector<Eigen::VectorXd> dirs;
  for (int c = 0; c < k; ++c) dirs.push_back(q * l.row(c).transpose());
  return dirs;
}

struct RoadFrame {
  double curvature = 0;  // signed, positive = turning right

  // Path point at arc length s in the receiver frame.
  Point2 point(double s) const {
    if (std::abs(curvature) < 1e-12) return {0.0, s};
    const double r = 1.0 / curvature;
    return {r * (1.0 - std::cos(curvature * s)), r * std::sin(curvature * s)};
  }
  double heading(double s) const { return curvature * s; }

  // (arc length, lateral offset positive to the right) of a ground point.
  std::pair<double, double> local(Point2 p) const {
    if (std::abs(curvature) < 1e-12) return {p.y, p.x};
    const double r = 1.0 / curvature;
    const double radius = std::abs(r);
    const double dx = p.x - r, dy = p.y;
    const double d = std::hypot(dx, dy);
    const double lateral = curvature > 0 ? radius - d : d - radius;
    // angle from the start point (-r, 0) relative to the centre, travel direction
    const double a = std::atan2(dy, -dx * (curvature > 0 ? 1.0 : -1.0));
    return {a * radius, lateral};
  }
};

}  // namespace detail

inline SyntheticScene generate_scene(const SceneSpec& spec, const std::string& frame_id = "000000",
                                     double frame_time = 0.0, const GeodeticPose& origin = {60.17, 24.94, 10.0, 0.0, 0.0}) {
  spec.validate();
  Rng rng(spec.seed);
  SyntheticScene sc;
  sc.frame_id = frame_id;
  sc.spec = spec;
  sc.frame_time = frame_time;

  const std::size_t size = spec.image_size;
  const CanonicalCamera cam = CanonicalCamera::for_image(size, spec.camera_height);
  const double heading0 = rng.uniform(0.0, 2.0 * std::numbers::pi);
  double curvature = 0.0;
  if (spec.kind == SceneKind::curve || (spec.kind == SceneKind::adjacent_lane && spec.curve_radius > 0))
    curvature = (rng.chance(0.5) ? 1.0 : -1.0) / spec.curve_radius;
  const detail::RoadFrame road{curvature};
  sc.curvature = curvature;
  sc.ego_variant = rng.chance(0.5) ? 1 : 0;

  const double hw = spec.road_half_width;
  double road_lo = -hw, road_hi = hw;
  if (spec.kind == SceneKind::adjacent_lane) {
    sc.adjacent_side = rng.chance(0.5) ? 1 : -1;
    (sc.adjacent_side > 0 ? road_hi : road_lo) += sc.adjacent_side * 2.0 * hw;
  }
  const double cross_at = rng.uniform(12.0, 25.0);
  const double cross_half = rng.uniform(2.5, 3.5);
  const bool crossing = spec.kind == SceneKind::intersection;

  // Lead vehicle in the ego lane: rear face as an image rectangle.
  bool has_vehicle = rng.chance(spec.vehicle_probability);
  const double vehicle_s = rng.uniform(10.0, 20.0);
  long vu0 = 0, vu1 = 0, vv0 = 0, vv1 = 0;
  if (has_vehicle) {
    const Point2 p = road.point(vehicle_s);
    const double half = 0.5 * spec.vehicle_width;
    vu0 = std::lround(std::ceil(cam.col_of(p.x - half, p.y)));
    vu1 = std::lround(std::ceil(cam.col_of(p.x + half, p.y)));
    vv0 = std::lround(std::ceil(cam.row_of(p.y, 1.5)));
    vv1 = std::lround(std::ceil(cam.row_of(p.y, 0.0)));
    vu0 = std::clamp<long>(vu0, 0, static_cast<long>(size));
    vu1 = std::clamp<long>(vu1, 0, static_cast<long>(size));
    vv0 = std::clamp<long>(vv0, 0, static_cast<long>(size));
    vv1 = std::clamp<long>(vv1, 0, static_cast<long>(size));
    has_vehicle = vu0 < vu1 && vv0 < vv1;
    if (has_vehicle)
      sc.boxes.push_back({frame_id, "car", 0.9, static_cast<double>(vu0), static_cast<double>(vv0),
                          static_cast<double>(vu1), static_cast<double>(vv1)});
  }
  // Detector noise that must be ignored: a low-confidence car and a person.
  if (rng.chance(0.3)) {
    const double u = rng.uniform(0.3, 0.6) * static_cast<double>(size);
    const double v = rng.uniform(0.7, 0.85) * static_cast<double>(size);
    sc.boxes.push_back({frame_id, "car", 0.3, u, v, u + 40, v + 30});
  }
  if (rng.chance(0.3)) {
    const double u = rng.uniform(0.05, 0.2) * static_cast<double>(size);
    const double v = rng.uniform(0.6, 0.8) * static_cast<double>(size);
    sc.boxes.push_back({frame_id, "person", 0.95, u, v, u + 20, v + 60});
  }

  // Pixel classes and road blend weights from the exact geometry.
  sc.classes = Grid<std::uint8_t, PixelTag>(size, size, static_cast<std::uint8_t>(SceneClass::sky));
  PixelMap blend(size, size, 0.0);
  for (std::size_t r = 0; r < size; ++r) {
    const double v = static_cast<double>(r);
    if (v <= cam.v0) continue;
    const double y = cam.focal * cam.height / (v - cam.v0);
    for (std::size_t c = 0; c < size; ++c) {
      const double x = (static_cast<double>(c) - cam.cu) * y / cam.focal;
      auto cls = SceneClass::background;
      const auto [s, l] = road.local({x, y});
      const bool on_road = l >= road_lo && l <= road_hi && s > -40.0;
      const bool on_cross = crossing && std::abs(y - cross_at) <= cross_half;
      if (on_road || on_cross) {
        cls = SceneClass::road;
        const double t = std::clamp((std::abs(l) - spec.drift_start) / (spec.drift_end - spec.drift_start), 0.0, 1.0);
        blend(r, c) = spec.drift * t;
      } else if (spec.sidewalks && ((l > road_hi && l <= road_hi + spec.sidewalk_width) ||
                                    (l < road_lo && l >= road_lo - spec.sidewalk_width))) {
        cls = SceneClass::sidewalk;
      }
      if (has_vehicle && static_cast<long>(c) >= vu0 && static_cast<long>(c) < vu1 && static_cast<long>(r) >= vv0 &&
          static_cast<long>(r) < vv1)
        cls = SceneClass::vehicle;
      sc.classes(r, c) = static_cast<std::uint8_t>(cls);
    }
  }
  sc.ground_truth = PixelMask(size, size, 0);
  for (std::size_t i = 0; i < sc.classes.size(); ++i)
    sc.ground_truth[i] = sc.classes[i] == static_cast<std::uint8_t>(SceneClass::road) ? 1 : 0;

  // Rendered image.
  static constexpr std::array<std::array<double, 3>, 5> palette{{
      {170, 190, 215},  // sky
      {228, 230, 235},  // background snow
      {105, 105, 110},  // road
      {160, 150, 140},  // sidewalk
      {180, 40, 40},    // vehicle
  }};
  sc.image = RgbImage(size, size);
  for (std::size_t i = 0; i < sc.classes.size(); ++i)
    for (int k = 0; k < 3; ++k) {
      const double value = palette[sc.classes[i]][static_cast<std::size_t>(k)] + spec.pixel_noise * rng.normal();
      sc.image.rgb[3 * i + static_cast<std::size_t>(k)] = static_cast<std::uint8_t>(std::clamp(std::lround(value), 0L, 255L));
    }

  // Patch features: the pixel-fraction weighted mixture of class means plus
  // noise, so boundary patches sit between their classes.
  const auto dirs = detail::class_directions(spec);
  const double norm = spec.feature_scale * spec.separation / std::sqrt(2.0);
  const double sigma = spec.feature_scale / std::sqrt(static_cast<double>(spec.feature_dim));
  const std::size_t grid_n = size / spec.patch_size;
  sc.features = FeatureGrid(grid_n, grid_n, spec.feature_dim);
  const Eigen::VectorXd& ego = dirs[static_cast<std::size_t>(sc.ego_variant)];
  const Eigen::VectorXd& other = dirs[static_cast<std::size_t>(1 - sc.ego_variant)];
  const double pixels = static_cast<double>(spec.patch_size * spec.patch_size);
  for (std::size_t pr = 0; pr < grid_n; ++pr)
    for (std::size_t pc = 0; pc < grid_n; ++pc) {
      Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.feature_dim));
      for (std::size_t r = pr * spec.patch_size; r < (pr + 1) * spec.patch_size; ++r)
        for (std::size_t c = pc * spec.patch_size; c < (pc + 1) * spec.patch_size; ++c) {
          switch (static_cast<SceneClass>(sc.classes(r, c))) {
            case SceneClass::road: mean += (1.0 - blend(r, c)) * ego + blend(r, c) * other; break;
            case SceneClass::sidewalk: mean += dirs[2]; break;
            case SceneClass::background: mean += dirs[3]; break;
            case SceneClass::sky: mean += dirs[4]; break;
            case SceneClass::vehicle: mean += dirs[5]; break;
          }
        }
      mean /= pixels;
      auto f = sc.features.at(pr, pc);
      for (std::size_t k = 0; k < spec.feature_dim; ++k)
        f[k] = static_cast<float>(norm * mean(static_cast<Eigen::Index>(k)) + sigma * rng.normal());
    }

  // GNSS trace: 10 Hz at 10 m/s from 30 m behind to 90 m ahead of the frame.
  const EnuPose frame_pose{0.0, 0.0, 0.0, heading0, frame_time};
  for (int i = -30; i <= 90; ++i) {
    const double s = i;
    const Point2 g = road.point(s);
    const Point2 e = ground_to_enu(g, frame_pose);
    EnuPose p{e.x + spec.gnss_noise * rng.normal(), e.y + spec.gnss_noise * rng.normal(), 0.0,
              heading0 + road.heading(s), frame_time + 0.1 * i};
    sc.gnss.push_back(enu_to_geodetic(p, origin));
  }

  // Calibration: the canonical homography and four pairs consistent with it.
  sc.calibration.homography = cam.homography();
  sc.calibration.vehicle_width = spec.vehicle_width;
  const double sz = static_cast<double>(size);
  for (const auto& px : {Pixel{0.2 * sz, 0.6 * sz}, Pixel{0.8 * sz, 0.6 * sz}, Pixel{0.2 * sz, 0.9 * sz},
                         Pixel{0.8 * sz, 0.9 * sz}})
    sc.calibration.pairs.push_back({px, pixel_to_ground(sc.calibration.homography, px)});
  return sc;
}

/// Scene counts for `n` frames under the given mix, by largest remainder
/// (ties go to the larger weight, then to the later scene).
inline std::array<std::size_t, 4> scene_counts(std::size_t n, const std::array<double, 4>& mix = {43, 19, 19, 19}) {
  double total = 0;
  for (double m : mix) {
    require(m >= 0 && std::isfinite(m), Errc::config, "scene mix weights must be >= 0");
    total += m;
  }
  require(total > 0, Errc::config, "scene mix must have a positive weight");
  std::array<std::size_t, 4> counts{};
  std::array<double, 4> rem{};
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < 4; ++k) {
    const double exact = static_cast<double>(n) * mix[k] / total;
    counts[k] = static_cast<std::size_t>(std::floor(exact));
    rem[k] = exact - static_cast<double>(counts[k]);
    assigned += counts[k];
  }
  std::array<std::size_t, 4> order{0, 1, 2, 3};
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (rem[a] != rem[b]) return rem[a] > rem[b];
    if (mix[a] != mix[b]) return mix[a] > mix[b];
    return a > b;
  });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++counts[order[i % 4]];
  return counts;
}

struct SuiteOptions {
  std::size_t scenes = 50;
  std::uint64_t seed = 2024;
  std::array<double, 4> mix{43, 19, 19, 19};
  SceneSpec base;
};

/// Scene specs for a suite. Tags are interleaved in proportion to their
/// counts so that every contiguous split sees a similar mix.
inline std::vector<SceneSpec> suite_specs(const SuiteOptions& opt) {
  require(opt.scenes >= 1, Errc::config, "suite needs at least one scene");
  const auto counts = scene_counts(opt.scenes, opt.mix);
  std::vector<std::pair<double, std::size_t>> slots;
  for (std::size_t k = 0; k < 4; ++k)
    for (std::size_t i = 0; i < counts[k]; ++i)
      slots.emplace_back((static_cast<double>(i) + 0.5) / static_cast<double>(counts[k]), k);
  std::stable_sort(slots.begin(), slots.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  Rng rng(opt.seed);
  std::vector<SceneSpec> specs;
  std::array<std::size_t, 4> seen{};
  for (const auto& [pos, k] : slots) {
    SceneSpec s = opt.base;
    s.seed = rng.next();
    s.tag = kScenes[k];
    const std::size_t nth = seen[k]++;
    switch (s.tag) {
      case Scene::suburban:
        s.kind = nth % 2 == 0 ? SceneKind::curve : SceneKind::straight;
        s.sidewalks = true;
        s.road_half_width = rng.uniform(2.3, 2.8);
        s.curve_radius = rng.uniform(40.0, 120.0);
        break;
      case Scene::highway:
        s.kind = SceneKind::adjacent_lane;
        s.road_half_width = rng.uniform(1.8, 2.0);
        s.curve_radius = nth % 2 == 0 ? 0.0 : rng.uniform(300.0, 800.0);
        break;
      case Scene::countryside:
        s.kind = nth % 2 == 0 ? SceneKind::straight : SceneKind::curve;
        s.road_half_width = rng.uniform(2.2, 2.8);
        s.curve_radius = rng.uniform(60.0, 200.0);
        break;
      case Scene::intersection:
        s.kind = SceneKind::intersection;
        s.sidewalks = nth % 2 == 0;
        s.road_half_width = rng.uniform(2.3, 2.8);
        break;
    }
    specs.push_back(s);
  }
  return specs;
}

inline std::string frame_name(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06zu", i);
  return buf;
}

/// Frame i is recorded at 1000 * i seconds and about 550 m north of frame i-1.
inline SyntheticScene generate_suite_scene(const SceneSpec& spec, std::size_t index) {
  const GeodeticPose origin{60.17 + 0.005 * static_cast<double>(index), 24.94, 10.0, 0.0, 0.0};
  return generate_scene(spec, frame_name(index), 1000.0 * static_cast<double>(index + 1), origin);
}

struct SuiteLayout {
  std::filesystem::path root;
  std::filesystem::path images() const { return root / "images"; }
  std::filesystem::path features() const { return root / "features"; }
  std::filesystem::path ground_truth() const { return root / "gt"; }
  std::filesystem::path gnss() const { return root / "gnss.csv"; }
  std::filesystem::path boxes() const { return root / "boxes.jsonl"; }
  std::filesystem::path calibration() const { return root / "calibration.txt"; }
  std::filesystem::path frames() const { return root / "frames.csv"; }
  std::filesystem::path manifest() const { return root / "manifest.json"; }
  std::filesystem::path split(const std::string& name) const { return root / (name + ".txt"); }
};

/// Writes a suite to `root` and returns the manifest. Splits: positions
/// 0-5 of every 10 go to train, 6-7 to val, 8-9 to test.
inline nlohmann::ordered_json generate_suite(const SuiteOptions& opt, const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  const SuiteLayout layout{root};
  fs::create_directories(layout.images());
  fs::create_directories(layout.features());
  fs::create_directories(layout.ground_truth());
  const auto specs = suite_specs(opt);
  const auto counts = scene_counts(opt.scenes, opt.mix);

  std::vector<GeodeticPose> gnss;
  std::vector<BoundingBox> boxes;
  std::ofstream frames(layout.frames());
  require(static_cast<bool>(frames), Errc::io, "cannot create " + layout.frames().string());
  frames << "frame,timestamp,scene\n";
  std::ofstream train(layout.split("train")), val(layout.split("val")), test(layout.split("test"));
  nlohmann::ordered_json manifest;
  manifest["scenes"] = opt.scenes;
  manifest["seed"] = opt.seed;
  manifest["image_size"] = opt.base.image_size;
  manifest["patch_size"] = opt.base.patch_size;
  manifest["feature_dim"] = opt.base.feature_dim;
  manifest["separation"] = opt.base.separation;
  manifest["gnss_noise"] = opt.base.gnss_noise;
  for (std::size_t k = 0; k < 4; ++k) manifest["scene_counts"][std::string(scene_name(kScenes[k]))] = counts[k];
  manifest["frames"] = nlohmann::ordered_json::array();
  Calibration calibration;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const SyntheticScene sc = generate_suite_scene(specs[i], i);
    try {
      write_rgb_png((layout.images() / (sc.frame_id + ".png")).string(), sc.image);
      write_mask_png((layout.ground_truth() / (sc.frame_id + ".png")).string(), sc.ground_truth);
      save_feature_grid((layout.features() / (sc.frame_id + ".tdfg")).string(), sc.features);
    } catch (const Error& e) {
      throw Error(e.code(), "scene " + sc.frame_id + ": " + e.what());
    }
    gnss.insert(gnss.end(), sc.gnss.begin(), sc.gnss.end());
    boxes.insert(boxes.end(), sc.boxes.begin(), sc.boxes.end());
    calibration = sc.calibration;
    char ts[32];
    std::snprintf(ts, sizeof ts, "%.6f", sc.frame_time);
    frames << sc.frame_id << ',' << ts << ',' << scene_name(sc.spec.tag) << '\n';
    const std::size_t pos = i % 10;
    (pos < 6 ? train : pos < 8 ? val : test) << sc.frame_id << '\n';
    manifest["frames"].push_back({{"frame", sc.frame_id},
                                  {"scene", scene_name(sc.spec.tag)},
                                  {"kind", kind_name(sc.spec.kind)},
                                  {"seed", sc.spec.seed},
                                  {"split", pos < 6 ? "train" : pos < 8 ? "val" : "test"}});
  }
  {
    std::ofstream out(layout.gnss());
    out << "# timestamp_s,latitude_deg,longitude_deg,altitude_m,heading_deg\n";
    write_gnss_log(out, gnss);
  }
  {
    std::ofstream out(layout.boxes());
    write_boxes(out, boxes);
  }
  {
    std::ofstream out(layout.calibration());
    write_calibration(out, calibration);
  }
  {
    std::ofstream out(layout.manifest());
    out << manifest.dump(2) << '\n';
  }
  require(static_cast<bool>(frames) && static_cast<bool>(train) && static_cast<bool>(val) && static_cast<bool>(test),
          Errc::io, "failed writing suite index files");
  return manifest;
}

}  // namespace tadap
