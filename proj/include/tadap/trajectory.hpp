#pragma once

// Future-trajectory corridor extraction: pose windowing, arc fitting,
// corridor rasterisation, vehicle-box removal and patch downsampling.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "tadap/boxes.hpp"
#include "tadap/error.hpp"
#include "tadap/geometry.hpp"
#include "tadap/grid.hpp"

namespace tadap {

/// Poses from the first one at/after `frame_time` until the polyline length
/// first reaches `horizon_m`, the crossing pose included.
inline std::vector<EnuPose> window_future_poses(std::span<const EnuPose> log, double frame_time,
                                                double horizon_m = 50.0, double min_length_m = 5.0) {
  const auto first = std::lower_bound(log.begin(), log.end(), frame_time,
                                      [](const EnuPose& p, double t) { return p.timestamp < t; });
  require(first != log.end(), Errc::insufficient_trajectory, "no pose at or after the frame time");
  std::vector<EnuPose> out{*first};
  double length = 0.0;
  for (auto it = first + 1; it != log.end() && length < horizon_m; ++it) {
    length += std::hypot(it->x - out.back().x, it->y - out.back().y);
    out.push_back(*it);
  }
  require(out.size() >= 2 && length >= min_length_m, Errc::insufficient_trajectory,
          "only " + std::to_string(length) + " m of future driving available");
  return out;
}

struct ArcModel {
  enum class Kind { circle, line };

  Kind kind = Kind::line;
  Point2 center;       // circle
  double radius = 0;   // circle
  double turn = 1;     // circle: +1 counter-clockwise travel, -1 clockwise
  double angle0 = 0;   // circle: polar angle of the first pose about the centre
  Point2 anchor;       // line: projection of the first pose
  Point2 direction;    // line: unit, along the direction of travel
  double span_start = 0;
  double span_end = 0;
  double rms_residual = 0;

  /// Unsigned distance from the fitted curve.
  double distance(Point2 p) const {
    if (kind == Kind::circle) return std::abs(std::hypot(p.x - center.x, p.y - center.y) - radius);
    const double dx = p.x - anchor.x, dy = p.y - anchor.y;
    return std::abs(dx * direction.y - dy * direction.x);
  }

  /// Arc-length coordinate along the direction of travel, 0 at the first
  /// pose. For circles the angle is wrapped into the 2 pi window centred on
  /// `[lo, hi]`.
  double parameter(Point2 p, double lo, double hi) const {
    if (kind == Kind::line) return (p.x - anchor.x) * direction.x + (p.y - anchor.y) * direction.y;
    const double phi = turn * (std::atan2(p.y - center.y, p.x - center.x) - angle0);
    const double mid = 0.5 * (lo + hi) / radius;
    const double two_pi = 2.0 * std::numbers::pi;
    const double wrapped = phi - two_pi * std::floor((phi - mid + std::numbers::pi) / two_pi);
    return wrapped * radius;
  }
  double parameter(Point2 p) const { return parameter(p, span_start, span_end); }
};

namespace detail {

inline ArcModel fit_line(const std::vector<Eigen::Vector2d>& pts, const Eigen::Vector2d& mean) {
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& p : pts) cov += (p - mean) * (p - mean).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
  Eigen::Vector2d dir = eig.eigenvectors().col(1).normalized();
  if ((pts.back() - pts.front()).dot(dir) < 0) dir = -dir;
  ArcModel arc;
  arc.kind = ArcModel::Kind::line;
  const Eigen::Vector2d a = mean + dir * (pts.front() - mean).dot(dir);
  arc.anchor = {a.x(), a.y()};
  arc.direction = {dir.x(), dir.y()};
  double ss = 0.0;
  for (const auto& p : pts) {
    const double r = arc.distance({p.x(), p.y()});
    ss += r * r;
  }
  arc.rms_residual = std::sqrt(ss / static_cast<double>(pts.size()));
  arc.span_start = 0.0;
  arc.span_end = arc.parameter({pts.back().x(), pts.back().y()});
  return arc;
}

}  // namespace detail

/// Geometric least-squares circle through the poses (algebraic Kasa start,
/// Gauss-Newton refinement), or a total-least-squares line when the radius
/// exceeds `max_radius` or the algebraic system is near-singular.
inline ArcModel fit_arc(std::span<const EnuPose> poses, double max_radius = 10000.0) {
  require(poses.size() >= 2, Errc::insufficient_data, "arc fit needs at least 2 poses");
  std::vector<Eigen::Vector2d> pts;
  for (const auto& p : poses) {
    require(std::isfinite(p.x) && std::isfinite(p.y), Errc::non_finite, "non-finite pose");
    pts.emplace_back(p.x, p.y);
  }
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  double scale = 0.0;
  for (const auto& p : pts) scale = std::max(scale, (p - mean).norm());
  require(scale > 1e-9, Errc::degenerate_poses, "all poses coincide");

  if (pts.size() < 3) return detail::fit_line(pts, mean);

  // Kasa in centred, scaled coordinates: x^2 + y^2 + D x + E y + F = 0
  const auto n = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixXd a(n, 3);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector2d q = (pts[static_cast<std::size_t>(i)] - mean) / scale;
    a(i, 0) = q.x();
    a(i, 1) = q.y();
    a(i, 2) = 1.0;
    b(i) = -q.squaredNorm();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv(2) < 1e-9 * sv(0)) return detail::fit_line(pts, mean);
  const Eigen::Vector3d def = svd.solve(b);
  Eigen::Vector2d c(-def(0) / 2.0, -def(1) / 2.0);
  double r2 = c.squaredNorm() - def(2);
  if (!(r2 > 0) || !std::isfinite(r2)) return detail::fit_line(pts, mean);
  double r = std::sqrt(r2);
  if (r * scale > max_radius) return detail::fit_line(pts, mean);

  // Gauss-Newton on residuals |q_i - c| - r
  for (int it = 0; it < 100; ++it) {
    Eigen::MatrixXd j(n, 3);
    Eigen::VectorXd res(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Vector2d d = (pts[static_cast<std::size_t>(i)] - mean) / scale - c;
      const double dist = d.norm();
      if (dist < 1e-15) return detail::fit_line(pts, mean);
      res(i) = dist - r;
      j(i, 0) = -d.x() / dist;
      j(i, 1) = -d.y() / dist;
      j(i, 2) = -1.0;
    }
    const Eigen::Vector3d step = j.colPivHouseholderQr().solve(-res);
    if (!step.allFinite()) break;
    c += step.head<2>();
    r += step(2);
    if (step.norm() < 1e-15 * (1.0 + r)) break;
  }
  r *= scale;
  if (!(r > 0) || !std::isfinite(r) || r > max_radius) return detail::fit_line(pts, mean);

  ArcModel arc;
  arc.kind = ArcModel::Kind::circle;
  const Eigen::Vector2d centre = mean + c * scale;
  arc.center = {centre.x(), centre.y()};
  arc.radius = r;
  double ss = 0.0;
  for (const auto& p : pts) {
    const double d = (p - centre).norm() - r;
    ss += d * d;
  }
  arc.rms_residual = std::sqrt(ss / static_cast<double>(pts.size()));

  // Travel direction and total swept angle from successive pose angles.
  auto polar = [&](const Eigen::Vector2d& p) { return std::atan2(p.y() - centre.y(), p.x() - centre.x()); };
  double swept = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    double d = polar(pts[i]) - polar(pts[i - 1]);
    d = std::remainder(d, 2.0 * std::numbers::pi);
    swept += d;
  }
  arc.turn = swept >= 0 ? 1.0 : -1.0;
  arc.angle0 = polar(pts.front());
  arc.span_start = 0.0;
  arc.span_end = std::abs(swept) * r;
  return arc;
}

/// Pixels whose ground projection lies within half the vehicle width of the
/// fitted arc, restricted to the pose span extended backward to the vehicle.
/// Rows above `horizon_row` and pixels at the plane's horizon are false.
inline PixelMask rasterize_corridor(const ArcModel& arc, const Homography& h, const EnuPose& vehicle,
                                   double vehicle_width, std::size_t width, std::size_t height,
                                   std::size_t horizon_row) {
  require(vehicle_width > 0, Errc::invalid_argument, "vehicle width must be positive");
  PixelMask mask(height, width, 0);
  const double half = vehicle_width / 2.0;
  const double back = arc.parameter({vehicle.x, vehicle.y});
  const double lo = std::min(arc.span_start, back);
  const double hi = arc.span_end;
  // Pixels mapping to the far side of the projective line are not ground.
  const Eigen::Vector3d ref = h.matrix() * Eigen::Vector3d(0.5 * static_cast<double>(width),
                                                           static_cast<double>(height) - 1.0, 1.0);
  const double ref_sign = ref.z() >= 0 ? 1.0 : -1.0;
  for (std::size_t row = horizon_row; row < height; ++row) {
    for (std::size_t col = 0; col < width; ++col) {
      const Eigen::Vector3d g = h.matrix() * Eigen::Vector3d(static_cast<double>(col), static_cast<double>(row), 1.0);
      if (std::abs(g.z()) <= 1e-12 || g.z() * ref_sign < 0) continue;
      const Point2 enu = ground_to_enu({g.x() / g.z(), g.y() / g.z()}, vehicle);
      if (arc.distance(enu) > half) continue;
      const double s = arc.parameter(enu, lo, hi);
      if (s < lo || s > hi) continue;
      mask(row, col) = 1;
    }
  }
  return mask;
}

/// Clears pixels inside vehicle-class boxes with confidence >= min_confidence.
/// A pixel (col, row) is inside when u_min <= col < u_max and v_min <= row < v_max.
inline PixelMask remove_vehicle_boxes(PixelMask mask, std::span<const BoundingBox> boxes, double min_confidence = 0.5) {
  const auto clamp_to = [](double v, std::size_t hi) {
    return static_cast<std::size_t>(std::clamp(std::ceil(v), 0.0, static_cast<double>(hi)));
  };
  for (const auto& b : boxes) {
    if (!is_vehicle_class(b.label) || b.confidence < min_confidence) continue;
    const std::size_t c0 = clamp_to(b.u_min, mask.cols()), c1 = clamp_to(b.u_max, mask.cols());
    const std::size_t r0 = clamp_to(b.v_min, mask.rows()), r1 = clamp_to(b.v_max, mask.rows());
    for (std::size_t r = r0; r < r1; ++r)
      for (std::size_t c = c0; c < c1; ++c) mask(r, c) = 0;
  }
  return mask;
}

/// A patch is set when at least `coverage` of its pixels are set.
inline PatchMask mask_to_patch_grid(const PixelMask& mask, std::size_t patch = 14, double coverage = 0.5) {
  require(patch > 0 && mask.rows() % patch == 0 && mask.cols() % patch == 0, Errc::dimension_mismatch,
          "mask " + std::to_string(mask.rows()) + "x" + std::to_string(mask.cols()) +
              " is not divisible by patch size " + std::to_string(patch));
  PatchMask out(mask.rows() / patch, mask.cols() / patch, 0);
  const double need = coverage * static_cast<double>(patch * patch);
  for (std::size_t pr = 0; pr < out.rows(); ++pr) {
    for (std::size_t pc = 0; pc < out.cols(); ++pc) {
      std::size_t count = 0;
      for (std::size_t r = pr * patch; r < (pr + 1) * patch; ++r)
        for (std::size_t c = pc * patch; c < (pc + 1) * patch; ++c) count += mask(r, c) ? 1 : 0;
      out(pr, pc) = static_cast<double>(count) >= need ? 1 : 0;
    }
  }
  return out;
}

}  // namespace tadap
