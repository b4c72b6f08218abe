#pragma once

// Geodetic, ground-plane and image coordinates.
//
// Frames used throughout:
//   ENU       local East-North-Up tangent plane at a chosen origin.
//   receiver  vehicle ground frame: +Y forward, +X to the right.
//   pixel     (u, v) = (column, row).
// Headings are clockwise from north; ENU headings are in radians.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "tadap/error.hpp"

namespace tadap {

struct GeodeticPose {
  double latitude = 0;   // degrees, WGS84
  double longitude = 0;  // degrees, WGS84
  double altitude = 0;   // metres above the ellipsoid
  double heading = 0;    // degrees clockwise from true north
  double timestamp = 0;  // seconds

  void validate() const {
    require(std::isfinite(latitude) && std::isfinite(longitude) && std::isfinite(altitude) &&
                std::isfinite(heading) && std::isfinite(timestamp),
            Errc::invalid_pose, "non-finite geodetic pose");
    require(latitude >= -90 && latitude <= 90, Errc::invalid_pose, "latitude out of range");
    require(longitude >= -180 && longitude <= 180, Errc::invalid_pose, "longitude out of range");
  }
};

struct EnuPose {
  double x = 0;        // metres east
  double y = 0;        // metres north
  double z = 0;        // metres up; carried but unused in the planar corridor maths
  double heading = 0;  // radians clockwise from +y
  double timestamp = 0;
};

struct Pixel {
  double u = 0;
  double v = 0;
};

/// Point on the ground plane, either in the receiver frame or in ENU.
struct Point2 {
  double x = 0;
  double y = 0;
};

inline double normalize_heading_deg(double deg) {
  double h = std::fmod(deg, 360.0);
  if (h < 0) h += 360.0;
  return h >= 360.0 ? 0.0 : h;
}

namespace wgs84 {
inline constexpr double a = 6378137.0;
inline constexpr double f = 1.0 / 298.257223563;
inline constexpr double e2 = f * (2.0 - f);
}  // namespace wgs84

inline std::array<double, 3> geodetic_to_ecef(double lat_deg, double lon_deg, double alt) {
  const double lat = lat_deg * std::numbers::pi / 180.0;
  const double lon = lon_deg * std::numbers::pi / 180.0;
  const double s = std::sin(lat);
  const double n = wgs84::a / std::sqrt(1.0 - wgs84::e2 * s * s);
  return {(n + alt) * std::cos(lat) * std::cos(lon), (n + alt) * std::cos(lat) * std::sin(lon),
          (n * (1.0 - wgs84::e2) + alt) * s};
}

/// Inverse of geodetic_to_ecef by fixed-point iteration on latitude
/// (converges to well below a millimetre for terrestrial heights).
inline std::array<double, 3> ecef_to_geodetic(double x, double y, double z) {
  const double p = std::hypot(x, y);
  double lat = std::atan2(z, p * (1.0 - wgs84::e2));
  double h = 0.0;
  for (int i = 0; i < 10; ++i) {
    const double s = std::sin(lat);
    const double n = wgs84::a / std::sqrt(1.0 - wgs84::e2 * s * s);
    h = p / std::cos(lat) - n;
    lat = std::atan2(z, p * (1.0 - wgs84::e2 * n / (n + h)));
  }
  return {lat * 180.0 / std::numbers::pi, std::atan2(y, x) * 180.0 / std::numbers::pi, h};
}

/// Geodetic -> ECEF -> ENU relative to `origin`.
inline EnuPose geodetic_to_enu(const GeodeticPose& pose, const GeodeticPose& origin) {
  pose.validate();
  origin.validate();
  const auto p = geodetic_to_ecef(pose.latitude, pose.longitude, pose.altitude);
  const auto o = geodetic_to_ecef(origin.latitude, origin.longitude, origin.altitude);
  const double dx = p[0] - o[0], dy = p[1] - o[1], dz = p[2] - o[2];
  const double lat = origin.latitude * std::numbers::pi / 180.0;
  const double lon = origin.longitude * std::numbers::pi / 180.0;
  const double sl = std::sin(lat), cl = std::cos(lat), so = std::sin(lon), co = std::cos(lon);
  EnuPose out;
  out.x = -so * dx + co * dy;
  out.y = -sl * co * dx - sl * so * dy + cl * dz;
  out.z = cl * co * dx + cl * so * dy + sl * dz;
  out.heading = normalize_heading_deg(pose.heading) * std::numbers::pi / 180.0;
  out.timestamp = pose.timestamp;
  return out;
}

/// ENU point relative to `origin` back to geodetic; the heading (ENU radians)
/// is returned in degrees unchanged apart from the unit.
inline GeodeticPose enu_to_geodetic(const EnuPose& p, const GeodeticPose& origin) {
  origin.validate();
  const auto o = geodetic_to_ecef(origin.latitude, origin.longitude, origin.altitude);
  const double lat = origin.latitude * std::numbers::pi / 180.0;
  const double lon = origin.longitude * std::numbers::pi / 180.0;
  const double sl = std::sin(lat), cl = std::cos(lat), so = std::sin(lon), co = std::cos(lon);
  const double dx = -so * p.x - sl * co * p.y + cl * co * p.z;
  const double dy = co * p.x - sl * so * p.y + cl * so * p.z;
  const double dz = cl * p.y + sl * p.z;
  const auto g = ecef_to_geodetic(o[0] + dx, o[1] + dy, o[2] + dz);
  GeodeticPose out;
  out.latitude = g[0];
  out.longitude = g[1];
  out.altitude = g[2];
  out.heading = normalize_heading_deg(p.heading * 180.0 / std::numbers::pi);
  out.timestamp = p.timestamp;
  return out;
}

/// Projective map from pixels to receiver-frame ground coordinates,
/// scale-normalised so that h(2,2) = 1 whenever that entry is nonzero.
class Homography {
 public:
  Homography() : h_(Eigen::Matrix3d::Identity()) {}

  explicit Homography(const Eigen::Matrix3d& h) : h_(h) {
    require(h_.allFinite(), Errc::non_finite, "homography has non-finite entries");
    if (std::abs(h_(2, 2)) > 1e-12) h_ /= h_(2, 2);
    require(std::abs(h_.determinant()) > 1e-12, Errc::degenerate_configuration, "homography is singular");
    inv_ = h_.inverse();
  }

  static Homography from_row_major(std::span<const double> values) {
    require(values.size() == 9, Errc::invalid_argument, "homography needs 9 values");
    Eigen::Matrix3d m;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) m(r, c) = values[static_cast<std::size_t>(r * 3 + c)];
    return Homography(m);
  }

  const Eigen::Matrix3d& matrix() const noexcept { return h_; }
  const Eigen::Matrix3d& inverse() const noexcept { return inv_; }

  std::array<double, 9> row_major() const {
    std::array<double, 9> out{};
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) out[static_cast<std::size_t>(r * 3 + c)] = h_(r, c);
    return out;
  }

 private:
  Eigen::Matrix3d h_;
  Eigen::Matrix3d inv_ = Eigen::Matrix3d::Identity();
};

namespace detail {

inline Point2 apply_projective(const Eigen::Matrix3d& m, double a, double b) {
  const Eigen::Vector3d r = m * Eigen::Vector3d(a, b, 1.0);
  require(std::abs(r.z()) > 1e-12, Errc::horizon_singularity, "point lies on the horizon line of the plane");
  return {r.x() / r.z(), r.y() / r.z()};
}

// Similarity transform moving the centroid to the origin with mean distance sqrt(2).
inline Eigen::Matrix3d hartley_normalizer(const std::vector<Eigen::Vector2d>& pts) {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  double dist = 0.0;
  for (const auto& p : pts) dist += (p - mean).norm();
  dist /= static_cast<double>(pts.size());
  require(dist > 0.0, Errc::degenerate_configuration, "all calibration points coincide");
  const double s = std::sqrt(2.0) / dist;
  Eigen::Matrix3d t = Eigen::Matrix3d::Identity();
  t(0, 0) = s;
  t(1, 1) = s;
  t(0, 2) = -s * mean.x();
  t(1, 2) = -s * mean.y();
  return t;
}

inline bool any_three_collinear(const std::vector<Eigen::Vector2d>& pts, double rel_tol) {
  double scale = 0.0;
  for (const auto& p : pts)
    for (const auto& q : pts) scale = std::max(scale, (p - q).norm());
  const double tol = rel_tol * scale * scale;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      for (std::size_t k = j + 1; k < pts.size(); ++k) {
        const Eigen::Vector2d a = pts[j] - pts[i], b = pts[k] - pts[i];
        if (std::abs(a.x() * b.y() - a.y() * b.x()) <= tol) return true;
      }
  return false;
}

}  // namespace detail

inline Point2 pixel_to_ground(const Homography& h, Pixel px) { return detail::apply_projective(h.matrix(), px.u, px.v); }

inline Pixel ground_to_pixel(const Homography& h, Point2 g) {
  const Point2 p = detail::apply_projective(h.inverse(), g.x, g.y);
  return {p.x, p.y};
}

struct CalibrationPair {
  Pixel pixel;
  Point2 ground;
};

/// Normalised DLT: least algebraic error over all pairs after Hartley
/// conditioning of both point sets.
inline Homography estimate_homography(std::span<const CalibrationPair> pairs) {
  require(pairs.size() >= 4, Errc::insufficient_data,
          "homography needs at least 4 point pairs, got " + std::to_string(pairs.size()));
  std::vector<Eigen::Vector2d> src, dst;
  for (const auto& p : pairs) {
    require(std::isfinite(p.pixel.u) && std::isfinite(p.pixel.v) && std::isfinite(p.ground.x) &&
                std::isfinite(p.ground.y),
            Errc::non_finite, "calibration pair is not finite");
    src.emplace_back(p.pixel.u, p.pixel.v);
    dst.emplace_back(p.ground.x, p.ground.y);
  }
  if (pairs.size() == 4)
    require(!detail::any_three_collinear(src, 1e-9) && !detail::any_three_collinear(dst, 1e-9),
            Errc::degenerate_configuration, "three of the four calibration points are collinear");

  const Eigen::Matrix3d ts = detail::hartley_normalizer(src);
  const Eigen::Matrix3d td = detail::hartley_normalizer(dst);
  const auto n = static_cast<Eigen::Index>(pairs.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * n, 9);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector3d s = ts * src[static_cast<std::size_t>(i)].homogeneous();
    const Eigen::Vector3d d = td * dst[static_cast<std::size_t>(i)].homogeneous();
    // d x (H s) = 0, two independent rows
    a.block<1, 3>(2 * i, 3) = -d.z() * s.transpose();
    a.block<1, 3>(2 * i, 6) = d.y() * s.transpose();
    a.block<1, 3>(2 * i + 1, 0) = d.z() * s.transpose();
    a.block<1, 3>(2 * i + 1, 6) = -d.x() * s.transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  // With 4 pairs A is 8x9; the rank must be 8 for a unique solution.
  require(sv(std::min<Eigen::Index>(sv.size() - 1, 7)) > 1e-10 * sv(0), Errc::degenerate_configuration,
          "calibration pairs do not determine a unique homography");
  const Eigen::VectorXd hv = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << hv(0), hv(1), hv(2), hv(3), hv(4), hv(5), hv(6), hv(7), hv(8);
  return Homography(td.inverse() * hn * ts);
}

/// Receiver frame -> ENU: rotate by the vehicle heading, then translate.
inline Point2 ground_to_enu(Point2 p, const EnuPose& vehicle) {
  require(std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(vehicle.x) && std::isfinite(vehicle.y) &&
              std::isfinite(vehicle.heading),
          Errc::non_finite, "non-finite ground point or pose");
  const double s = std::sin(vehicle.heading), c = std::cos(vehicle.heading);
  return {vehicle.x + p.x * c + p.y * s, vehicle.y - p.x * s + p.y * c};
}

inline Point2 enu_to_ground(Point2 p, const EnuPose& vehicle) {
  const double s = std::sin(vehicle.heading), c = std::cos(vehicle.heading);
  const double dx = p.x - vehicle.x, dy = p.y - vehicle.y;
  return {dx * c - dy * s, dx * s + dy * c};
}

}  // namespace tadap
