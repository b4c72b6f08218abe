#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "tadap/calibration.hpp"
#include "tadap/geometry.hpp"
#include "tadap/gnss_log.hpp"

using namespace tadap;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Meridian and prime-vertical radii of curvature.
double meridian_radius(double lat_deg) {
  const double s = std::sin(lat_deg * kDeg);
  return wgs84::a * (1 - wgs84::e2) / std::pow(1 - wgs84::e2 * s * s, 1.5);
}
double vertical_radius(double lat_deg) {
  const double s = std::sin(lat_deg * kDeg);
  return wgs84::a / std::sqrt(1 - wgs84::e2 * s * s);
}

double haversine(double lat1, double lon1, double lat2, double lon2, double r) {
  const double dlat = (lat2 - lat1) * kDeg, dlon = (lon2 - lon1) * kDeg;
  const double h = std::pow(std::sin(dlat / 2), 2) +
                   std::cos(lat1 * kDeg) * std::cos(lat2 * kDeg) * std::pow(std::sin(dlon / 2), 2);
  return 2 * r * std::asin(std::sqrt(h));
}

GeodeticPose geo(double lat, double lon, double heading = 0) {
  GeodeticPose p;
  p.latitude = lat;
  p.longitude = lon;
  p.heading = heading;
  return p;
}

}  // namespace

TEST(GeodeticToEnu, OriginMapsToZero) {
  const auto o = geo(61.45, 23.85, 90);
  const EnuPose e = geodetic_to_enu(o, o);
  EXPECT_NEAR(e.x, 0, 1e-9);
  EXPECT_NEAR(e.y, 0, 1e-9);
  EXPECT_NEAR(e.heading, std::numbers::pi / 2, 1e-12);
}

TEST(GeodeticToEnu, SmallNorthStepMatchesMeridianArc) {
  const auto o = geo(61.45, 23.85);
  const EnuPose e = geodetic_to_enu(geo(61.451, 23.85), o);
  const double expect = meridian_radius(61.4505) * 0.001 * kDeg;
  EXPECT_NEAR(e.x, 0, 1e-6);
  EXPECT_NEAR(e.y, expect, 1e-3);
}

TEST(GeodeticToEnu, AxisDistancesMatchHaversineWithLocalRadius) {
  const auto o = geo(61.45, 23.85);
  // 100 m north and 100 m east, on spheres of the matching local radius.
  const double dlat = 100.0 / meridian_radius(61.45) / kDeg;
  const double dlon = 100.0 / (vertical_radius(61.45) * std::cos(61.45 * kDeg)) / kDeg;
  const EnuPose n = geodetic_to_enu(geo(61.45 + dlat, 23.85), o);
  const EnuPose e = geodetic_to_enu(geo(61.45, 23.85 + dlon), o);
  EXPECT_NEAR(std::hypot(n.x, n.y), haversine(61.45, 23.85, 61.45 + dlat, 23.85, meridian_radius(61.45)), 0.01);
  EXPECT_NEAR(std::hypot(e.x, e.y),
              haversine(61.45, 23.85, 61.45, 23.85 + dlon, vertical_radius(61.45)), 0.01);
}

TEST(GeodeticToEnu, RoundTrip) {
  const auto o = geo(61.45, 23.85);
  EnuPose p;
  p.x = 37.5;
  p.y = -81.25;
  p.heading = 1.0;
  const EnuPose back = geodetic_to_enu(enu_to_geodetic(p, o), o);
  EXPECT_NEAR(back.x, p.x, 1e-6);
  EXPECT_NEAR(back.y, p.y, 1e-6);
  EXPECT_NEAR(back.heading, p.heading, 1e-12);
}

TEST(GeodeticToEnu, RejectsOutOfRangeLatitude) {
  const auto o = geo(61.45, 23.85);
  try {
    geodetic_to_enu(geo(91, 0), o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::invalid_pose);
  }
}

TEST(Homography, UnitSquareToItselfIsIdentity) {
  const std::array<CalibrationPair, 4> pairs{{{{0, 0}, {0, 0}}, {{1, 0}, {1, 0}}, {{1, 1}, {1, 1}}, {{0, 1}, {0, 1}}}};
  const Homography h = estimate_homography(pairs);
  EXPECT_TRUE(h.matrix().isApprox(Eigen::Matrix3d::Identity(), 1e-9));
}

TEST(Homography, RecoversScaleAndTranslation) {
  Eigen::Matrix3d truth;
  truth << 2, 0, 3, 0, 2, -1, 0, 0, 1;
  const Homography h0(truth);
  std::vector<CalibrationPair> pairs;
  for (double u : {0.0, 10.0, 200.0})
    for (double v : {5.0, 90.0, 300.0}) pairs.push_back({{u, v}, pixel_to_ground(h0, {u, v})});
  const Homography h = estimate_homography(pairs);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(h.matrix()(r, c), truth(r, c), 1e-9);
}

TEST(Homography, InvariantToCommonPrescaling) {
  Eigen::Matrix3d truth;
  truth << 0.02, 0.001, -5, 0.0005, 0.03, 2, 0.00001, 0.0002, 1;
  const Homography h0(truth);
  std::vector<CalibrationPair> pairs, scaled;
  for (double u : {10.0, 300.0, 600.0})
    for (double v : {300.0, 450.0, 640.0}) {
      const Point2 g = pixel_to_ground(h0, {u, v});
      pairs.push_back({{u, v}, g});
      scaled.push_back({{u * 7.5, v * 7.5}, g});
    }
  const Homography a = estimate_homography(pairs);
  const Homography b = estimate_homography(scaled);
  Eigen::Matrix3d s = Eigen::Matrix3d::Identity();
  s(0, 0) = s(1, 1) = 7.5;
  const Eigen::Matrix3d bs = b.matrix() * s;
  EXPECT_TRUE((bs / bs(2, 2)).isApprox(a.matrix(), 1e-9));
}

TEST(Homography, CollinearPixelsAreDegenerate) {
  const std::array<CalibrationPair, 4> pairs{{{{0, 0}, {0, 0}}, {{1, 1}, {1, 0}}, {{2, 2}, {1, 1}}, {{0, 5}, {0, 1}}}};
  try {
    estimate_homography(pairs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::degenerate_configuration);
  }
}

TEST(Homography, TooFewPairs) {
  const std::array<CalibrationPair, 3> pairs{{{{0, 0}, {0, 0}}, {{1, 0}, {1, 0}}, {{0, 1}, {0, 1}}}};
  try {
    estimate_homography(pairs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::insufficient_data);
  }
}

TEST(Homography, PixelGroundRoundTrip) {
  Eigen::Matrix3d m;
  m << 0.01, 0, -3.2, 0, -0.002, 4, 0, 0.003, -0.7;
  const Homography h(m);
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(0, 640), v(300, 640);
  for (int i = 0; i < 200; ++i) {
    const Pixel px{u(rng), v(rng)};
    const Pixel back = ground_to_pixel(h, pixel_to_ground(h, px));
    EXPECT_NEAR(back.u, px.u, 1e-9);
    EXPECT_NEAR(back.v, px.v, 1e-9);
  }
}

TEST(Homography, HorizonLineIsNotFinite) {
  Eigen::Matrix3d m;
  m << 1, 0, 0, 0, 1, 0, 0, 1, -100;  // w = v - 100
  const Homography h(m);
  try {
    pixel_to_ground(h, {20, 100});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::horizon_singularity);
  }
}

TEST(GroundToEnu, RotatesByHeading) {
  EnuPose east;
  east.x = 10;
  east.y = 5;
  east.heading = std::numbers::pi / 2;  // facing east
  // One metre ahead and two to the right of an east-facing vehicle.
  const Point2 p = ground_to_enu({2, 1}, east);
  EXPECT_NEAR(p.x, 11, 1e-12);
  EXPECT_NEAR(p.y, 3, 1e-12);
  const Point2 back = enu_to_ground(p, east);
  EXPECT_NEAR(back.x, 2, 1e-12);
  EXPECT_NEAR(back.y, 1, 1e-12);
}

TEST(GnssLog, ParsesAndRejects) {
  std::istringstream ok("0.0,61.45,23.85,100,45\n0.1,61.4501,23.85,100,405\n");
  const auto log = read_gnss_log(ok);
  ASSERT_EQ(log.size(), 2u);
  EXPECT_DOUBLE_EQ(log[1].heading, 45);
  std::istringstream bad("0.0,61.45,23.85,100\n");
  EXPECT_THROW(read_gnss_log(bad), Error);
  std::istringstream unsorted("1.0,61.45,23.85,100,0\n0.5,61.45,23.85,100,0\n");
  EXPECT_THROW(read_gnss_log(unsorted), Error);
}

TEST(GnssLog, ClosestPoseRespectsTolerance) {
  std::vector<EnuPose> log(3);
  log[0].timestamp = 0.0;
  log[1].timestamp = 1.0;
  log[2].timestamp = 2.0;
  EXPECT_EQ(closest_pose(log, 1.04).value(), 1u);
  EXPECT_FALSE(closest_pose(log, 1.5).has_value());
}

TEST(Calibration, RoundTripsThroughText) {
  Calibration cal;
  Eigen::Matrix3d m;
  m << 0.01, 0.002, -3, 0.001, -0.02, 5, 0.0001, 0.003, -0.7;
  cal.homography = Homography(m);
  cal.vehicle_width = 1.95;
  std::stringstream s;
  write_calibration(s, cal);
  const Calibration back = read_calibration(s);
  EXPECT_DOUBLE_EQ(back.vehicle_width, 1.95);
  EXPECT_TRUE(back.homography.matrix().isApprox(cal.homography.matrix(), 1e-15));
}
