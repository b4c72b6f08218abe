#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "tadap/synth.hpp"
#include "tadap/trajectory.hpp"

using namespace tadap;

namespace {

EnuPose pose(double x, double y, double t = 0) {
  EnuPose p;
  p.x = x;
  p.y = y;
  p.timestamp = t;
  return p;
}

std::vector<EnuPose> straight_log(std::size_t n, double step = 1.0) {
  std::vector<EnuPose> log;
  for (std::size_t i = 0; i < n; ++i) log.push_back(pose(0, step * static_cast<double>(i), 0.1 * static_cast<double>(i)));
  return log;
}

std::vector<EnuPose> circle_points(double cx, double cy, double r, int n, double a0, double a1) {
  std::vector<EnuPose> out;
  for (int i = 0; i < n; ++i) {
    const double a = a0 + (a1 - a0) * i / (n - 1);
    out.push_back(pose(cx + r * std::cos(a), cy + r * std::sin(a), i));
  }
  return out;
}

template <class F>
Errc error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::io;
}

// 20x20 image whose pixel (u, v) sits on the ground at (u - 10, v).
Homography shifted_identity() {
  Eigen::Matrix3d m;
  m << 1, 0, -10, 0, 1, 0, 0, 0, 1;
  return Homography(m);
}

}  // namespace

TEST(WindowFuturePoses, StraightLogStopsAtHorizon) {
  const auto log = straight_log(100);
  const auto w = window_future_poses(log, 0.0, 50.0);
  ASSERT_EQ(w.size(), 51u);
  EXPECT_DOUBLE_EQ(w.back().y - w.front().y, 50.0);
}

TEST(WindowFuturePoses, StartsAtFirstPoseAtOrAfterFrameTime) {
  const auto log = straight_log(100);
  const auto w = window_future_poses(log, 0.95, 10.0);
  EXPECT_DOUBLE_EQ(w.front().y, 10.0);
  EXPECT_EQ(w.size(), 11u);
}

TEST(WindowFuturePoses, StationaryPosesAddNoLength) {
  std::vector<EnuPose> log;
  double t = 0;
  for (int i = 0; i <= 60; ++i) {
    log.push_back(pose(0, i, t));
    t += 0.1;
    if (i == 5 || i == 6)
      for (int k = 0; k < 3; ++k, t += 0.1) log.push_back(pose(0, i, t));
  }
  const auto w = window_future_poses(log, 0.0, 50.0);
  double length = 0;
  for (std::size_t i = 1; i < w.size(); ++i) length += std::hypot(w[i].x - w[i - 1].x, w[i].y - w[i - 1].y);
  EXPECT_DOUBLE_EQ(length, 50.0);
  EXPECT_EQ(w.size(), 51u + 6u);
}

TEST(WindowFuturePoses, InsufficientTrajectory) {
  const auto log = straight_log(100);
  EXPECT_EQ(error_of([&] { window_future_poses(log, 1e3); }), Errc::insufficient_trajectory);
  EXPECT_EQ(error_of([&] { window_future_poses(log, 9.7, 50.0, 5.0); }), Errc::insufficient_trajectory);
}

TEST(FitArc, ExactCircle) {
  const auto pts = circle_points(5, 5, 20, 10, 0.1, 1.2);
  const ArcModel arc = fit_arc(pts);
  ASSERT_EQ(arc.kind, ArcModel::Kind::circle);
  EXPECT_NEAR(arc.center.x, 5, 20e-6);
  EXPECT_NEAR(arc.center.y, 5, 20e-6);
  EXPECT_NEAR(arc.radius, 20, 20e-6);
  EXPECT_LT(arc.rms_residual, 1e-9);
  EXPECT_LT(arc.span_start, arc.span_end);
  EXPECT_NEAR(arc.span_end - arc.span_start, 20 * 1.1, 1e-6);
}

TEST(FitArc, CollinearFallsBackToLine) {
  std::vector<EnuPose> pts;
  for (int i = 0; i < 8; ++i) pts.push_back(pose(1 + 3.0 * i, 2 + 4.0 * i, i));
  const ArcModel arc = fit_arc(pts);
  ASSERT_EQ(arc.kind, ArcModel::Kind::line);
  EXPECT_NEAR(arc.direction.x, 0.6, 1e-9);
  EXPECT_NEAR(arc.direction.y, 0.8, 1e-9);
}

TEST(FitArc, HugeRadiusFallsBackToLine) {
  const auto pts = circle_points(0, 0, 50000, 10, 0, 50.0 / 50000);
  EXPECT_EQ(fit_arc(pts).kind, ArcModel::Kind::line);
}

TEST(FitArc, CoincidentPosesAreDegenerate) {
  const std::vector<EnuPose> pts(5, pose(3, 4));
  EXPECT_EQ(error_of([&] { fit_arc(pts); }), Errc::degenerate_poses);
}

TEST(FitArc, InvariantToRigidMotion) {
  std::mt19937 rng(11);
  std::normal_distribution<double> noise(0, 0.1);
  auto pts = circle_points(-30, 12, 45, 25, -0.3, 0.8);
  for (auto& p : pts) {
    p.x += noise(rng);
    p.y += noise(rng);
  }
  const double th = 0.7, tx = 120, ty = -45;
  std::vector<EnuPose> moved;
  for (const auto& p : pts)
    moved.push_back(pose(std::cos(th) * p.x - std::sin(th) * p.y + tx, std::sin(th) * p.x + std::cos(th) * p.y + ty));
  const ArcModel a = fit_arc(pts), b = fit_arc(moved);
  ASSERT_EQ(a.kind, ArcModel::Kind::circle);
  ASSERT_EQ(b.kind, ArcModel::Kind::circle);
  EXPECT_NEAR(b.radius, a.radius, 1e-9 * a.radius);
  EXPECT_NEAR(b.rms_residual, a.rms_residual, 1e-9);
  EXPECT_NEAR(b.center.x, std::cos(th) * a.center.x - std::sin(th) * a.center.y + tx, 1e-8);
  EXPECT_NEAR(b.center.y, std::sin(th) * a.center.x + std::cos(th) * a.center.y + ty, 1e-8);
}

TEST(RasterizeCorridor, StraightBand) {
  const auto poses = straight_log(31);
  const ArcModel arc = fit_arc(poses);
  const PixelMask m = rasterize_corridor(arc, shifted_identity(), poses.front(), 2.0, 20, 20, 0);
  for (std::size_t r = 0; r < 20; ++r)
    for (std::size_t c = 0; c < 20; ++c)
      EXPECT_EQ(m(r, c), std::abs(static_cast<double>(c) - 10) <= 1 ? 1 : 0) << r << "," << c;
}

TEST(RasterizeCorridor, NothingAboveHorizon) {
  const auto poses = straight_log(31);
  const PixelMask m = rasterize_corridor(fit_arc(poses), shifted_identity(), poses.front(), 2.0, 20, 20, 10);
  for (std::size_t r = 0; r < 10; ++r)
    for (std::size_t c = 0; c < 20; ++c) EXPECT_EQ(m(r, c), 0);
  EXPECT_EQ(popcount(m), 30u);
}

TEST(RasterizeCorridor, AreaGrowsWithWidth) {
  const CanonicalCamera cam = CanonicalCamera::for_image(128, 1.5);
  const auto poses = circle_points(60, 0, 60, 30, std::numbers::pi, std::numbers::pi - 0.8);
  const ArcModel arc = fit_arc(poses);
  EnuPose vehicle = poses.front();
  std::size_t last = 0;
  for (double w : {0.5, 1.0, 1.8, 3.0, 6.0}) {
    const std::size_t n = popcount(rasterize_corridor(arc, cam.homography(), vehicle, w, 128, 128, 48));
    EXPECT_GE(n, last);
    last = n;
  }
  EXPECT_GT(last, 0u);
}

TEST(RemoveVehicleBoxes, EmptyListIsIdentity) {
  PixelMask m(10, 10, 1);
  EXPECT_EQ(remove_vehicle_boxes(m, {}), m);
}

TEST(RemoveVehicleBoxes, FullImageBoxClearsAll) {
  const std::vector<BoundingBox> boxes{{"f", "car", 0.9, 0, 0, 10, 10}};
  EXPECT_EQ(popcount(remove_vehicle_boxes(PixelMask(10, 10, 1), boxes)), 0u);
}

TEST(RemoveVehicleBoxes, DropsExactlyTheOverlap) {
  PixelMask band(40, 40, 0);
  for (std::size_t r = 0; r < 40; ++r)
    for (std::size_t c = 15; c < 25; ++c) band(r, c) = 1;
  const std::vector<BoundingBox> boxes{{"f", "truck", 0.7, 20, 5, 33, 17}};
  // Box columns 20..32 meet band columns 20..24; rows 5..16.
  const std::size_t overlap = (25 - 20) * (17 - 5);
  EXPECT_EQ(popcount(remove_vehicle_boxes(band, boxes)), popcount(band) - overlap);
}

TEST(RemoveVehicleBoxes, IgnoresWeakAndNonVehicleBoxes) {
  const PixelMask m(10, 10, 1);
  const std::vector<BoundingBox> boxes{{"f", "car", 0.3, 0, 0, 10, 10}, {"f", "person", 0.99, 0, 0, 10, 10}};
  EXPECT_EQ(remove_vehicle_boxes(m, boxes), m);
}

TEST(MaskToPatchGrid, Geometry) {
  EXPECT_EQ(mask_to_patch_grid(PixelMask(644, 644, 1)), PatchMask(46, 46, 1));
  PixelMask one(644, 644, 0);
  for (std::size_t r = 28; r < 42; ++r)
    for (std::size_t c = 14; c < 28; ++c) one(r, c) = 1;
  const PatchMask g = mask_to_patch_grid(one);
  EXPECT_EQ(popcount(g), 1u);
  EXPECT_EQ(g(2, 1), 1);
  EXPECT_EQ(error_of([] { mask_to_patch_grid(PixelMask(640, 644, 1)); }), Errc::dimension_mismatch);
}

TEST(MaskToPatchGrid, CoverageThresholdAndBound) {
  PixelMask m(28, 28, 0);
  for (std::size_t r = 0; r < 7; ++r)
    for (std::size_t c = 0; c < 14; ++c) m(r, c) = 1;  // exactly half of patch (0, 0)
  for (std::size_t r = 14; r < 20; ++r)
    for (std::size_t c = 14; c < 28; ++c) m(r, c) = 1;  // 84 of 196 in patch (1, 1)
  const PatchMask g = mask_to_patch_grid(m, 14, 0.5);
  EXPECT_EQ(g(0, 0), 1);
  EXPECT_EQ(g(1, 1), 0);
  EXPECT_LE(static_cast<double>(popcount(g)), std::ceil(static_cast<double>(popcount(m)) / (0.5 * 196)));
}
