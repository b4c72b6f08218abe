#include <gtest/gtest.h>

#include <random>

#include "tadap/labeler.hpp"

using namespace tadap;

namespace {

constexpr std::size_t kGrid = 8, kPatch = 4;

// Road patches are columns 0..3, drawn around e0; the rest around e1.
FrameBundle two_cluster_bundle(double noise = 0.05) {
  FrameBundle b;
  b.frame_id = "t";
  b.image = RgbImage(kGrid * kPatch, kGrid * kPatch);
  b.features = FeatureGrid(kGrid, kGrid, 8);
  std::mt19937 rng(4);
  std::normal_distribution<float> n(0.0f, static_cast<float>(noise));
  for (std::size_t r = 0; r < kGrid; ++r)
    for (std::size_t c = 0; c < kGrid; ++c) {
      auto f = b.features.at(r, c);
      for (float& v : f) v = n(rng);
      f[c < 4 ? 0 : 1] += 1.0f;
      const std::uint8_t shade = c < 4 ? 90 : 160;
      for (std::size_t y = r * kPatch; y < (r + 1) * kPatch; ++y)
        for (std::size_t x = c * kPatch; x < (c + 1) * kPatch; ++x)
          for (int k = 0; k < 3; ++k) b.image.at(y, x)[k] = shade;
    }
  b.trajectory = PatchMask(kGrid, kGrid, 0);
  for (std::size_t r = 4; r < kGrid; ++r) b.trajectory(r, 1) = b.trajectory(r, 2) = 1;
  return b;
}

PatchMask road_patches() {
  PatchMask m(kGrid, kGrid, 0);
  for (std::size_t r = 0; r < kGrid; ++r)
    for (std::size_t c = 0; c < 4; ++c) m(r, c) = 1;
  return m;
}

LabelConfig config(int iterations, bool crf) {
  LabelConfig cfg;
  cfg.patch_size = kPatch;
  cfg.iterations = iterations;
  cfg.use_crf = crf;
  cfg.horizon_row = 0;
  return cfg;
}

}  // namespace

TEST(LabelBaseline, RecoversTheTrajectoryCluster) {
  EXPECT_EQ(label_baseline(two_cluster_bundle(), config(1, false)).mask, road_patches());
}

TEST(LabelBaseline, FullTrajectoryIsThresholdedMap) {
  FrameBundle b = two_cluster_bundle();
  b.trajectory = PatchMask(kGrid, kGrid, 1);
  const PatchLabel l = label_baseline(b, config(1, false));
  EXPECT_EQ(l.mask, threshold_map(l.map.values, 0.5));
  EXPECT_TRUE(l.map.normalized);
}

TEST(LabelBaseline, ThresholdNearOneKeepsArgmaxOnly) {
  LabelConfig cfg = config(1, false);
  cfg.threshold = 1.0 - 1e-12;
  const PatchLabel l = label_baseline(two_cluster_bundle(), cfg);
  ASSERT_EQ(popcount(l.mask), 1u);
  for (std::size_t i = 0; i < l.mask.size(); ++i) EXPECT_EQ(l.mask[i] != 0, l.map.values[i] == 1.0);
}

TEST(LabelBaseline, LowerThresholdNeverRemovesPatches) {
  const FrameBundle b = two_cluster_bundle(0.6);
  PatchMask prev(kGrid, kGrid, 0);
  for (double t : {0.95, 0.8, 0.6, 0.5, 0.3, 0.1}) {
    LabelConfig cfg = config(1, false);
    cfg.threshold = t;
    const PatchMask m = label_baseline(b, cfg).mask;
    for (std::size_t i = 0; i < m.size(); ++i) EXPECT_GE(m[i], prev[i]);
    prev = m;
  }
}

TEST(LabelBaseline, EmptyTrajectoryFails) {
  FrameBundle b = two_cluster_bundle();
  b.trajectory = PatchMask(kGrid, kGrid, 0);
  try {
    label_baseline(b, config(1, false));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::empty_sample);
  }
}

TEST(LabelSecondIteration, FixedPointWhenLabelEqualsTrajectory) {
  FrameBundle b = two_cluster_bundle();
  b.trajectory = road_patches();
  const PatchLabel first = label_baseline(b, config(1, false));
  const PatchLabel second = label_second_iteration(b, config(2, false));
  EXPECT_EQ(second.mask, first.mask);
  EXPECT_EQ(second.map.values, first.map.values);
}

TEST(LabelSecondIteration, UniformGridChangesNothing) {
  FrameBundle b = two_cluster_bundle();
  for (std::size_t i = 0; i < b.features.patches(); ++i)
    for (std::size_t k = 0; k < 8; ++k) b.features.patch(i)[k] = static_cast<float>(k + 1);
  EXPECT_EQ(popcount(label_second_iteration(b, config(2, false)).mask), kGrid * kGrid);
}

TEST(LabelSecondIteration, WidensTowardTheCluster) {
  // The trajectory only touches road patches in column 1; the first pass
  // already spreads to the cluster, the second keeps it.
  FrameBundle b = two_cluster_bundle(0.3);
  b.trajectory = PatchMask(kGrid, kGrid, 0);
  b.trajectory(7, 1) = 1;
  const PatchMask first = label_baseline(b, config(1, false)).mask;
  const PatchMask second = label_second_iteration(b, config(2, false)).mask;
  std::size_t tp1 = 0, tp2 = 0;
  const PatchMask road = road_patches();
  for (std::size_t i = 0; i < road.size(); ++i) {
    tp1 += road[i] && first[i];
    tp2 += road[i] && second[i];
  }
  EXPECT_GE(tp2, tp1);
}

TEST(TadapLabel, OneIterationWithoutCrfIsUpsampledBaseline) {
  const FrameBundle b = two_cluster_bundle();
  const LabelConfig cfg = config(1, false);
  const FrameLabel l = tadap_label(b, cfg);
  EXPECT_EQ(l.mask, upsample_nearest(label_baseline(b, cfg).mask, b.image.height, b.image.width));
  EXPECT_EQ(l.diagnostics.iterations_run, 1);
  EXPECT_FALSE(l.diagnostics.crf_applied);
}

TEST(TadapLabel, HorizonIsAlwaysClear) {
  LabelConfig cfg = config(2, true);
  cfg.horizon_row = 10;
  const FrameLabel l = tadap_label(two_cluster_bundle(0.3), cfg);
  for (std::size_t r = 0; r < 10; ++r)
    for (std::size_t c = 0; c < l.mask.cols(); ++c) EXPECT_EQ(l.mask(r, c), 0);
  EXPECT_GT(popcount(l.mask), 0u);
  EXPECT_TRUE(l.diagnostics.crf_applied);
}

TEST(TadapLabel, DefaultHorizonIsThreeEighths) {
  LabelConfig cfg;
  EXPECT_EQ(cfg.horizon_for(640), 240u);
  EXPECT_EQ(cfg.horizon_for(644), 241u);
}

TEST(TadapLabel, Deterministic) {
  const FrameBundle b = two_cluster_bundle(0.4);
  const LabelConfig cfg = config(2, true);
  EXPECT_EQ(tadap_label(b, cfg).mask, tadap_label(b, cfg).mask);
}

TEST(TadapLabel, RejectsMismatchedBundles) {
  FrameBundle b = two_cluster_bundle();
  b.image = RgbImage(30, 32);
  EXPECT_THROW(tadap_label(b, config(1, false)), Error);
  LabelConfig bad = config(3, false);
  EXPECT_THROW(tadap_label(two_cluster_bundle(), bad), Error);
}

TEST(Scenes, ParseNames) {
  EXPECT_EQ(parse_scene("highway"), Scene::highway);
  EXPECT_EQ(scene_name(Scene::intersection), "intersection");
  EXPECT_THROW(parse_scene("desert"), Error);
}
