#include <gtest/gtest.h>

#include <random>

#include "tadap/eval.hpp"

using namespace tadap;

namespace {

PixelMask random_mask(std::size_t h, std::size_t w, std::mt19937& rng) {
  PixelMask m(h, w);
  for (auto& b : m.values()) b = rng() % 2;
  return m;
}

FrameResult frame(Scene s, std::uint64_t tp, std::uint64_t fp, std::uint64_t fn, std::uint64_t tn) {
  return {"f", s, {tp, fp, fn, tn}};
}

}  // namespace

TEST(CropRoi, Rows) {
  const auto c = crop_roi(PixelMask(640, 640, 1), 240);
  EXPECT_EQ(c.roi.end_row - c.roi.first_row, 400u);
  EXPECT_EQ(popcount(c.mask), 400u * 640u);
  const auto full = crop_roi(PixelMask(10, 4, 1), 0, 0);
  EXPECT_EQ(popcount(full.mask), 40u);
  EXPECT_EQ(make_roi(10, 2, 3).end_row, 7u);
  try {
    crop_roi(PixelMask(10, 4, 1), 10);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::empty_roi);
  }
}

TEST(Confusion, Identities) {
  std::mt19937 rng(1);
  const PixelMask gt = random_mask(16, 16, rng);
  PixelMask inv = gt;
  for (auto& b : inv.values()) b = !b;
  const Roi roi = make_roi(16, 0);
  const auto same = confusion(gt, gt, roi);
  EXPECT_EQ(same.fp + same.fn, 0u);
  const auto opposite = confusion(inv, gt, roi);
  EXPECT_EQ(opposite.tp + opposite.tn, 0u);
  EXPECT_THROW(confusion(PixelMask(16, 15), gt, roi), Error);
}

TEST(Confusion, MatchesNestedLoop) {
  std::mt19937 rng(2);
  for (int t = 0; t < 20; ++t) {
    const PixelMask p = random_mask(8, 8, rng), g = random_mask(8, 8, rng);
    const std::size_t horizon = rng() % 4, hood = rng() % 3;
    ConfusionCounts oracle;
    for (std::size_t r = 0; r < 8; ++r)
      for (std::size_t c = 0; c < 8; ++c) {
        if (r < horizon || r >= 8 - hood) continue;
        if (p(r, c) && g(r, c)) ++oracle.tp;
        if (p(r, c) && !g(r, c)) ++oracle.fp;
        if (!p(r, c) && g(r, c)) ++oracle.fn;
        if (!p(r, c) && !g(r, c)) ++oracle.tn;
      }
    EXPECT_EQ(confusion(p, g, make_roi(8, horizon, hood)), oracle);
  }
}

TEST(Metrics, HandArithmetic) {
  const Metrics m = metrics({50, 10, 10, 0});
  EXPECT_NEAR(m.iou, 50.0 / 70.0, 1e-15);
  EXPECT_NEAR(m.iou, 0.7143, 1e-4);
  EXPECT_NEAR(m.f1, 100.0 / 120.0, 1e-15);
  EXPECT_NEAR(m.precision, 50.0 / 60.0, 1e-15);
  EXPECT_NEAR(m.recall, 50.0 / 60.0, 1e-15);
}

TEST(Metrics, DegenerateConventions) {
  const Metrics perfect = metrics({20, 0, 0, 5});
  EXPECT_EQ(perfect.iou, 1.0);
  EXPECT_EQ(perfect.f1, 1.0);
  const Metrics empty = metrics({0, 0, 0, 9});
  EXPECT_EQ(empty.iou, 1.0);
  EXPECT_EQ(empty.precision, 1.0);
  EXPECT_EQ(empty.recall, 1.0);
  const Metrics missed = metrics({0, 0, 4, 9});
  EXPECT_EQ(missed.precision, 0.0);
  EXPECT_EQ(missed.recall, 0.0);
}

TEST(Metrics, F1IouIdentity) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 1000; ++t) {
    const ConfusionCounts c{rng() % 1000 + 1, rng() % 1000, rng() % 1000, rng() % 1000};
    const Metrics m = metrics(c);
    EXPECT_NEAR(m.f1, 2 * m.iou / (1 + m.iou), 1e-12);
    EXPECT_NEAR(m.f1, 2 * m.precision * m.recall / (m.precision + m.recall), 1e-12);
  }
}

TEST(PrCurve, EndpointsAndMonotoneRecall) {
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<PatchMap> scores;
  std::vector<PixelMask> gts;
  for (int f = 0; f < 3; ++f) {
    PatchMap s(4, 4);
    for (double& v : s.values()) v = u(rng);
    scores.push_back(s);
    gts.push_back(random_mask(16, 16, rng));
  }
  std::vector<ScoredFrame> frames;
  for (int f = 0; f < 3; ++f) frames.push_back({&scores[f], &gts[f]});
  double max_score = 0;
  for (const auto& s : scores) max_score = std::max(max_score, *std::max_element(s.values().begin(), s.values().end()));

  const auto curve = pr_curve(frames, {0.0, 0.25, 0.5, 0.75, std::nextafter(max_score, 2.0)}, 2);
  EXPECT_EQ(curve.front().recall, 1.0);
  EXPECT_EQ(curve.back().recall, 0.0);
  for (std::size_t i = 1; i < curve.size(); ++i) EXPECT_LE(curve[i].recall, curve[i - 1].recall);

  const auto exact = pr_curve_exact(frames, 2);
  for (std::size_t i = 1; i < exact.size(); ++i) {
    EXPECT_GE(exact[i].recall, exact[i - 1].recall);
    EXPECT_LT(exact[i].threshold, exact[i - 1].threshold);
  }
  // Every exact sample agrees with the thresholded curve at its own score.
  for (const auto& s : exact) {
    const auto at = pr_curve(frames, {s.threshold}, 2).front();
    EXPECT_EQ(at.counts, s.counts);
  }
  EXPECT_THROW(pr_curve({}, {0.5}, 0), Error);
}

TEST(Aggregate, SingleScene) {
  const EvalReport r = aggregate({frame(Scene::highway, 5, 1, 2, 10), frame(Scene::highway, 7, 0, 1, 3)});
  EXPECT_EQ(r.scenes.at("all").counts, r.scenes.at("highway").counts);
  EXPECT_EQ(r.scenes.at("all").frames, 2u);
  EXPECT_EQ(r.scenes.at("suburban").frames, 0u);
}

TEST(Aggregate, MicroAveragePoolsCounts) {
  const EvalReport r = aggregate({frame(Scene::suburban, 90, 10, 0, 0), frame(Scene::countryside, 1, 0, 9, 0)});
  const auto& all = r.scenes.at("all");
  EXPECT_NEAR(all.micro.iou, 91.0 / 110.0, 1e-15);
  EXPECT_NEAR(all.macro.iou, (0.9 + 0.1) / 2, 1e-15);
  EXPECT_NE(all.micro.iou, all.macro.iou);
}

TEST(Aggregate, PermutationInvariant) {
  std::vector<FrameResult> f{frame(Scene::suburban, 9, 1, 3, 2), frame(Scene::highway, 4, 4, 1, 0),
                             frame(Scene::intersection, 7, 2, 2, 8)};
  const EvalReport a = aggregate(f);
  std::reverse(f.begin(), f.end());
  const EvalReport b = aggregate(f);
  EXPECT_EQ(a.scenes.at("all").counts, b.scenes.at("all").counts);
  EXPECT_EQ(report_text(a), report_text(b));
}

TEST(Aggregate, EmptyIsAnError) { EXPECT_THROW(aggregate({}), Error); }

TEST(Report, JsonHasEveryScene) {
  const auto j = report_json(aggregate({frame(Scene::suburban, 9, 1, 3, 2)}, "cfg"));
  EXPECT_EQ(j.dump().find("countryside") != std::string::npos, true);
  EXPECT_FALSE(report_text(aggregate({frame(Scene::suburban, 9, 1, 3, 2)})).empty());
}
