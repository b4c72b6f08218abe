#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "tadap/head.hpp"

using namespace tadap;

namespace {

struct Dataset {
  std::vector<FeatureGrid> grids;
  std::vector<PatchMask> labels;

  std::vector<std::pair<const FeatureGrid*, const PatchMask*>> view(std::size_t from, std::size_t to) const {
    std::vector<std::pair<const FeatureGrid*, const PatchMask*>> out;
    for (std::size_t i = from; i < to; ++i) out.emplace_back(&grids[i], &labels[i]);
    return out;
  }
};

// Two clusters at +-10 along the first axis, unit noise elsewhere.
Dataset separable(std::size_t frames, unsigned seed) {
  Dataset d;
  std::mt19937 rng(seed);
  std::normal_distribution<float> n;
  for (std::size_t f = 0; f < frames; ++f) {
    FeatureGrid g(10, 10, 8);
    PatchMask m(10, 10, 0);
    for (std::size_t i = 0; i < g.patches(); ++i) {
      m[i] = rng() % 2;
      for (float& v : g.patch(i)) v = n(rng);
      g.patch(i)[0] += m[i] ? 10.0f : -10.0f;
    }
    d.grids.push_back(std::move(g));
    d.labels.push_back(std::move(m));
  }
  return d;
}

TrainConfig patch_batches() {
  TrainConfig cfg;
  cfg.batch_unit = BatchUnit::patches;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST(Predict, ZeroWeightsGiveHalf) {
  const Dataset d = separable(1, 1);
  HeadWeights w;
  w.weight.assign(8, 0.0f);
  const Prediction p = predict(d.grids[0], w);
  for (std::size_t i = 0; i < p.probability.size(); ++i) {
    EXPECT_EQ(p.probability[i], 0.5);
    EXPECT_EQ(p.mask[i], 1);
  }
}

TEST(Predict, ProbabilitiesStayInsideOpenInterval) {
  const Dataset d = separable(1, 2);
  HeadWeights w;
  w.weight.assign(8, 0.0f);
  w.weight[0] = 1e4f;
  const Prediction p = predict(d.grids[0], w);
  for (double v : p.probability.values()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(Predict, MaskDependsOnLogitSign) {
  const Dataset d = separable(1, 3);
  HeadWeights w;
  w.weight = {0.3f, -0.1f, 0.2f, 0, 0, 0.05f, 0, 0};
  w.bias = 0.4f;
  const Prediction p = predict(d.grids[0], w, 0.7);
  const double cut = std::log(0.7 / 0.3);
  for (std::size_t i = 0; i < d.grids[0].patches(); ++i) {
    double z = w.bias;
    for (std::size_t k = 0; k < 8; ++k) z += static_cast<double>(w.weight[k]) * d.grids[0].patch(i)[k];
    EXPECT_EQ(p.mask[i], z >= cut ? 1 : 0);
  }
}

TEST(Predict, DimMismatch) {
  HeadWeights w;
  w.weight.assign(7, 0.0f);
  EXPECT_THROW(predict(separable(1, 4).grids[0], w), Error);
}

TEST(TrainHead, SeparableDataIsLearned) {
  const Dataset d = separable(6, 6);
  const HeadWeights w = train_head(d.view(0, 4), d.view(4, 6), patch_batches());
  std::size_t correct = 0, total = 0;
  for (std::size_t f = 0; f < 6; ++f) {
    const Prediction p = predict(d.grids[f], w);
    for (std::size_t i = 0; i < p.mask.size(); ++i, ++total) correct += p.mask[i] == d.labels[f][i];
  }
  EXPECT_GE(static_cast<double>(correct) / static_cast<double>(total), 0.99);
  EXPECT_EQ(correct, total);
  EXPECT_GE(w.epoch, 1);
}

TEST(TrainHead, Reproducible) {
  const Dataset d = separable(4, 7);
  TrainConfig cfg = patch_batches();
  cfg.epochs = 5;
  EXPECT_EQ(train_head(d.view(0, 3), d.view(3, 4), cfg), train_head(d.view(0, 3), d.view(3, 4), cfg));
}

TEST(TrainHead, RejectsSingleClassAndZeroEpochs) {
  Dataset d = separable(2, 8);
  for (auto& m : d.labels) std::fill(m.values().begin(), m.values().end(), 1);
  try {
    train_head(d.view(0, 1), d.view(1, 2), patch_batches());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::degenerate_training);
  }
  TrainConfig cfg;
  cfg.epochs = 0;
  EXPECT_THROW(train_head(d.view(0, 1), d.view(1, 2), cfg), Error);
}

TEST(HeadLoss, MatchesFiniteDifferences) {
  const Dataset d = separable(1, 9);
  const std::vector<TrainUnit> batch{{&d.grids[0], &d.labels[0], 0, 3}, {&d.grids[0], &d.labels[0], 3, 5}};
  std::vector<double> w{0.01, -0.02, 0.03, 0.0, 0.01, 0.0, -0.01, 0.02};
  const double b = 0.1;
  const LossAndGradient lg = head_loss(w, b, batch);
  const double h = 1e-6;
  for (std::size_t k = 0; k < w.size(); ++k) {
    auto wp = w, wm = w;
    wp[k] += h;
    wm[k] -= h;
    const double fd = (head_loss(wp, b, batch).loss - head_loss(wm, b, batch).loss) / (2 * h);
    EXPECT_NEAR(lg.grad_weight[k], fd, 1e-5 * std::max(1.0, std::abs(fd)));
  }
  const double fdb = (head_loss(w, b + h, batch).loss - head_loss(w, b - h, batch).loss) / (2 * h);
  EXPECT_NEAR(lg.grad_bias, fdb, 1e-5 * std::max(1.0, std::abs(fdb)));
}

TEST(WeightsFile, RoundTrip) {
  HeadWeights w;
  w.weight = {0.5f, -1.25f, 3.0e-7f};
  w.bias = -0.75f;
  w.epoch = 17;
  w.validation_iou = 0.875;
  w.config_fingerprint = "lr=0.0001";
  std::stringstream s;
  save_head(s, w);
  EXPECT_EQ(s.str().substr(0, 4), "TDHW");
  EXPECT_EQ(load_head(s), w);
}

TEST(WeightsFile, Errors) {
  HeadWeights w;
  w.weight = {1.0f, 2.0f};
  std::stringstream s;
  save_head(s, w);
  const std::string good = s.str();
  std::istringstream truncated(good.substr(0, good.size() - 5));
  EXPECT_THROW(load_head(truncated), Error);
  std::string bad = good;
  bad[1] = 'X';
  std::istringstream magic(bad);
  EXPECT_THROW(load_head(magic), Error);
}
