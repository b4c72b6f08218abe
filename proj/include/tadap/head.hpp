#pragma once

// Linear projection head: per-patch logistic regression on frozen features.
//
// Loss for one mini-batch of B units (a unit is a frame or a single patch,
// depending on TrainConfig::batch_unit):
//
//   L = (1/B) * sum_units sum_{patches p in unit} bce(sigmoid(w . f_p + b), y_p)
//
// so a frame-unit batch sums over the patches of each frame and averages over
// frames. TDHW weights file, little-endian:
//   "TDHW"  u32 version = 1  u32 dim  float32[dim] weight  float32 bias
//   u32 n  n bytes of JSON metadata

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "tadap/crf.hpp"
#include "tadap/error.hpp"
#include "tadap/features.hpp"
#include "tadap/grid.hpp"

namespace tadap {

enum class BatchUnit { frames, patches };

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t batch_size = 64;
  BatchUnit batch_unit = BatchUnit::frames;
  int epochs = 50;
  std::uint64_t seed = 0;
  /// Validation IoU ignores patch rows that start above this pixel row.
  std::size_t horizon_row = 0;
  std::size_t patch_size = 14;

  void validate() const {
    require(learning_rate > 0 && std::isfinite(learning_rate), Errc::invalid_argument, "learning rate must be > 0");
    require(epochs >= 1, Errc::invalid_argument, "epochs must be >= 1");
    require(batch_size >= 1, Errc::invalid_argument, "batch size must be >= 1");
    require(patch_size >= 1, Errc::invalid_argument, "patch size must be >= 1");
  }

  std::string fingerprint() const {
    char buf[200];
    std::snprintf(buf, sizeof buf, "lr=%.17g;batch=%zu;unit=%s;epochs=%d;seed=%llu;horizon=%zu;patch=%zu",
                  learning_rate, batch_size, batch_unit == BatchUnit::frames ? "frames" : "patches", epochs,
                  static_cast<unsigned long long>(seed), horizon_row, patch_size);
    return buf;
  }
};

struct HeadWeights {
  std::vector<float> weight;
  float bias = 0.0f;
  int epoch = 0;
  double validation_iou = 0.0;
  std::string config_fingerprint;

  std::size_t dim() const noexcept { return weight.size(); }
  friend bool operator==(const HeadWeights&, const HeadWeights&) = default;
};

/// A contiguous run of patches from one labelled grid.
struct TrainUnit {
  const FeatureGrid* features = nullptr;
  const PatchMask* labels = nullptr;
  std::size_t begin = 0;
  std::size_t end = 0;
};

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> grad_weight;
  double grad_bias = 0.0;
};

namespace detail {

inline double logit_dot(std::span<const double> w, double b, std::span<const float> f) {
  double z = b;
  for (std::size_t k = 0; k < w.size(); ++k) z += w[k] * static_cast<double>(f[k]);
  return z;
}

// Numerically stable -[y log s(z) + (1-y) log(1-s(z))].
inline double bce_with_logit(double z, double y) {
  return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
}

inline std::uint64_t hash_string(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char c : s) h = (h ^ c) * 1099511628211ull;
  return h;
}

}  // namespace detail

inline LossAndGradient head_loss(std::span<const double> weight, double bias, std::span<const TrainUnit> batch) {
  require(!batch.empty(), Errc::empty_input, "empty training batch");
  LossAndGradient out{0.0, std::vector<double>(weight.size(), 0.0), 0.0};
  for (const auto& unit : batch) {
    require(unit.features->dim() == weight.size(), Errc::dimension_mismatch, "feature dim differs from head dim");
    for (std::size_t p = unit.begin; p < unit.end; ++p) {
      const auto f = unit.features->patch(p);
      const double y = (*unit.labels)[p] ? 1.0 : 0.0;
      const double z = detail::logit_dot(weight, bias, f);
      out.loss += detail::bce_with_logit(z, y);
      const double g = detail::sigmoid(z) - y;
      for (std::size_t k = 0; k < weight.size(); ++k) out.grad_weight[k] += g * static_cast<double>(f[k]);
      out.grad_bias += g;
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  out.loss *= inv;
  for (double& g : out.grad_weight) g *= inv;
  out.grad_bias *= inv;
  return out;
}

struct Prediction {
  PatchMask mask;
  PatchMap probability;
};

inline Prediction predict(const FeatureGrid& grid, const HeadWeights& w, double threshold = 0.5) {
  require(grid.dim() == w.dim(), Errc::dimension_mismatch,
          "feature dim " + std::to_string(grid.dim()) + " differs from head dim " + std::to_string(w.dim()));
  require(threshold > 0 && threshold < 1, Errc::invalid_argument, "threshold must lie in (0, 1)");
  const std::vector<double> wd(w.weight.begin(), w.weight.end());
  const double cut = std::log(threshold / (1.0 - threshold));
  Prediction out{PatchMask(grid.rows(), grid.cols()), PatchMap(grid.rows(), grid.cols())};
  for (std::size_t i = 0; i < grid.patches(); ++i) {
    const double z = detail::logit_dot(wd, static_cast<double>(w.bias), grid.patch(i));
    out.probability[i] =
        std::clamp(detail::sigmoid(z), std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
    out.mask[i] = z >= cut ? 1 : 0;
  }
  return out;
}

/// Head probabilities as CRF unaries; rows above `horizon_row` cleared.
inline PixelMask predict_refined(const FeatureGrid& grid, const HeadWeights& w, const RgbImage& image,
                                 const CrfParams& crf, std::size_t horizon_row) {
  const Prediction p = predict(grid, w);
  PixelMask mask = crf_refine(build_unary(p.probability, image.height, image.width, crf.epsilon), image, crf).labels;
  clear_above(mask, horizon_row);
  return mask;
}

struct TrainingHistory {
  std::vector<double> train_loss;      // mean per-unit loss over the epoch's batches
  std::vector<double> validation_iou;  // after each epoch
};

/// Mini-batch SGD from zero weights; returns the epoch with the highest
/// validation IoU (earliest on ties).
inline HeadWeights train_head(const std::vector<std::pair<const FeatureGrid*, const PatchMask*>>& train,
                              const std::vector<std::pair<const FeatureGrid*, const PatchMask*>>& val,
                              const TrainConfig& cfg, TrainingHistory* history = nullptr) {
  cfg.validate();
  require(!train.empty() && !val.empty(), Errc::empty_input, "training and validation sets must be non-empty");
  const std::size_t dim = train.front().first->dim();
  std::size_t positives = 0, total = 0;
  for (const auto& set : {std::cref(train), std::cref(val)})
    for (const auto& [grid, mask] : set.get()) {
      require(grid->dim() == dim, Errc::dimension_mismatch, "inconsistent feature dims");
      require(mask->rows() == grid->rows() && mask->cols() == grid->cols(), Errc::dimension_mismatch,
              "label grid does not match its feature grid");
    }
  for (const auto& [grid, mask] : train) {
    positives += popcount(*mask);
    total += mask->size();
  }
  require(positives > 0 && positives < total, Errc::degenerate_training, "training labels contain a single class");

  std::vector<TrainUnit> units;
  for (const auto& [grid, mask] : train) {
    if (cfg.batch_unit == BatchUnit::frames) {
      units.push_back({grid, mask, 0, grid->patches()});
    } else {
      for (std::size_t p = 0; p < grid->patches(); ++p) units.push_back({grid, mask, p, p + 1});
    }
  }

  std::vector<double> w(dim, 0.0);
  double b = 0.0;
  HeadWeights best;
  best.validation_iou = -1.0;
  std::mt19937_64 rng(cfg.seed);
  const auto snapshot = [&](int epoch, double iou) {
    HeadWeights h;
    h.weight.assign(w.begin(), w.end());
    h.bias = static_cast<float>(b);
    h.epoch = epoch;
    h.validation_iou = iou;
    h.config_fingerprint = cfg.fingerprint();
    return h;
  };
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = units.size(); i > 1; --i) std::swap(units[i - 1], units[rng() % i]);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < units.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(units.size(), start + cfg.batch_size);
      const auto lg = head_loss(w, b, std::span<const TrainUnit>(units).subspan(start, stop - start));
      for (std::size_t k = 0; k < dim; ++k) w[k] -= cfg.learning_rate * lg.grad_weight[k];
      b -= cfg.learning_rate * lg.grad_bias;
      loss_sum += lg.loss;
      ++batches;
    }
    HeadWeights current = snapshot(epoch, 0.0);
    std::size_t tp = 0, fp = 0, fn = 0;
    for (const auto& [grid, gt] : val) {
      const Prediction p = predict(*grid, current);
      const std::size_t first_row = (cfg.horizon_row + cfg.patch_size - 1) / cfg.patch_size;
      for (std::size_t r = first_row; r < gt->rows(); ++r)
        for (std::size_t c = 0; c < gt->cols(); ++c) {
          const bool pr = p.mask(r, c) != 0, g = (*gt)(r, c) != 0;
          tp += pr && g;
          fp += pr && !g;
          fn += !pr && g;
        }
    }
    current.validation_iou = tp + fp + fn == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
    if (history) {
      history->train_loss.push_back(loss_sum / static_cast<double>(batches));
      history->validation_iou.push_back(current.validation_iou);
    }
    if (current.validation_iou > best.validation_iou) best = std::move(current);
  }
  return best;
}

inline constexpr char kHeadMagic[4] = {'T', 'D', 'H', 'W'};
inline constexpr std::uint32_t kHeadVersion = 1;

inline void save_head(std::ostream& out, const HeadWeights& w) {
  const nlohmann::json meta = {{"dim", w.dim()},
                               {"epoch", w.epoch},
                               {"validation_iou", w.validation_iou},
                               {"config", w.config_fingerprint},
                               {"config_hash", detail::hash_string(w.config_fingerprint)}};
  const std::string text = meta.dump();
  const std::uint32_t version = kHeadVersion, dim = static_cast<std::uint32_t>(w.dim()),
                      len = static_cast<std::uint32_t>(text.size());
  out.write(kHeadMagic, 4);
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&dim), 4);
  out.write(reinterpret_cast<const char*>(w.weight.data()), static_cast<std::streamsize>(w.dim() * sizeof(float)));
  out.write(reinterpret_cast<const char*>(&w.bias), sizeof(float));
  out.write(reinterpret_cast<const char*>(&len), 4);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  require(static_cast<bool>(out), Errc::io, "failed writing head weights");
}

inline void save_head(const std::string& path, const HeadWeights& w) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), Errc::io, "cannot create " + path);
  save_head(out, w);
}

inline HeadWeights load_head(std::istream& in) {
  const auto read = [&](void* dst, std::size_t n) {
    in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    require(in.gcount() == static_cast<std::streamsize>(n), Errc::truncated, "head weights file is truncated");
  };
  char magic[4];
  read(magic, 4);
  require(std::memcmp(magic, kHeadMagic, 4) == 0, Errc::bad_magic, "not a TDHW weights file");
  std::uint32_t version = 0, dim = 0, len = 0;
  read(&version, 4);
  require(version == kHeadVersion, Errc::bad_version, "unsupported TDHW version " + std::to_string(version));
  read(&dim, 4);
  require(dim > 0 && dim < (1u << 24), Errc::dimension_mismatch, "implausible head dim");
  HeadWeights w;
  w.weight.resize(dim);
  read(w.weight.data(), dim * sizeof(float));
  read(&w.bias, sizeof(float));
  read(&len, 4);
  std::string text(len, '\0');
  read(text.data(), len);
  for (float v : w.weight) require(std::isfinite(v), Errc::non_finite, "head weights are not finite");
  require(std::isfinite(w.bias), Errc::non_finite, "head bias is not finite");
  try {
    const auto meta = nlohmann::json::parse(text);
    require(meta.at("dim").get<std::size_t>() == dim, Errc::dimension_mismatch, "metadata dim disagrees");
    w.epoch = meta.at("epoch").get<int>();
    w.validation_iou = meta.at("validation_iou").get<double>();
    w.config_fingerprint = meta.at("config").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse, std::string("bad head metadata: ") + e.what());
  }
  return w;
}

inline HeadWeights load_head(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), Errc::io, "cannot open " + path);
  return load_head(in);
}

}  // namespace tadap
