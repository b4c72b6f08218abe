#pragma once

// Fully connected two-label CRF with Potts compatibility and mean-field
// inference (Kraehenbuehl and Koltun). The pairwise kernel is
//
//   k(i, j) = a * exp(-|p_i - p_j|^2 / 2 theta_alpha^2 - |I_i - I_j|^2 / 2 theta_beta^2)
//           + b * exp(-|p_i - p_j|^2 / 2 theta_gamma^2)
//
// with positions in pixels and colours as raw 0..255 intensities.
//
// Two message backends share one synchronous mean-field driver:
//   ExactPairwise  O(N^2) reference, used as the oracle on small images.
//   FastPairwise   smoothness term by exact separable convolution; appearance
//                  term on a colour-layered bilateral grid (see below).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "tadap/error.hpp"
#include "tadap/grid.hpp"

namespace tadap {

struct CrfParams {
  double appearance_weight = 4.0;  // a
  double smoothness_weight = 3.0;  // b
  double theta_alpha = 25.0;       // appearance spatial stddev, pixels
  double theta_beta = 3.0;         // appearance colour stddev, 0..255 units
  double theta_gamma = 5.0;        // smoothness spatial stddev, pixels
  int iterations = 10;
  double epsilon = 1e-6;
  /// Maximum number of colour layers in the fast backend; 0 picks a bound
  /// from the image size so the per-iteration work stays roughly constant.
  std::size_t max_colour_layers = 0;

  void validate() const {
    require(appearance_weight >= 0 && smoothness_weight >= 0, Errc::invalid_argument, "CRF weights must be >= 0");
    require(theta_alpha > 0 && theta_beta > 0 && theta_gamma > 0, Errc::invalid_argument,
            "CRF kernel widths must be positive");
    require(iterations >= 1, Errc::invalid_argument, "CRF needs at least one iteration");
    require(epsilon > 0 && epsilon < 0.5, Errc::invalid_argument, "CRF epsilon must lie in (0, 0.5)");
  }
};

/// Negative log-probabilities per pixel for the drivable and the
/// non-drivable label.
struct UnaryField {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> drivable;
  std::vector<double> background;

  std::size_t size() const noexcept { return width * height; }
};

inline UnaryField build_unary(const PixelMap& prob, double epsilon = 1e-6) {
  UnaryField u;
  u.height = prob.rows();
  u.width = prob.cols();
  u.drivable.resize(prob.size());
  u.background.resize(prob.size());
  for (std::size_t i = 0; i < prob.size(); ++i) {
    const double p = prob[i];
    require(std::isfinite(p), Errc::non_finite, "probability map contains a non-finite value");
    const double pc = std::clamp(p, epsilon, 1.0 - epsilon);
    const double qc = std::clamp(1.0 - p, epsilon, 1.0 - epsilon);
    u.drivable[i] = -std::log(pc);
    u.background[i] = -std::log(qc);
  }
  return u;
}

/// Patch-resolution probabilities are upsampled by nearest neighbour.
inline UnaryField build_unary(const PatchMap& prob, std::size_t height, std::size_t width,
                              double epsilon = 1e-6) {
  return build_unary(upsample_nearest(prob, height, width), epsilon);
}

struct CrfResult {
  PixelMask labels;
  PixelMap drivable;    // final marginal of the drivable label
  PixelMap background;  // final marginal of the non-drivable label
};

namespace detail {

inline double gauss(double d2, double theta) { return std::exp(-d2 / (2.0 * theta * theta)); }

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline void check_dims(const UnaryField& unary, const RgbImage& image) {
  require(unary.width == image.width && unary.height == image.height && unary.drivable.size() == unary.size() &&
              unary.background.size() == unary.size() && image.rgb.size() == unary.size() * 3,
          Errc::dimension_mismatch, "image and unary dimensions differ");
}

}  // namespace detail

/// Reference message passing: direct summation over all pixel pairs.
class ExactPairwise {
 public:
  ExactPairwise(const RgbImage& image, const CrfParams& params) : image_(image), params_(params) {}

  /// out[i] = sum_{j != i} k(i, j) q[j]
  void filter(std::span<const double> q, std::span<double> out) const {
    const std::size_t w = image_.width;
    const std::size_t n = w * image_.height;
    for (std::size_t i = 0; i < n; ++i) {
      const double xi = static_cast<double>(i % w);
      const double yi = static_cast<double>(i / w);
      const std::uint8_t* ci = &image_.rgb[i * 3];
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double dx = xi - static_cast<double>(j % w);
        const double dy = yi - static_cast<double>(j / w);
        const double dp = dx * dx + dy * dy;
        const std::uint8_t* cj = &image_.rgb[j * 3];
        double dc = 0.0;
        for (int k = 0; k < 3; ++k) {
          const double t = static_cast<double>(ci[k]) - static_cast<double>(cj[k]);
          dc += t * t;
        }
        const double k_app = std::exp(-dp / (2 * params_.theta_alpha * params_.theta_alpha) -
                                      dc / (2 * params_.theta_beta * params_.theta_beta));
        acc += (params_.appearance_weight * k_app + params_.smoothness_weight * detail::gauss(dp, params_.theta_gamma)) *
               q[j];
      }
      out[i] = acc;
    }
  }

 private:
  const RgbImage& image_;
  CrfParams params_;
};

/// Accelerated message passing.
///
/// Smoothness: the kernel is separable, so it is applied as two exact 1-D
/// convolutions truncated at 6 theta_gamma.
///
/// Appearance: pixels are grouped into colour layers (distinct colours,
/// or a uniform colour quantisation when there are more than the layer
/// budget). For every source layer the spatial Gaussian sum is evaluated
/// exactly at the nodes of a coarse grid with spacing ~theta_alpha / 4 and
/// read back at each target pixel by bicubic Lagrange interpolation; the
/// colour factor uses the target's own colour against the layer centroid.
/// With one layer per distinct colour the only approximation is the spatial
/// interpolation, whose relative error is O((h / theta_alpha)^4).
class FastPairwise {
 public:
  FastPairwise(const RgbImage& image, const CrfParams& params) : image_(image), params_(params) {
    width_ = image.width;
    height_ = image.height;
    build_smoothness_taps();
    build_layers();
  }

  std::size_t layer_count() const noexcept { return layers_.size(); }
  int quantisation_step() const noexcept { return quant_; }

  void filter(std::span<const double> q, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    if (params_.smoothness_weight > 0) smoothness(q, out);
    if (params_.appearance_weight > 0) appearance(q, out);
  }

 private:
  struct Layer {
    std::vector<std::size_t> pixels;   // row-major order
    double centroid[3] = {0, 0, 0};
    std::vector<std::size_t> targets;  // layers whose pixels receive messages from this one
    std::size_t row_min = 0, row_max = 0;
    // node-index bounding box of all target pixels of this layer
    std::size_t nx0 = 0, nx1 = 0, ny0 = 0, ny1 = 0;
  };

  void build_smoothness_taps() {
    const auto radius = static_cast<std::size_t>(std::ceil(6.0 * params_.theta_gamma));
    const std::size_t r = std::min(radius, std::max(width_, height_));
    smooth_taps_.resize(r + 1);
    for (std::size_t d = 0; d <= r; ++d)
      smooth_taps_[d] = detail::gauss(static_cast<double>(d * d), params_.theta_gamma);
  }

  void smoothness(std::span<const double> q, std::span<double> out) const {
    const auto r = static_cast<std::ptrdiff_t>(smooth_taps_.size() - 1);
    const auto w = static_cast<std::ptrdiff_t>(width_);
    const auto h = static_cast<std::ptrdiff_t>(height_);
    std::vector<double> rows(q.size(), 0.0);
    for (std::ptrdiff_t y = 0; y < h; ++y) {
      const double* src = &q[static_cast<std::size_t>(y * w)];
      double* dst = &rows[static_cast<std::size_t>(y * w)];
      for (std::ptrdiff_t x = 0; x < w; ++x) {
        double acc = 0.0;
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, x - r);
        const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(w - 1, x + r);
        for (std::ptrdiff_t k = lo; k <= hi; ++k) acc += smooth_taps_[static_cast<std::size_t>(std::abs(k - x))] * src[k];
        dst[x] = acc;
      }
    }
    const double b = params_.smoothness_weight;
    std::vector<double> acc(static_cast<std::size_t>(w));
    for (std::ptrdiff_t y = 0; y < h; ++y) {
      std::fill(acc.begin(), acc.end(), 0.0);
      const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, y - r);
      const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(h - 1, y + r);
      for (std::ptrdiff_t k = lo; k <= hi; ++k) {
        const double t = smooth_taps_[static_cast<std::size_t>(std::abs(k - y))];
        const double* src = &rows[static_cast<std::size_t>(k * w)];
        for (std::ptrdiff_t x = 0; x < w; ++x) acc[static_cast<std::size_t>(x)] += t * src[x];
      }
      for (std::ptrdiff_t x = 0; x < w; ++x) {
        const auto i = static_cast<std::size_t>(y * w + x);
        out[i] += b * (acc[static_cast<std::size_t>(x)] - q[i]);  // drop the j == i term
      }
    }
  }

  void build_layers() {
    const std::size_t n = width_ * height_;
    step_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(params_.theta_alpha / 4.0)));
    nodes_x_ = (width_ + step_ - 1) / step_ + 4;
    nodes_y_ = (height_ + step_ - 1) / step_ + 4;

    std::size_t budget = params_.max_colour_layers;
    if (budget == 0) {
      // Per-layer cost is about (grid nodes) x (pixel rows within reach).
      const double rows = std::min<double>(12.0 * params_.theta_alpha + 1.0, static_cast<double>(height_));
      const double per_layer = static_cast<double>(nodes_x_ * nodes_y_) * rows;
      budget = static_cast<std::size_t>(std::clamp(2e7 / per_layer, 16.0, 65536.0));
    }

    // Uniform colour quantisation: the smallest step that fits the budget.
    std::map<std::uint32_t, std::size_t> cells;
    for (quant_ = 1;; ++quant_) {
      cells.clear();
      for (std::size_t i = 0; i < n && cells.size() <= budget; ++i) cells.emplace(cell_key(i), cells.size());
      if (cells.size() <= budget || quant_ >= 256) break;
    }
    // Renumber in key order so layer ids do not depend on pixel order.
    std::size_t id = 0;
    for (auto& [key, index] : cells) index = id++;
    layers_.assign(cells.size(), Layer{});
    pixel_layer_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t l = cells.at(cell_key(i));
      pixel_layer_[i] = l;
      layers_[l].pixels.push_back(i);
      for (int k = 0; k < 3; ++k) layers_[l].centroid[k] += image_.rgb[i * 3 + static_cast<std::size_t>(k)];
    }
    for (auto& layer : layers_) {
      for (double& c : layer.centroid) c /= static_cast<double>(layer.pixels.size());
      layer.row_min = layer.pixels.front() / width_;
      layer.row_max = layer.pixels.back() / width_;
    }

    // Colour reach: beyond 6 theta_beta the kernel is below 1.5e-8. Members
    // of a quantised cell lie within quant*sqrt(3) of its centroid.
    const double reach = 6.0 * params_.theta_beta + std::sqrt(3.0) * (quant_ - 1);
    std::vector<std::size_t> bx0(layers_.size(), nodes_x_), bx1(layers_.size(), 0);
    std::vector<std::size_t> by0(layers_.size(), nodes_y_), by1(layers_.size(), 0);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      for (std::size_t i : layers_[l].pixels) {
        const std::size_t x = i % width_;
        const std::size_t y = i / width_;
        // bicubic support in node indices: floor(x/h)+1-1 .. floor(x/h)+1+2
        bx0[l] = std::min(bx0[l], x / step_);
        bx1[l] = std::max(bx1[l], x / step_ + 3);
        by0[l] = std::min(by0[l], y / step_);
        by1[l] = std::max(by1[l], y / step_ + 3);
      }
    }
    for (std::size_t s = 0; s < layers_.size(); ++s) {
      Layer& src = layers_[s];
      src.nx0 = nodes_x_;
      src.ny0 = nodes_y_;
      for (std::size_t t = 0; t < layers_.size(); ++t) {
        double d2 = 0.0;
        for (int k = 0; k < 3; ++k) {
          const double dc = src.centroid[k] - layers_[t].centroid[k];
          d2 += dc * dc;
        }
        if (d2 > reach * reach) continue;
        src.targets.push_back(t);
        src.nx0 = std::min(src.nx0, bx0[t]);
        src.nx1 = std::max(src.nx1, bx1[t]);
        src.ny0 = std::min(src.ny0, by0[t]);
        src.ny1 = std::max(src.ny1, by1[t]);
      }
    }

    // Spatial Gaussian by integer pixel offset; node k sits at x = (k-1) h.
    const std::size_t max_off = std::max(nodes_x_, nodes_y_) * step_ + step_;
    const double cutoff = 6.0 * params_.theta_alpha;
    spatial_.resize(max_off + 1);
    for (std::size_t d = 0; d <= max_off; ++d)
      spatial_[d] = static_cast<double>(d) > cutoff ? 0.0 : detail::gauss(static_cast<double>(d * d), params_.theta_alpha);
    reach_nodes_ = static_cast<std::size_t>(std::ceil(cutoff / static_cast<double>(step_))) + 1;

    // Lagrange weights for the four nodes around each residue x mod h.
    cubic_.resize(step_ * 4);
    for (std::size_t r = 0; r < step_; ++r) {
      const double t = static_cast<double>(r) / static_cast<double>(step_);
      cubic_[r * 4 + 0] = -t * (t - 1) * (t - 2) / 6.0;
      cubic_[r * 4 + 1] = (t + 1) * (t - 1) * (t - 2) / 2.0;
      cubic_[r * 4 + 2] = -(t + 1) * t * (t - 2) / 2.0;
      cubic_[r * 4 + 3] = (t + 1) * t * (t - 1) / 6.0;
    }
  }

  std::uint32_t cell_key(std::size_t i) const {
    const auto q = static_cast<std::uint32_t>(quant_);
    return ((image_.rgb[i * 3] / q) << 16) | ((image_.rgb[i * 3 + 1] / q) << 8) | (image_.rgb[i * 3 + 2] / q);
  }

  double node_offset(std::size_t node, std::size_t pixel) const {
    // node position (node-1)*h minus pixel coordinate, as absolute integer
    const auto np = static_cast<std::ptrdiff_t>(node * step_) - static_cast<std::ptrdiff_t>(step_);
    return spatial_[static_cast<std::size_t>(std::abs(np - static_cast<std::ptrdiff_t>(pixel)))];
  }

  void appearance(std::span<const double> q, std::span<double> out) const {
    const double a = params_.appearance_weight;
    const double inv2b = 1.0 / (2.0 * params_.theta_beta * params_.theta_beta);
    std::vector<double> rows;
    std::vector<double> nodes;
    for (std::size_t s_id = 0; s_id < layers_.size(); ++s_id) {
      const Layer& src = layers_[s_id];
      const std::size_t nx = src.nx1 - src.nx0 + 1;
      const std::size_t ny = src.ny1 - src.ny0 + 1;
      const std::size_t nrows = src.row_max - src.row_min + 1;

      // pass 1: pixels -> (pixel row, node column)
      rows.assign(nrows * nx, 0.0);
      for (std::size_t i : src.pixels) {
        const double v = q[i];
        if (v == 0.0) continue;
        const std::size_t x = i % width_;
        double* dst = &rows[(i / width_ - src.row_min) * nx];
        const std::size_t c = x / step_ + 1;
        const std::size_t lo = std::max(src.nx0, c > reach_nodes_ ? c - reach_nodes_ : 0);
        const std::size_t hi = std::min(src.nx1, c + reach_nodes_);
        for (std::size_t k = lo; k <= hi; ++k) dst[k - src.nx0] += node_offset(k, x) * v;
      }
      // pass 2: pixel rows -> node rows
      nodes.assign(ny * nx, 0.0);
      for (std::size_t l = src.ny0; l <= src.ny1; ++l) {
        double* dst = &nodes[(l - src.ny0) * nx];
        const std::ptrdiff_t ly = static_cast<std::ptrdiff_t>(l * step_) - static_cast<std::ptrdiff_t>(step_);
        const std::size_t rlo = static_cast<std::size_t>(std::max<std::ptrdiff_t>(
            static_cast<std::ptrdiff_t>(src.row_min), ly - static_cast<std::ptrdiff_t>(reach_nodes_ * step_)));
        const std::size_t rhi = static_cast<std::size_t>(std::min<std::ptrdiff_t>(
            static_cast<std::ptrdiff_t>(src.row_max), ly + static_cast<std::ptrdiff_t>(reach_nodes_ * step_)));
        for (std::size_t y = rlo; y <= rhi && rlo <= src.row_max; ++y) {
          const double t = node_offset(l, y);
          if (t == 0.0) continue;
          const double* row = &rows[(y - src.row_min) * nx];
          for (std::size_t k = 0; k < nx; ++k) dst[k] += t * row[k];
        }
      }
      // slice at every target pixel
      for (std::size_t t : src.targets) {
        for (std::size_t i : layers_[t].pixels) {
          const std::size_t x = i % width_;
          const std::size_t y = i / width_;
          const double* wx = &cubic_[(x % step_) * 4];
          const double* wy = &cubic_[(y % step_) * 4];
          const std::size_t kx = x / step_ - src.nx0;  // node (x/h + 1) - 1
          const std::size_t ky = y / step_ - src.ny0;
          double s = 0.0;
          for (std::size_t b = 0; b < 4; ++b) {
            const double* row = &nodes[(ky + b) * nx + kx];
            s += wy[b] * (wx[0] * row[0] + wx[1] * row[1] + wx[2] * row[2] + wx[3] * row[3]);
          }
          double d2 = 0.0;
          for (int k = 0; k < 3; ++k) {
            const double dc = image_.rgb[i * 3 + static_cast<std::size_t>(k)] - src.centroid[k];
            d2 += dc * dc;
          }
          const double wc = std::exp(-d2 * inv2b);
          if (t == s_id) s -= q[i];  // drop the j == i term
          out[i] += a * wc * s;
        }
      }
    }
  }

  const RgbImage& image_;
  CrfParams params_;
  std::size_t width_ = 0, height_ = 0;
  std::vector<double> smooth_taps_;
  std::size_t step_ = 1, nodes_x_ = 0, nodes_y_ = 0, reach_nodes_ = 0;
  int quant_ = 1;
  std::vector<Layer> layers_;
  std::vector<std::size_t> pixel_layer_;
  std::vector<double> spatial_;
  std::vector<double> cubic_;
};

/// Synchronous mean-field updates starting from the unary softmax.
template <class Pairwise>
CrfResult mean_field(const UnaryField& unary, const Pairwise& pairwise, int iterations) {
  const std::size_t n = unary.size();
  std::vector<double> q(n), ones(n, 1.0), total(n), msg(n), z(n);
  for (std::size_t i = 0; i < n; ++i) {
    z[i] = unary.background[i] - unary.drivable[i];
    q[i] = detail::sigmoid(z[i]);
  }
  pairwise.filter(ones, total);
  for (int it = 0; it < iterations; ++it) {
    pairwise.filter(q, msg);
    // Potts: E(drivable) += sum k q_bg = total - msg, E(bg) += msg
    for (std::size_t i = 0; i < n; ++i) {
      z[i] = unary.background[i] - unary.drivable[i] + 2.0 * msg[i] - total[i];
      q[i] = detail::sigmoid(z[i]);
    }
  }
  CrfResult result{PixelMask(unary.height, unary.width), PixelMap(unary.height, unary.width),
                   PixelMap(unary.height, unary.width)};
  for (std::size_t i = 0; i < n; ++i) {
    result.drivable[i] = q[i];
    result.background[i] = detail::sigmoid(-z[i]);
    result.labels[i] = z[i] >= 0.0 ? 1 : 0;
  }
  return result;
}

inline CrfResult crf_refine(const UnaryField& unary, const RgbImage& image, const CrfParams& params) {
  params.validate();
  detail::check_dims(unary, image);
  return mean_field(unary, FastPairwise(image, params), params.iterations);
}

inline CrfResult crf_refine_exact(const UnaryField& unary, const RgbImage& image, const CrfParams& params) {
  params.validate();
  detail::check_dims(unary, image);
  return mean_field(unary, ExactPairwise(image, params), params.iterations);
}

}  // namespace tadap
