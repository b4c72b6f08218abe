#pragma once

// Patch-feature grids and trajectory similarity.
//
// TDFG file layout, little-endian:
//   "TDFG"  u32 version = 1  u32 rows  u32 cols  u32 dim
//   rows * cols * dim float32, patch-row-major, feature-minor

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "tadap/error.hpp"
#include "tadap/grid.hpp"

namespace tadap {

static_assert(std::endian::native == std::endian::little, "TDFG I/O assumes a little-endian host");

class FeatureGrid {
 public:
  FeatureGrid() = default;
  FeatureGrid(std::size_t rows, std::size_t cols, std::size_t dim)
      : rows_(rows), cols_(cols), dim_(dim), values_(rows * cols * dim, 0.0f) {
    require(rows > 0 && cols > 0 && dim > 0, Errc::dimension_mismatch, "feature grid dims must be positive");
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t patches() const noexcept { return rows_ * cols_; }

  std::span<float> at(std::size_t r, std::size_t c) { return {values_.data() + (r * cols_ + c) * dim_, dim_}; }
  std::span<const float> at(std::size_t r, std::size_t c) const {
    return {values_.data() + (r * cols_ + c) * dim_, dim_};
  }
  std::span<float> patch(std::size_t i) { return {values_.data() + i * dim_, dim_}; }
  std::span<const float> patch(std::size_t i) const { return {values_.data() + i * dim_, dim_}; }
  std::span<float> values() noexcept { return values_; }
  std::span<const float> values() const noexcept { return values_; }

  friend bool operator==(const FeatureGrid&, const FeatureGrid&) = default;

 private:
  std::size_t rows_ = 0, cols_ = 0, dim_ = 0;
  std::vector<float> values_;
};

inline constexpr char kFeatureMagic[4] = {'T', 'D', 'F', 'G'};
inline constexpr std::uint32_t kFeatureVersion = 1;

inline void save_feature_grid(std::ostream& out, const FeatureGrid& grid) {
  const std::uint32_t header[4] = {kFeatureVersion, static_cast<std::uint32_t>(grid.rows()),
                                   static_cast<std::uint32_t>(grid.cols()), static_cast<std::uint32_t>(grid.dim())};
  out.write(kFeatureMagic, 4);
  out.write(reinterpret_cast<const char*>(header), sizeof header);
  out.write(reinterpret_cast<const char*>(grid.values().data()),
            static_cast<std::streamsize>(grid.values().size() * sizeof(float)));
  require(static_cast<bool>(out), Errc::io, "failed writing feature grid");
}

inline void save_feature_grid(const std::string& path, const FeatureGrid& grid) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), Errc::io, "cannot create " + path);
  save_feature_grid(out, grid);
}

inline FeatureGrid load_feature_grid(std::istream& in) {
  char magic[4] = {};
  in.read(magic, 4);
  require(in.gcount() == 4, Errc::truncated, "feature file shorter than its header");
  require(std::memcmp(magic, kFeatureMagic, 4) == 0, Errc::bad_magic, "not a TDFG feature file");
  std::uint32_t header[4] = {};
  in.read(reinterpret_cast<char*>(header), sizeof header);
  require(in.gcount() == static_cast<std::streamsize>(sizeof header), Errc::truncated,
          "feature file shorter than its header");
  require(header[0] == kFeatureVersion, Errc::bad_version,
          "unsupported TDFG version " + std::to_string(header[0]));
  require(header[1] > 0 && header[2] > 0 && header[3] > 0, Errc::dimension_mismatch,
          "feature header declares an empty grid");
  const std::uint64_t count = std::uint64_t{header[1]} * header[2] * header[3];
  require(count < (std::uint64_t{1} << 32), Errc::dimension_mismatch, "feature header dims are implausibly large");
  FeatureGrid grid(header[1], header[2], header[3]);
  in.read(reinterpret_cast<char*>(grid.values().data()), static_cast<std::streamsize>(count * sizeof(float)));
  require(in.gcount() == static_cast<std::streamsize>(count * sizeof(float)), Errc::truncated,
          "feature payload is shorter than rows*cols*dim floats");
  in.peek();
  require(in.eof(), Errc::dimension_mismatch, "feature payload is longer than the declared dims");
  for (float v : grid.values()) require(std::isfinite(v), Errc::non_finite, "feature grid holds a non-finite value");
  return grid;
}

inline FeatureGrid load_feature_grid(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), Errc::io, "cannot open " + path);
  return load_feature_grid(in);
}

using FeatureVec = std::vector<double>;

/// Arithmetic mean of the features under `sample`, accumulated in double.
inline FeatureVec mean_feature(const FeatureGrid& grid, const PatchMask& sample) {
  require(sample.rows() == grid.rows() && sample.cols() == grid.cols(), Errc::dimension_mismatch,
          "sample mask does not match the feature grid");
  FeatureVec mean(grid.dim(), 0.0);
  std::size_t n = 0;
  for (std::size_t i = 0; i < grid.patches(); ++i) {
    if (!sample[i]) continue;
    const auto f = grid.patch(i);
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += f[k];
    ++n;
  }
  require(n > 0, Errc::empty_sample, "trajectory sample has no patches");
  for (double& v : mean) v /= static_cast<double>(n);
  return mean;
}

namespace detail {

template <class A, class B>
double dot(std::span<const A> a, std::span<const B> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += static_cast<double>(a[k]) * static_cast<double>(b[k]);
  return s;
}

}  // namespace detail

inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), Errc::dimension_mismatch, "cosine of vectors with different lengths");
  const double na = std::sqrt(detail::dot(a, a)), nb = std::sqrt(detail::dot(b, b));
  require(na > 1e-12 && nb > 1e-12, Errc::zero_norm, "cosine similarity of a zero-norm vector");
  return std::clamp(detail::dot(a, b) / (na * nb), -1.0, 1.0);
}

struct SimilarityMap {
  PatchMap values;
  bool normalized = false;
  std::size_t zero_norm_patches = 0;  // patches assigned -1 because their feature was zero
};

inline SimilarityMap similarity_map(const FeatureGrid& grid, std::span<const double> mean) {
  require(mean.size() == grid.dim(), Errc::dimension_mismatch, "mean feature length differs from grid dim");
  const double nm = std::sqrt(detail::dot(mean, mean));
  require(nm > 1e-12, Errc::zero_norm, "trajectory mean feature has zero norm");
  SimilarityMap map{PatchMap(grid.rows(), grid.cols()), false, 0};
  for (std::size_t i = 0; i < grid.patches(); ++i) {
    const auto f = grid.patch(i);
    const double nf = std::sqrt(detail::dot(f, f));
    if (nf <= 1e-12) {
      map.values[i] = -1.0;
      ++map.zero_norm_patches;
      continue;
    }
    map.values[i] = std::clamp(detail::dot(f, mean) / (nf * nm), -1.0, 1.0);
  }
  return map;
}

/// Divides by the frame maximum and clamps to [0, 1]. `roi_first_row`
/// restricts the search for the maximum to patch rows at or below it.
inline SimilarityMap normalize_map(const SimilarityMap& map, std::size_t roi_first_row = 0) {
  if (map.normalized) return map;
  require(!map.values.empty() && roi_first_row < map.values.rows(), Errc::degenerate_frame, "empty similarity map");
  double fmax = -std::numeric_limits<double>::infinity();
  for (std::size_t i = roi_first_row * map.values.cols(); i < map.values.size(); ++i)
    fmax = std::max(fmax, map.values[i]);
  require(fmax > 1e-6, Errc::degenerate_frame, "no patch resembles the trajectory (max similarity <= 1e-6)");
  SimilarityMap out = map;
  for (double& v : out.values.values()) v = std::clamp(v / fmax, 0.0, 1.0);
  out.normalized = true;
  return out;
}

inline PatchMask threshold_map(const PatchMap& map, double threshold) {
  PatchMask mask(map.rows(), map.cols());
  for (std::size_t i = 0; i < map.size(); ++i) mask[i] = map[i] >= threshold ? 1 : 0;
  return mask;
}

}  // namespace tadap
