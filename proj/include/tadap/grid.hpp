#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tadap/error.hpp"

namespace tadap {

/// Row-major 2-D array. The tag parameter keeps pixel-resolution and
/// patch-resolution grids from being mixed up by accident.
template <class T, class Tag = void>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  Grid(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Grid(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    require(data_.size() == rows_ * cols_, Errc::dimension_mismatch,
            "grid payload does not match " + std::to_string(rows_) + "x" + std::to_string(cols_));
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  bool same_shape(const auto& other) const noexcept {
    return rows_ == other.rows() && cols_ == other.cols();
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

struct PixelTag {};
struct PatchTag {};

/// Boolean masks are stored one byte per cell (0/1).
using PixelMask = Grid<std::uint8_t, PixelTag>;
using PatchMask = Grid<std::uint8_t, PatchTag>;
using PixelMap = Grid<double, PixelTag>;
using PatchMap = Grid<double, PatchTag>;

template <class Tag>
std::size_t popcount(const Grid<std::uint8_t, Tag>& mask) {
  return static_cast<std::size_t>(
      std::count_if(mask.values().begin(), mask.values().end(), [](std::uint8_t b) { return b != 0; }));
}

/// 8-bit interleaved RGB image.
struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> rgb;

  RgbImage() = default;
  RgbImage(std::size_t w, std::size_t h) : width(w), height(h), rgb(w * h * 3, 0) {}

  std::uint8_t* at(std::size_t row, std::size_t col) { return &rgb[(row * width + col) * 3]; }
  const std::uint8_t* at(std::size_t row, std::size_t col) const { return &rgb[(row * width + col) * 3]; }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

/// Nearest-neighbour upsampling of a patch grid to pixel resolution.
template <class T>
Grid<T, PixelTag> upsample_nearest(const Grid<T, PatchTag>& patches, std::size_t height, std::size_t width) {
  require(patches.rows() > 0 && patches.cols() > 0 && height % patches.rows() == 0 &&
              width % patches.cols() == 0,
          Errc::dimension_mismatch,
          "image " + std::to_string(height) + "x" + std::to_string(width) +
              " is not an integer multiple of patch grid " + std::to_string(patches.rows()) + "x" +
              std::to_string(patches.cols()));
  const std::size_t ph = height / patches.rows();
  const std::size_t pw = width / patches.cols();
  Grid<T, PixelTag> out(height, width);
  for (std::size_t r = 0; r < height; ++r)
    for (std::size_t c = 0; c < width; ++c) out(r, c) = patches(r / ph, c / pw);
  return out;
}

/// Clears every row above `horizon_row`.
inline void clear_above(PixelMask& mask, std::size_t horizon_row) {
  const std::size_t stop = std::min(horizon_row, mask.rows());
  std::fill(mask.values().begin(), mask.values().begin() + static_cast<std::ptrdiff_t>(stop * mask.cols()), 0);
}

}  // namespace tadap
