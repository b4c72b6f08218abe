#pragma once

// PNG read/write through libpng. Masks are 8-bit grey, 0 = non-drivable,
// 255 = drivable; any nonzero value reads back as drivable unless strict.

#include <png.h>

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "tadap/error.hpp"
#include "tadap/grid.hpp"

namespace tadap {

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline void write_png(const std::string& path, std::size_t width, std::size_t height, int channels,
                      const std::uint8_t* data) {
  FilePtr file(std::fopen(path.c_str(), "wb"));
  require(file != nullptr, Errc::io, "cannot create " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  require(png != nullptr, Errc::io, "libpng write init failed");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(Errc::io, "libpng failed writing " + path);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t r = 0; r < height; ++r)
    png_write_row(png, const_cast<png_bytep>(data + r * width * static_cast<std::size_t>(channels)));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

struct RawImage {
  std::size_t width = 0, height = 0;
  int channels = 0;
  std::vector<std::uint8_t> data;
};

// Decodes to 8-bit grey or RGB (palette and 16-bit expanded/stripped, alpha dropped).
inline RawImage read_png(const std::string& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  require(file != nullptr, Errc::io, "cannot open " + path);
  unsigned char sig[8];
  require(std::fread(sig, 1, 8, file.get()) == 8 && png_sig_cmp(sig, 0, 8) == 0, Errc::parse,
          path + " is not a PNG file");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  require(png != nullptr, Errc::io, "libpng read init failed");
  png_infop info = png_create_info_struct(png);
  RawImage img;
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(Errc::parse, "libpng failed reading " + path);
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int type = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (type == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  img.width = png_get_image_width(png, info);
  img.height = png_get_image_height(png, info);
  img.channels = png_get_channels(png, info);
  img.data.resize(img.width * img.height * static_cast<std::size_t>(img.channels));
  for (std::size_t r = 0; r < img.height; ++r)
    png_read_row(png, img.data.data() + r * img.width * static_cast<std::size_t>(img.channels), nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

}  // namespace detail

inline void write_mask_png(const std::string& path, const PixelMask& mask) {
  std::vector<std::uint8_t> bytes(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) bytes[i] = mask[i] ? 255 : 0;
  detail::write_png(path, mask.cols(), mask.rows(), 1, bytes.data());
}

inline void write_rgb_png(const std::string& path, const RgbImage& image) {
  detail::write_png(path, image.width, image.height, 3, image.rgb.data());
}

/// With `strict`, values other than 0 and 255 are a parse error.
inline PixelMask read_mask_png(const std::string& path, bool strict = false) {
  const auto raw = detail::read_png(path);
  require(raw.channels == 1, Errc::parse, path + " is not a single-channel mask");
  PixelMask mask(raw.height, raw.width);
  for (std::size_t i = 0; i < raw.data.size(); ++i) {
    require(!strict || raw.data[i] == 0 || raw.data[i] == 255, Errc::parse, path + " holds values other than 0/255");
    mask[i] = raw.data[i] != 0 ? 1 : 0;
  }
  return mask;
}

inline RgbImage read_rgb_png(const std::string& path) {
  const auto raw = detail::read_png(path);
  RgbImage img(raw.width, raw.height);
  if (raw.channels == 3) {
    img.rgb = raw.data;
  } else {
    require(raw.channels == 1, Errc::parse, path + " has an unsupported channel layout");
    for (std::size_t i = 0; i < raw.data.size(); ++i) img.rgb[3 * i] = img.rgb[3 * i + 1] = img.rgb[3 * i + 2] = raw.data[i];
  }
  return img;
}

}  // namespace tadap
