#pragma once
// Dense interleaved images plus the handful of pixel ops the pipeline needs.
// PNG I/O goes through libpng with fixed encoder settings so identical pixels
// always produce identical bytes.

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "lcd/error.hpp"

namespace lcd {

template <typename T>
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<T> data;  // row-major, interleaved

  Image() = default;
  Image(int w, int h, int c, T fill = T{})
      : width(w), height(h), channels(c),
        data(static_cast<size_t>(w) * h * c, fill) {}

  bool empty() const { return data.empty(); }
  size_t pixel_count() const { return static_cast<size_t>(width) * height; }

  T& at(int x, int y, int c = 0) {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  const T& at(int x, int y, int c = 0) const {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }

  bool same_shape(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
};

using ImageU8 = Image<uint8_t>;
using ImageF = Image<float>;

template <typename T>
inline bool operator==(const Image<T>& a, const Image<T>& b) {
  return a.width == b.width && a.height == b.height && a.channels == b.channels &&
         a.data == b.data;
}

template <typename T>
inline Image<T> crop(const Image<T>& img, int x, int y, int w, int h) {
  if (x < 0 || y < 0 || w < 1 || h < 1 || x + w > img.width || y + h > img.height)
    fail(ErrorCode::out_of_bounds, "crop window outside image");
  Image<T> out(w, h, img.channels);
  for (int yy = 0; yy < h; ++yy)
    for (int xx = 0; xx < w; ++xx)
      for (int c = 0; c < img.channels; ++c) out.at(xx, yy, c) = img.at(x + xx, y + yy, c);
  return out;
}

enum class BorderMode { replicate, zero };

// Shift by (dx, dy): out(x, y) = in(x - dx, y - dy).
template <typename T>
inline Image<T> translate(const Image<T>& img, int dx, int dy, BorderMode border) {
  Image<T> out(img.width, img.height, img.channels);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      int sx = x - dx, sy = y - dy;
      bool inside = sx >= 0 && sx < img.width && sy >= 0 && sy < img.height;
      if (!inside) {
        if (border == BorderMode::zero) continue;  // out already zero-filled
        sx = std::clamp(sx, 0, img.width - 1);
        sy = std::clamp(sy, 0, img.height - 1);
      }
      for (int c = 0; c < img.channels; ++c) out.at(x, y, c) = img.at(sx, sy, c);
    }
  }
  return out;
}

// Nearest-neighbor: source index floor((i + 0.5) * src / dst), clamped.
template <typename T>
inline Image<T> resize_nearest(const Image<T>& img, int ow, int oh) {
  if (ow < 1 || oh < 1) fail(ErrorCode::invalid_input, "resize target must be >= 1x1");
  Image<T> out(ow, oh, img.channels);
  for (int y = 0; y < oh; ++y) {
    int sy = std::min(img.height - 1,
                      static_cast<int>(std::floor((y + 0.5) * img.height / oh)));
    for (int x = 0; x < ow; ++x) {
      int sx = std::min(img.width - 1,
                        static_cast<int>(std::floor((x + 0.5) * img.width / ow)));
      for (int c = 0; c < img.channels; ++c) out.at(x, y, c) = img.at(sx, sy, c);
    }
  }
  return out;
}

inline ImageF resize_bilinear(const ImageF& img, int ow, int oh) {
  if (ow < 1 || oh < 1) fail(ErrorCode::invalid_input, "resize target must be >= 1x1");
  ImageF out(ow, oh, img.channels);
  const double sx_ratio = static_cast<double>(img.width) / ow;
  const double sy_ratio = static_cast<double>(img.height) / oh;
  for (int y = 0; y < oh; ++y) {
    double fy = (y + 0.5) * sy_ratio - 0.5;
    int y0 = static_cast<int>(std::floor(fy));
    double wy = fy - y0;
    int y1 = std::clamp(y0 + 1, 0, img.height - 1);
    y0 = std::clamp(y0, 0, img.height - 1);
    for (int x = 0; x < ow; ++x) {
      double fx = (x + 0.5) * sx_ratio - 0.5;
      int x0 = static_cast<int>(std::floor(fx));
      double wx = fx - x0;
      int x1 = std::clamp(x0 + 1, 0, img.width - 1);
      x0 = std::clamp(x0, 0, img.width - 1);
      for (int c = 0; c < img.channels; ++c) {
        double top = img.at(x0, y0, c) * (1.0 - wx) + img.at(x1, y0, c) * wx;
        double bot = img.at(x0, y1, c) * (1.0 - wx) + img.at(x1, y1, c) * wx;
        out.at(x, y, c) = static_cast<float>(top * (1.0 - wy) + bot * wy);
      }
    }
  }
  return out;
}

// Luma conversion to [0,1]; single-channel input passes through scaled.
inline ImageF to_gray(const ImageU8& img) {
  ImageF out(img.width, img.height, 1);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      float g;
      if (img.channels >= 3) {
        g = 0.299f * img.at(x, y, 0) + 0.587f * img.at(x, y, 1) + 0.114f * img.at(x, y, 2);
      } else {
        g = img.at(x, y, 0);
      }
      out.at(x, y) = g / 255.0f;
    }
  }
  return out;
}

inline size_t count_nonzero(const ImageU8& mask) {
  size_t n = 0;
  for (uint8_t v : mask.data) n += v != 0;
  return n;
}

// ------------------------------------------------------------------ PNG I/O

inline ImageU8 read_png(const std::filesystem::path& path) {
  FILE* fp = std::fopen(path.string().c_str(), "rb");
  if (!fp) fail(ErrorCode::io_error, "cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    fail(ErrorCode::io_error, "libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    fail(ErrorCode::io_error, "png decode failed: " + path.string());
  }
  png_init_io(png, fp);
  png_read_info(png, info);

  png_uint_32 w = png_get_image_width(png, info);
  png_uint_32 h = png_get_image_height(png, info);
  int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_read_update_info(png, info);

  int channels = png_get_channels(png, info);
  ImageU8 out(static_cast<int>(w), static_cast<int>(h), channels);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y)
    rows[y] = out.data.data() + static_cast<size_t>(y) * w * channels;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return out;
}

inline void write_png(const std::filesystem::path& path, const ImageU8& img) {
  int color;
  switch (img.channels) {
    case 1: color = PNG_COLOR_TYPE_GRAY; break;
    case 3: color = PNG_COLOR_TYPE_RGB; break;
    case 4: color = PNG_COLOR_TYPE_RGBA; break;
    default: fail(ErrorCode::invalid_input, "png writer supports 1/3/4 channels");
  }
  std::filesystem::create_directories(path.parent_path());
  FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) fail(ErrorCode::io_error, "cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    fail(ErrorCode::io_error, "libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    fail(ErrorCode::io_error, "png encode failed: " + path.string());
  }
  png_init_io(png, fp);
  png_set_compression_level(png, 6);  // pinned: output bytes are part of determinism checks
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), 8, color, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(static_cast<size_t>(img.height));
  for (int y = 0; y < img.height; ++y)
    rows[static_cast<size_t>(y)] = const_cast<png_bytep>(
        img.data.data() + static_cast<size_t>(y) * img.width * img.channels);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

}  // namespace lcd
