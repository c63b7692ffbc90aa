#pragma once

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "vocl/analysis/ablation.hpp"
#include "vocl/analysis/offset_matrix.hpp"

namespace vocl::plot {

namespace fs = std::filesystem;

/// 8-bit RGB raster.
struct Image {
  int width = 0, height = 0;
  std::vector<std::uint8_t> rgb;

  Image(int w, int h, std::array<std::uint8_t, 3> fill = {255, 255, 255})
      : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3) {
    for (std::size_t i = 0; i < rgb.size(); i += 3) std::copy(fill.begin(), fill.end(), rgb.begin() + i);
  }
  void fill_rect(int x0, int y0, int x1, int y1, std::array<std::uint8_t, 3> c) {
    for (int y = std::max(0, y0); y < std::min(height, y1); ++y)
      for (int x = std::max(0, x0); x < std::min(width, x1); ++x)
        std::copy(c.begin(), c.end(), rgb.begin() + (static_cast<std::size_t>(y) * width + x) * 3);
  }
};

inline void write_png(const Image& img, const fs::path& path) {
  FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) throw Error("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw Error("libpng failed writing " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y)
    png_write_row(png, const_cast<png_bytep>(img.rgb.data() + static_cast<std::size_t>(y) * img.width * 3));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

/// Dark blue -> yellow ramp, t in [0, 1].
inline std::array<std::uint8_t, 3> colormap(double t) {
  t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0);
  auto ch = [](double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255)); };
  return {ch(0.27 + 0.72 * t * t), ch(0.0 + 0.9 * t), ch(0.33 + 0.5 * t - 0.7 * t * t)};
}

/// Heatmap with one square cell per entry (row-major as stored), scaled to the value range.
inline Image heatmap(const Matrix& values, int cell = 48) {
  const double lo = values.minCoeff(), hi = values.maxCoeff();
  const double span = hi > lo ? hi - lo : 1.0;
  const int pad = cell / 4;
  Image img(static_cast<int>(values.cols()) * cell + 2 * pad, static_cast<int>(values.rows()) * cell + 2 * pad);
  for (Eigen::Index i = 0; i < values.rows(); ++i)
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      const int x = pad + static_cast<int>(j) * cell, y = pad + static_cast<int>(i) * cell;
      img.fill_rect(x + 1, y + 1, x + cell - 1, y + cell - 1, colormap((values(i, j) - lo) / span));
    }
  return img;
}

/// Horizontal bars (one per entry) with a thin whisker for the spread.
inline Image bar_table(const std::vector<double>& means, const std::vector<double>& spreads, int bar = 24,
                       int length = 400) {
  const int pad = 12;
  double hi = 1e-12;
  for (std::size_t i = 0; i < means.size(); ++i)
    hi = std::max(hi, means[i] + (i < spreads.size() ? spreads[i] : 0.0));
  Image img(length + 2 * pad, static_cast<int>(means.size()) * (bar + 6) + 2 * pad);
  for (std::size_t i = 0; i < means.size(); ++i) {
    const int y = pad + static_cast<int>(i) * (bar + 6);
    const int w = static_cast<int>(std::lround(std::max(0.0, means[i]) / hi * length));
    img.fill_rect(pad, y, pad + w, y + bar, colormap(0.2 + 0.6 * static_cast<double>(i) / std::max<std::size_t>(1, means.size())));
    if (i < spreads.size() && spreads[i] > 0) {
      const int a = pad + static_cast<int>(std::lround(std::max(0.0, means[i] - spreads[i]) / hi * length));
      const int b = pad + static_cast<int>(std::lround((means[i] + spreads[i]) / hi * length));
      img.fill_rect(a, y + bar / 2 - 1, b, y + bar / 2 + 1, {0, 0, 0});
    }
  }
  return img;
}

}  // namespace vocl::plot
