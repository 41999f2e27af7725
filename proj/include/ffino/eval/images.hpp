#pragma once

// Binary PPM (P6) output with a fixed 256-entry colormap.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "ffino/core/error.hpp"

namespace ffino {

using Rgb = std::array<std::uint8_t, 3>;

/// 256 colors, piecewise-linear through five anchors at 0, 1/4, 1/2, 3/4, 1:
/// (68,1,84) (59,82,139) (33,145,140) (94,201,98) (253,231,37), i.e. a
/// viridis-like ramp from dark purple to yellow.
inline const std::array<Rgb, 256>& colormap() {
  static const std::array<Rgb, 256> table = [] {
    constexpr double anchors[5][3] = {{68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}};
    std::array<Rgb, 256> t{};
    for (int i = 0; i < 256; ++i) {
      const double x = i / 255.0 * 4.0;
      const int k = std::min(3, static_cast<int>(x));
      const double f = x - k;
      for (int c = 0; c < 3; ++c) {
        t[i][c] = static_cast<std::uint8_t>(std::lround(anchors[k][c] + f * (anchors[k + 1][c] - anchors[k][c])));
      }
    }
    return t;
  }();
  return table;
}

inline Rgb color_of(double v, double lo, double hi) {
  const double t = hi > lo ? std::clamp((v - lo) / (hi - lo), 0.0, 1.0) : 0.0;
  return colormap()[static_cast<std::size_t>(std::lround(t * 255.0))];
}

struct Image {
  std::size_t width = 0, height = 0;
  std::vector<std::uint8_t> rgb;

  Image(std::size_t w, std::size_t h, std::uint8_t fill = 255) : width(w), height(h), rgb(w * h * 3, fill) {}

  void set(std::size_t x, std::size_t y, const Rgb& c) {
    std::copy(c.begin(), c.end(), rgb.begin() + static_cast<std::ptrdiff_t>((y * width + x) * 3));
  }
};

inline void write_ppm(const Image& img, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << "P6\n" << img.width << " " << img.height << "\n255\n";
  f.write(reinterpret_cast<const char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
  if (!f) throw IoError("write to '" + path + "' failed");
}

/// Reference | prediction | absolute error, one row of panels per report step.
/// Each panel has r along x and depth z along y (top of the aquifer first).
/// Reference and prediction share the reference's value range; the error
/// panel spans [0, max error].
inline Image render_triptych(std::span<const float> ref, std::span<const float> pred, std::size_t steps, std::size_t nr,
                             std::size_t nz) {
  constexpr std::size_t gap = 2;
  const std::size_t cells = nr * nz;
  double lo = INFINITY, hi = -INFINITY, emax = 0;
  for (std::size_t i = 0; i < steps * cells; ++i) {
    lo = std::min(lo, static_cast<double>(ref[i]));
    hi = std::max(hi, static_cast<double>(ref[i]));
    emax = std::max(emax, std::abs(static_cast<double>(pred[i]) - ref[i]));
  }
  Image img(3 * nr + 2 * gap, steps * nz + (steps - 1) * gap);
  for (std::size_t s = 0; s < steps; ++s)
    for (std::size_t i = 0; i < nr; ++i)
      for (std::size_t j = 0; j < nz; ++j) {
        const std::size_t at = s * cells + i * nz + j;
        const std::size_t y = s * (nz + gap) + j;
        img.set(i, y, color_of(ref[at], lo, hi));
        img.set(nr + gap + i, y, color_of(pred[at], lo, hi));
        img.set(2 * (nr + gap) + i, y, color_of(std::abs(static_cast<double>(pred[at]) - ref[at]), 0.0, emax));
      }
  return img;
}

}  // namespace ffino
