#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "hsifuse/image.hpp"

namespace hsifuse {

namespace detail {

// Catmull-Rom weights (a = -1/2) for the four taps at offsets -1..2.
inline void catmull_rom_weights(double t, double w[4]) {
  const double t2 = t * t, t3 = t2 * t;
  w[0] = -0.5 * t3 + t2 - 0.5 * t;
  w[1] = 1.5 * t3 - 2.5 * t2 + 1.0;
  w[2] = -1.5 * t3 + 2.0 * t2 + 0.5 * t;
  w[3] = 0.5 * t3 - 0.5 * t2;
}

// Per-plane bicubic with half-pixel-center coordinate mapping and edge
// clamping. src/dst are row-major h x w planes.
inline void bicubic_plane(const float* src, int h, int w, float* dst, int oh, int ow) {
  const double sy = static_cast<double>(h) / oh;
  const double sx = static_cast<double>(w) / ow;
  std::vector<int> xi(static_cast<std::size_t>(ow) * 4);
  std::vector<double> xw(static_cast<std::size_t>(ow) * 4);
  for (int ox = 0; ox < ow; ++ox) {
    const double s = (ox + 0.5) * sx - 0.5;
    const int i1 = static_cast<int>(std::floor(s));
    double wgt[4];
    catmull_rom_weights(s - i1, wgt);
    for (int k = 0; k < 4; ++k) {
      xi[ox * 4 + k] = std::clamp(i1 - 1 + k, 0, w - 1);
      xw[ox * 4 + k] = wgt[k];
    }
  }
  for (int oy = 0; oy < oh; ++oy) {
    const double s = (oy + 0.5) * sy - 0.5;
    const int j1 = static_cast<int>(std::floor(s));
    double wy[4];
    catmull_rom_weights(s - j1, wy);
    int yi[4];
    for (int k = 0; k < 4; ++k) yi[k] = std::clamp(j1 - 1 + k, 0, h - 1);
    float* drow = dst + static_cast<std::size_t>(oy) * ow;
    for (int ox = 0; ox < ow; ++ox) {
      double acc = 0.0;
      for (int ky = 0; ky < 4; ++ky) {
        const float* srow = src + static_cast<std::size_t>(yi[ky]) * w;
        double racc = 0.0;
        for (int kx = 0; kx < 4; ++kx) racc += xw[ox * 4 + kx] * srow[xi[ox * 4 + kx]];
        acc += wy[ky] * racc;
      }
      drow[ox] = static_cast<float>(acc);
    }
  }
}

}  // namespace detail

/// Per-band Catmull-Rom bicubic resize to explicit target dims; output is
/// clamped to [0,1].
inline HsiCube bicubic_resize_to(const HsiCube& cube, int oh, int ow) {
  require(oh >= 1 && ow >= 1, "bicubic_resize: target dims must be >= 1");
  HsiCube out(cube.bands, oh, ow);
  out.wavelengths = cube.wavelengths;
  for (int b = 0; b < cube.bands; ++b) {
    detail::bicubic_plane(cube.band(b), cube.height, cube.width, out.band(b), oh, ow);
  }
  for (auto& v : out.data) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

/// Rational scale factor num/den; target dims must come out integral.
inline HsiCube bicubic_resize(const HsiCube& cube, int num, int den = 1) {
  require(num >= 1 && den >= 1, "bicubic_resize: factor must be positive");
  require((cube.height * num) % den == 0 && (cube.width * num) % den == 0,
          "bicubic_resize: factor must yield integral dims");
  return bicubic_resize_to(cube, cube.height * num / den, cube.width * num / den);
}

inline RgbImage bicubic_resize_to(const RgbImage& img, int oh, int ow) {
  require(oh >= 1 && ow >= 1, "bicubic_resize: target dims must be >= 1");
  RgbImage out(oh, ow);
  for (int c = 0; c < 3; ++c) {
    detail::bicubic_plane(img.data.data() + static_cast<std::size_t>(c) * img.plane(), img.height,
                          img.width, out.data.data() + static_cast<std::size_t>(c) * out.plane(),
                          oh, ow);
  }
  for (auto& v : out.data) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

}  // namespace hsifuse
