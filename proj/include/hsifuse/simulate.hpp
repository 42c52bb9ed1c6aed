#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hsifuse/image.hpp"
#include "hsifuse/rng.hpp"

namespace hsifuse {

/// Spectral response function: 3 x B nonnegative matrix, each row summing
/// to 1 after normalization.
struct Srf {
  int bands = 0;
  std::vector<float> rows;  // [3][B]

  float at(int c, int b) const { return rows[static_cast<std::size_t>(c) * bands + b]; }
  float& at(int c, int b) { return rows[static_cast<std::size_t>(c) * bands + b]; }

  void normalize_rows() {
    for (int c = 0; c < 3; ++c) {
      double s = 0.0;
      for (int b = 0; b < bands; ++b) s += at(c, b);
      require(s > 0.0, "Srf: row sums must be positive");
      for (int b = 0; b < bands; ++b) at(c, b) = static_cast<float>(at(c, b) / s);
    }
  }
};

/// Smooth triangular responses peaked at 460/550/620 nm over B bands spread
/// across 400-700 nm; stands in for a measured camera response matrix.
inline Srf default_srf(int bands) {
  require(bands >= 1, "default_srf: bands must be >= 1");
  Srf srf;
  srf.bands = bands;
  srf.rows.assign(3 * static_cast<std::size_t>(bands), 0.0f);
  const double peaks[3] = {620.0, 550.0, 460.0};  // r, g, b
  const double width = 90.0;
  for (int c = 0; c < 3; ++c) {
    for (int b = 0; b < bands; ++b) {
      const double wl = bands == 1 ? 550.0 : 400.0 + 300.0 * b / (bands - 1);
      const double v = std::max(0.0, 1.0 - std::abs(wl - peaks[c]) / width);
      srf.at(c, b) = static_cast<float>(v + 1e-4);  // keep rows strictly positive
    }
  }
  srf.normalize_rows();
  return srf;
}

/// Parses a 3-row CSV of sensitivities (one row per channel, B columns).
inline Srf load_srf_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError(IoError::Kind::open_failed, "load_srf_csv: cannot open " + path);
  std::vector<std::vector<float>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<float> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stof(cell));
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.size() != 3) throw IoError(IoError::Kind::malformed, "load_srf_csv: expected 3 rows");
  Srf srf;
  srf.bands = static_cast<int>(rows[0].size());
  for (const auto& r : rows) {
    if (static_cast<int>(r.size()) != srf.bands) {
      throw IoError(IoError::Kind::malformed, "load_srf_csv: ragged rows");
    }
    for (float v : r) {
      if (v < 0.0f) throw IoError(IoError::Kind::value_out_of_range, "load_srf_csv: negative value");
      srf.rows.push_back(v);
    }
  }
  srf.normalize_rows();
  return srf;
}

/// Per pixel rgb = srf * spectrum, clamped to [0,1].
inline RgbImage srf_project(const HsiCube& cube, const Srf& srf) {
  require(srf.bands == cube.bands, "srf_project: SRF column count must equal band count");
  RgbImage img(cube.height, cube.width);
  const std::size_t plane = cube.plane();
  for (int c = 0; c < 3; ++c) {
    float* dst = img.data.data() + static_cast<std::size_t>(c) * plane;
    for (int b = 0; b < cube.bands; ++b) {
      const float w = srf.at(c, b);
      const float* src = cube.band(b);
      for (std::size_t i = 0; i < plane; ++i) dst[i] += w * src[i];
    }
  }
  for (auto& v : img.data) v = std::clamp(v, 0.0f, 1.0f);
  return img;
}

namespace detail {

inline int reflect_index(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - i - 1;
  }
  return i;
}

// Normalized 1D window of an even-sized Gaussian centered between samples.
inline std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> w(static_cast<std::size_t>(size));
  const double center = (size - 1) / 2.0;
  double s = 0.0;
  for (int i = 0; i < size; ++i) {
    w[i] = std::exp(-(i - center) * (i - center) / (2.0 * sigma * sigma));
    s += w[i];
  }
  for (auto& v : w) v /= s;
  return w;
}

}  // namespace detail

/// Per-band blur with a normalized size x size Gaussian window (sigma as
/// given), reflect-padded. Even windows are anchored at pixel
/// (size/2 - 1, size/2 - 1).
inline HsiCube gaussian_blur(const HsiCube& cube, int size = 8, double sigma = 3.0) {
  require(size >= 1, "gaussian_blur: window size must be >= 1");
  const auto w1d = detail::gaussian_window(size, sigma);
  const int anchor = (size - 1) / 2;
  HsiCube out(cube.bands, cube.height, cube.width);
  out.wavelengths = cube.wavelengths;
  const int h = cube.height, w = cube.width;
  std::vector<double> tmp(static_cast<std::size_t>(h) * w);
  for (int b = 0; b < cube.bands; ++b) {
    const float* src = cube.band(b);
    // horizontal
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int k = 0; k < size; ++k) {
          acc += w1d[k] * src[static_cast<std::size_t>(y) * w + detail::reflect_index(x + k - anchor, w)];
        }
        tmp[static_cast<std::size_t>(y) * w + x] = acc;
      }
    }
    // vertical
    float* dst = out.band(b);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int k = 0; k < size; ++k) {
          acc += w1d[k] * tmp[static_cast<std::size_t>(detail::reflect_index(y + k - anchor, h)) * w + x];
        }
        dst[static_cast<std::size_t>(y) * w + x] = static_cast<float>(std::clamp(acc, 0.0, 1.0));
      }
    }
  }
  return out;
}

/// Gaussian blur followed by decimation (every scale-th pixel, offset 0).
inline HsiCube degrade(const HsiCube& cube, int scale, int blur_size = 8, double blur_sigma = 3.0) {
  require(scale == 4 || scale == 8 || scale == 16, "degrade: scale must be 4, 8 or 16");
  require(cube.height % scale == 0 && cube.width % scale == 0,
          "degrade: dims must be divisible by scale");
  HsiCube blurred = gaussian_blur(cube, blur_size, blur_sigma);
  HsiCube out(cube.bands, cube.height / scale, cube.width / scale);
  out.wavelengths = cube.wavelengths;
  for (int b = 0; b < cube.bands; ++b) {
    const float* src = blurred.band(b);
    float* dst = out.band(b);
    for (int y = 0; y < out.height; ++y) {
      for (int x = 0; x < out.width; ++x) {
        dst[static_cast<std::size_t>(y) * out.width + x] =
            src[static_cast<std::size_t>(y) * scale * cube.width + x * scale];
      }
    }
  }
  return out;
}

/// Monotone per-channel CDF matching of src onto ref with 256-bin
/// histograms; sizes may differ.
inline RgbImage histogram_match(const RgbImage& src, const RgbImage& ref) {
  constexpr int kBins = 256;
  RgbImage out(src.height, src.width);
  const std::size_t sp = src.plane(), rp = ref.plane();
  for (int c = 0; c < 3; ++c) {
    const float* s = src.data.data() + static_cast<std::size_t>(c) * sp;
    const float* r = ref.data.data() + static_cast<std::size_t>(c) * rp;
    std::array<double, kBins> hs{}, hr{};
    auto bin_of = [](float v) {
      int b = static_cast<int>(std::clamp(v, 0.0f, 1.0f) * kBins);
      return b >= kBins ? kBins - 1 : b;
    };
    for (std::size_t i = 0; i < sp; ++i) hs[bin_of(s[i])] += 1.0;
    for (std::size_t i = 0; i < rp; ++i) hr[bin_of(r[i])] += 1.0;
    std::array<double, kBins> cs{}, cr{};
    double accs = 0.0, accr = 0.0;
    for (int b = 0; b < kBins; ++b) {
      accs += hs[b] / static_cast<double>(sp);
      accr += hr[b] / static_cast<double>(rp);
      cs[b] = accs;
      cr[b] = accr;
    }
    std::array<float, kBins> lut{};
    int rb = 0;
    for (int b = 0; b < kBins; ++b) {
      while (rb < kBins - 1 && cr[rb] < cs[b] - 1e-12) ++rb;
      lut[b] = (rb + 0.5f) / kBins;
    }
    float* o = out.data.data() + static_cast<std::size_t>(c) * sp;
    for (std::size_t i = 0; i < sp; ++i) o[i] = lut[bin_of(s[i])];
  }
  return out;
}

/// A synthetic scene pair: ground-truth cube, a viewpoint-shifted copy and
/// the dense flow that aligns the shifted copy back onto the ground truth
/// (warp(ref, gt_flow) ~= hr).
struct ScenePair {
  HsiCube hr_cube;
  HsiCube ref_cube;
  FlowField gt_flow;
  std::uint64_t seed = 0;
};

namespace detail {

struct Polygon {
  std::vector<double> vx, vy;  // convex, CCW

  bool contains(double x, double y) const {
    const std::size_t n = vx.size();
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = (i + 1) % n;
      const double cross = (vx[j] - vx[i]) * (y - vy[i]) - (vy[j] - vy[i]) * (x - vx[i]);
      if (cross < 0.0) return false;
    }
    return true;
  }
};

inline Polygon random_polygon(Rng& rng, int h, int w) {
  Polygon poly;
  const double cx = rng.uniform(0.1, 0.9) * w;
  const double cy = rng.uniform(0.1, 0.9) * h;
  const double radius = rng.uniform(0.08, 0.28) * std::min(h, w);
  const int nv = 3 + rng.uniform_int(5);
  std::vector<double> angles(nv);
  for (auto& a : angles) a = rng.uniform(0.0, 6.283185307179586);
  std::sort(angles.begin(), angles.end());
  for (int i = 0; i < nv; ++i) {
    const double r = radius * rng.uniform(0.55, 1.0);
    poly.vx.push_back(cx + r * std::cos(angles[i]));
    poly.vy.push_back(cy + r * std::sin(angles[i]));
  }
  return poly;
}

// Smooth random spectrum over B bands, affinely mapped into a random
// subrange of [0.05, 0.95].
inline std::vector<float> random_spectrum(Rng& rng, int bands) {
  std::vector<double> s(static_cast<std::size_t>(bands), 0.0);
  const int ngauss = 2 + rng.uniform_int(2);
  for (int g = 0; g < ngauss; ++g) {
    const double mu = rng.uniform(-0.2, 1.2) * (bands - 1);
    const double sig = rng.uniform(0.08, 0.35) * bands + 1e-3;
    const double amp = rng.uniform(-1.0, 1.0);
    for (int b = 0; b < bands; ++b) s[b] += amp * std::exp(-(b - mu) * (b - mu) / (2 * sig * sig));
  }
  const double lo = rng.uniform(0.05, 0.35);
  const double hi = rng.uniform(0.55, 0.95);
  const double mn = *std::min_element(s.begin(), s.end());
  const double mx = *std::max_element(s.begin(), s.end());
  std::vector<float> out(static_cast<std::size_t>(bands));
  for (int b = 0; b < bands; ++b) {
    const double t = mx - mn > 1e-9 ? (s[b] - mn) / (mx - mn) : 0.5;
    out[b] = static_cast<float>(lo + t * (hi - lo));
  }
  return out;
}



}  // namespace detail

/// Deterministic scene generator. The ground-truth cube is built from
/// random smooth spectra on random convex polygons plus band-correlated
/// texture; the reference copy is the ground truth resampled through the
/// inverse of a (random affine o random smooth flow) displacement whose
/// magnitude is bounded by max_disp. gt_flow aligns ref back onto hr.
inline ScenePair synth_scene(std::uint64_t seed, int bands, int h, int w, double max_disp) {
  require(h >= 32 && w >= 32, "synth_scene: dims must be >= 32");
  require(max_disp >= 0.0 && max_disp <= 10.0, "synth_scene: max_disp must be in [0, 10]");

  Rng rng(seed);
  ScenePair pair;
  pair.seed = seed;
  pair.hr_cube = HsiCube(bands, h, w);
  pair.ref_cube = HsiCube(bands, h, w);
  pair.gt_flow = FlowField(h, w);

  // region map: background 0, then overlapping polygons
  const int npoly = 5 + rng.uniform_int(6);
  std::vector<std::vector<float>> spectra;
  spectra.push_back(detail::random_spectrum(rng, bands));
  std::vector<int> region(static_cast<std::size_t>(h) * w, 0);
  for (int p = 1; p <= npoly; ++p) {
    spectra.push_back(detail::random_spectrum(rng, bands));
    const auto poly = detail::random_polygon(rng, h, w);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (poly.contains(x + 0.5, y + 0.5)) region[static_cast<std::size_t>(y) * w + x] = p;
      }
    }
  }

  // band-correlated texture: oriented cosines plus lightly smoothed noise
  std::vector<double> tex(static_cast<std::size_t>(h) * w, 0.0);
  const int noct = 4;
  for (int o = 0; o < noct; ++o) {
    const double freq = rng.uniform(2.0, 6.0) * (1 << o);
    const double theta = rng.uniform(0.0, 6.283185307179586);
    const double phase = rng.uniform(0.0, 6.283185307179586);
    const double amp = std::pow(0.55, o);
    const double fx = freq * std::cos(theta) / std::min(h, w);
    const double fy = freq * std::sin(theta) / std::min(h, w);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        tex[static_cast<std::size_t>(y) * w + x] +=
            amp * std::cos(6.283185307179586 * (fx * x + fy * y) + phase);
      }
    }
  }
  {
    std::vector<double> noise(tex.size());
    for (auto& v : noise) v = rng.uniform(-1.0, 1.0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        int cnt = 0;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int yy = y + dy, xx = x + dx;
            if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
            acc += noise[static_cast<std::size_t>(yy) * w + xx];
            ++cnt;
          }
        }
        tex[static_cast<std::size_t>(y) * w + x] += 1.1 * acc / cnt;
      }
    }
  }
  double tmax = 1e-9;
  for (double v : tex) tmax = std::max(tmax, std::abs(v));
  for (auto& v : tex) v /= tmax;

  std::vector<double> band_amp(static_cast<std::size_t>(bands));
  const double amp_phase = rng.uniform(0.0, 3.141592653589793);
  for (int b = 0; b < bands; ++b) {
    band_amp[b] = 0.25 * (0.8 + 0.2 * std::cos(3.141592653589793 * b / bands + amp_phase));
  }

  for (int b = 0; b < bands; ++b) {
    float* dst = pair.hr_cube.band(b);
    for (std::size_t i = 0; i < region.size(); ++i) {
      const double v = spectra[static_cast<std::size_t>(region[i])][b] * (1.0 + band_amp[b] * tex[i]);
      dst[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }

  // displacement field v on the hr grid (the flow that aligns ref to hr):
  // smooth sinusoidal field composed with a small affine
  std::vector<double> vx(region.size(), 0.0), vy(region.size(), 0.0);
  if (max_disp > 0.0) {
    const double angle = rng.uniform(-0.03, 0.03);
    const double sc = 1.0 + rng.uniform(-0.015, 0.015);
    const double tx = rng.uniform(-0.5, 0.5) * max_disp;
    const double ty = rng.uniform(-0.5, 0.5) * max_disp;
    const double ca = std::cos(angle) * sc, sa = std::sin(angle) * sc;
    const double cx = w / 2.0, cy = h / 2.0;

    const double m1 = rng.uniform(0.2, 0.5) * max_disp;
    const double m2 = rng.uniform(0.2, 0.5) * max_disp;
    const double f1 = rng.uniform(0.5, 1.6), f2 = rng.uniform(0.5, 1.6);
    const double p1 = rng.uniform(0.0, 6.28), p2 = rng.uniform(0.0, 6.28);
    const double q1 = rng.uniform(0.0, 6.28), q2 = rng.uniform(0.0, 6.28);

    double vmax = 0.0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        const double sx = m1 * std::sin(6.283185307179586 * f1 * (x + 0.7 * y) / std::min(h, w) + p1) *
                          std::cos(6.283185307179586 * 0.5 * f2 * y / std::min(h, w) + q1);
        const double sy = m2 * std::sin(6.283185307179586 * f2 * (y - 0.4 * x) / std::min(h, w) + p2) *
                          std::cos(6.283185307179586 * 0.5 * f1 * x / std::min(h, w) + q2);
        // affine applied after the smooth field
        const double px = x + sx, py = y + sy;
        const double ax = ca * (px - cx) - sa * (py - cy) + cx + tx;
        const double ay = sa * (px - cx) + ca * (py - cy) + cy + ty;
        vx[i] = ax - x;
        vy[i] = ay - y;
        vmax = std::max(vmax, std::max(std::abs(vx[i]), std::abs(vy[i])));
      }
    }
    if (vmax > 0.98 * max_disp) {
      const double s = 0.98 * max_disp / vmax;
      for (std::size_t i = 0; i < vx.size(); ++i) {
        vx[i] *= s;
        vy[i] *= s;
      }
    }
  }

  // invert v by Picard iteration: g(q) = -v(q + g(q)); then
  // ref(q) = hr(q + g(q)) so that warp(ref, v) recovers hr.
  std::vector<float> vxf(vx.begin(), vx.end()), vyf(vy.begin(), vy.end());
  std::vector<double> gx(region.size(), 0.0), gy(region.size(), 0.0);
  if (max_disp > 0.0) {
    for (int iter = 0; iter < 10; ++iter) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const std::size_t i = static_cast<std::size_t>(y) * w + x;
          gx[i] = -detail::bilinear_clamped(vxf.data(), h, w, x + gx[i], y + gy[i]);
          gy[i] = -detail::bilinear_clamped(vyf.data(), h, w, x + gx[i], y + gy[i]);
        }
      }
    }
  }

  for (int b = 0; b < bands; ++b) {
    const float* src = pair.hr_cube.band(b);
    float* dst = pair.ref_cube.band(b);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        dst[i] = max_disp > 0.0 ? detail::bilinear_clamped(src, h, w, x + gx[i], y + gy[i]) : src[i];
      }
    }
  }

  for (std::size_t i = 0; i < region.size(); ++i) {
    pair.gt_flow.data[i] = vxf[i];
    pair.gt_flow.data[region.size() + i] = vyf[i];
  }
  return pair;
}

}  // namespace hsifuse
