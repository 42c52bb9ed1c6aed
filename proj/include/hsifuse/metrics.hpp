#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "hsifuse/image.hpp"

namespace hsifuse {

namespace detail {

inline void check_same_dims(const HsiCube& a, const HsiCube& b, const char* op) {
  require(a.bands == b.bands && a.height == b.height && a.width == b.width,
          std::string(op) + ": cube dims mismatch");
}

}  // namespace detail

/// Band-wise PSNR (data range 1.0), averaged over bands. A band with
/// MSE < 1e-10 contributes the 100 dB cap.
inline double psnr(const HsiCube& a, const HsiCube& b) {
  detail::check_same_dims(a, b, "psnr");
  const std::size_t plane = a.plane();
  double total = 0.0;
  for (int band = 0; band < a.bands; ++band) {
    const float* pa = a.band(band);
    const float* pb = b.band(band);
    double mse = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
      const double d = static_cast<double>(pa[i]) - static_cast<double>(pb[i]);
      mse += d * d;
    }
    mse /= static_cast<double>(plane);
    total += mse < 1e-10 ? 100.0 : 10.0 * std::log10(1.0 / mse);
  }
  return total / a.bands;
}

namespace detail {

// 11-tap Gaussian window (sigma 1.5), normalized.
inline const std::vector<double>& ssim_window() {
  static const std::vector<double> w = [] {
    std::vector<double> v(11);
    double s = 0.0;
    for (int i = 0; i < 11; ++i) {
      v[i] = std::exp(-(i - 5.0) * (i - 5.0) / (2.0 * 1.5 * 1.5));
      s += v[i];
    }
    for (auto& x : v) x /= s;
    return v;
  }();
  return w;
}

// Separable weighted filtering over the valid region (output (h-10)x(w-10)).
inline std::vector<double> ssim_filter_valid(const std::vector<double>& in, int h, int w) {
  const auto& win = ssim_window();
  const int oh = h - 10, ow = w - 10;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < 11; ++k) acc += win[k] * in[static_cast<std::size_t>(y) * w + x + k];
      tmp[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < 11; ++k) acc += win[k] * tmp[static_cast<std::size_t>(y + k) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  return out;
}

}  // namespace detail

/// Band-wise SSIM with an 11x11 Gaussian window (sigma 1.5), K1=0.01,
/// K2=0.03, L=1, averaged over the valid window positions and then over
/// bands.
inline double ssim(const HsiCube& a, const HsiCube& b) {
  detail::check_same_dims(a, b, "ssim");
  require(a.height >= 11 && a.width >= 11, "ssim: dims must be at least the 11x11 window");
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const int h = a.height, w = a.width;
  const std::size_t plane = a.plane();
  double total = 0.0;
  std::vector<double> xa(plane), xb(plane), xaa(plane), xbb(plane), xab(plane);
  for (int band = 0; band < a.bands; ++band) {
    const float* pa = a.band(band);
    const float* pb = b.band(band);
    for (std::size_t i = 0; i < plane; ++i) {
      xa[i] = pa[i];
      xb[i] = pb[i];
      xaa[i] = xa[i] * xa[i];
      xbb[i] = xb[i] * xb[i];
      xab[i] = xa[i] * xb[i];
    }
    const auto mu_a = detail::ssim_filter_valid(xa, h, w);
    const auto mu_b = detail::ssim_filter_valid(xb, h, w);
    const auto m_aa = detail::ssim_filter_valid(xaa, h, w);
    const auto m_bb = detail::ssim_filter_valid(xbb, h, w);
    const auto m_ab = detail::ssim_filter_valid(xab, h, w);
    double acc = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
      const double va = m_aa[i] - mu_a[i] * mu_a[i];
      const double vb = m_bb[i] - mu_b[i] * mu_b[i];
      const double cov = m_ab[i] - mu_a[i] * mu_b[i];
      acc += ((2 * mu_a[i] * mu_b[i] + c1) * (2 * cov + c2)) /
             ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2));
    }
    total += acc / static_cast<double>(mu_a.size());
  }
  return total / a.bands;
}

/// Per-band PSNR values (same convention as psnr()).
inline std::vector<double> psnr_per_band(const HsiCube& a, const HsiCube& b) {
  detail::check_same_dims(a, b, "psnr");
  const std::size_t plane = a.plane();
  std::vector<double> out(static_cast<std::size_t>(a.bands));
  for (int band = 0; band < a.bands; ++band) {
    const float* pa = a.band(band);
    const float* pb = b.band(band);
    double mse = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
      const double d = static_cast<double>(pa[i]) - static_cast<double>(pb[i]);
      mse += d * d;
    }
    mse /= static_cast<double>(plane);
    out[static_cast<std::size_t>(band)] = mse < 1e-10 ? 100.0 : 10.0 * std::log10(1.0 / mse);
  }
  return out;
}

/// Per-band SSIM values (same convention as ssim()).
inline std::vector<double> ssim_per_band(const HsiCube& a, const HsiCube& b) {
  detail::check_same_dims(a, b, "ssim");
  require(a.height >= 11 && a.width >= 11, "ssim: dims must be at least the 11x11 window");
  std::vector<double> out(static_cast<std::size_t>(a.bands));
  HsiCube sa(1, a.height, a.width), sb(1, a.height, a.width);
  for (int band = 0; band < a.bands; ++band) {
    std::copy(a.band(band), a.band(band) + a.plane(), sa.band(0));
    std::copy(b.band(band), b.band(band) + b.plane(), sb.band(0));
    out[static_cast<std::size_t>(band)] = ssim(sa, sb);
  }
  return out;
}

/// Mean spectral angle in radians. Zero-norm spectra contribute angle 0
/// and are counted in the mean; the arccos argument is clamped to [-1,1].
inline double sam(const HsiCube& a, const HsiCube& b) {
  detail::check_same_dims(a, b, "sam");
  const std::size_t plane = a.plane();
  double total = 0.0;
  for (std::size_t i = 0; i < plane; ++i) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int band = 0; band < a.bands; ++band) {
      const double va = a.data[static_cast<std::size_t>(band) * plane + i];
      const double vb = b.data[static_cast<std::size_t>(band) * plane + i];
      dot += va * vb;
      na += va * va;
      nb += vb * vb;
    }
    if (na <= 0.0 || nb <= 0.0) continue;  // zero-norm pixels contribute 0
    const double arg = std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
    total += std::acos(arg);
  }
  return total / static_cast<double>(plane);
}

}  // namespace hsifuse
