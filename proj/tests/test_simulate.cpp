#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <cstring>
#include <numeric>

#include "hsifuse/simulate.hpp"

namespace hf = hsifuse;

TEST(Srf, DefaultRowsAreNormalized) {
  const auto srf = hf::default_srf(31);
  for (int c = 0; c < 3; ++c) {
    double s = 0.0;
    for (int b = 0; b < 31; ++b) {
      EXPECT_GE(srf.at(c, b), 0.0f);
      s += srf.at(c, b);
    }
    EXPECT_NEAR(s, 1.0, 1e-5);
  }
}

TEST(SrfProject, FlatSpectrumGivesFlatRgb) {
  hf::HsiCube cube(8, 4, 4);
  std::fill(cube.data.begin(), cube.data.end(), 0.42f);
  const auto rgb = hf::srf_project(cube, hf::default_srf(8));
  for (float v : rgb.data) EXPECT_NEAR(v, 0.42f, 1e-5f);
}

TEST(SrfProject, OneHotRowSelectsBand) {
  hf::HsiCube cube(4, 3, 3);
  hf::Rng rng(2);
  for (auto& v : cube.data) v = static_cast<float>(rng.uniform());
  hf::Srf srf;
  srf.bands = 4;
  srf.rows.assign(12, 0.0f);
  srf.at(0, 2) = 1.0f;  // red row selects band 2
  srf.at(1, 0) = 1.0f;
  srf.at(2, 3) = 1.0f;
  const auto rgb = hf::srf_project(cube, srf);
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 3; ++x) {
      EXPECT_EQ(rgb.at(0, y, x), cube.at(2, y, x));
      EXPECT_EQ(rgb.at(1, y, x), cube.at(0, y, x));
      EXPECT_EQ(rgb.at(2, y, x), cube.at(3, y, x));
    }
  }
}

TEST(SrfProject, MatchesPerPixelDotProductOracle) {
  hf::HsiCube cube(4, 5, 6);
  hf::Rng rng(3);
  for (auto& v : cube.data) v = static_cast<float>(rng.uniform());
  const auto srf = hf::default_srf(4);
  const auto rgb = hf::srf_project(cube, srf);
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 6; ++x) {
      for (int c = 0; c < 3; ++c) {
        float acc = 0.0f;  // same accumulation order as the contract (band order)
        for (int b = 0; b < 4; ++b) acc += srf.at(c, b) * cube.at(b, y, x);
        EXPECT_EQ(rgb.at(c, y, x), std::clamp(acc, 0.0f, 1.0f));
      }
    }
  }
}

TEST(SrfProject, DimensionMismatchThrows) {
  hf::HsiCube cube(4, 3, 3);
  EXPECT_THROW(hf::srf_project(cube, hf::default_srf(5)), hf::ContractViolation);
}

TEST(SrfProject, LinearBeforeClamp) {
  hf::Rng rng(4);
  hf::HsiCube x(5, 4, 4), y(5, 4, 4);
  for (auto& v : x.data) v = static_cast<float>(rng.uniform());
  for (auto& v : y.data) v = static_cast<float>(rng.uniform());
  const auto srf = hf::default_srf(5);
  const double a = 0.4, b = 0.5;
  hf::HsiCube mix(5, 4, 4);
  for (std::size_t i = 0; i < mix.data.size(); ++i) {
    mix.data[i] = static_cast<float>(a * x.data[i] + b * y.data[i]);
  }
  const auto pm = hf::srf_project(mix, srf);
  const auto px = hf::srf_project(x, srf);
  const auto py = hf::srf_project(y, srf);
  for (std::size_t i = 0; i < pm.data.size(); ++i) {
    EXPECT_NEAR(pm.data[i], a * px.data[i] + b * py.data[i], 1e-5);
  }
}

TEST(GaussianBlur, ConstantIsUnchanged) {
  hf::HsiCube cube(3, 16, 16);
  std::fill(cube.data.begin(), cube.data.end(), 0.61f);
  const auto out = hf::gaussian_blur(cube);
  for (float v : out.data) EXPECT_NEAR(v, 0.61f, 1e-6f);
}

TEST(GaussianBlur, WindowSumsToOne) {
  const auto w = hf::detail::gaussian_window(8, 3.0);
  double s2d = 0.0;
  for (double wy : w) {
    for (double wx : w) s2d += wy * wx;
  }
  EXPECT_NEAR(s2d, 1.0, 1e-12);
}

TEST(GaussianBlur, ImpulseReproducesKernel) {
  hf::HsiCube cube(1, 32, 32);
  const int x0 = 16, y0 = 16;
  cube.at(0, y0, x0) = 1.0f;
  const auto out = hf::gaussian_blur(cube, 8, 3.0);

  // direct kernel evaluation: normalized 2D Gaussian centered at (3.5, 3.5)
  double z = 0.0;
  auto g = [](int i) { return std::exp(-(i - 3.5) * (i - 3.5) / (2.0 * 9.0)); };
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) z += g(i) * g(j);
  }
  for (int dy = -4; dy <= 3; ++dy) {
    for (int dx = -4; dx <= 3; ++dx) {
      const double expect = g(3 - dx) * g(3 - dy) / z;
      EXPECT_NEAR(out.at(0, y0 + dy, x0 + dx), expect, 1e-7) << dx << "," << dy;
    }
  }
}

TEST(Degrade, ShapeArithmetic) {
  hf::HsiCube cube(31, 32, 32);
  hf::Rng rng(5);
  for (auto& v : cube.data) v = static_cast<float>(rng.uniform());
  const auto lr = hf::degrade(cube, 4);
  EXPECT_EQ(lr.bands, 31);
  EXPECT_EQ(lr.height, 8);
  EXPECT_EQ(lr.width, 8);
}

TEST(Degrade, ConstantStaysConstant) {
  hf::HsiCube cube(2, 16, 16);
  std::fill(cube.data.begin(), cube.data.end(), 0.28f);
  const auto lr = hf::degrade(cube, 4);
  for (float v : lr.data) EXPECT_NEAR(v, 0.28f, 1e-6f);
}

TEST(Degrade, Deterministic) {
  hf::HsiCube cube(3, 16, 16);
  hf::Rng rng(6);
  for (auto& v : cube.data) v = static_cast<float>(rng.uniform());
  const auto a = hf::degrade(cube, 4);
  const auto b = hf::degrade(cube, 4);
  EXPECT_EQ(std::memcmp(a.data.data(), b.data.data(), a.data.size() * 4), 0);
}

TEST(Degrade, IndivisibleDimsThrow) {
  hf::HsiCube cube(1, 30, 32);
  EXPECT_THROW(hf::degrade(cube, 4), hf::ContractViolation);
}

TEST(Degrade, CommutesWithAffineValueScaling) {
  hf::HsiCube x(2, 16, 16);
  hf::Rng rng(7);
  for (auto& v : x.data) v = static_cast<float>(rng.uniform());
  hf::HsiCube scaled(2, 16, 16);
  for (std::size_t i = 0; i < x.data.size(); ++i) scaled.data[i] = 0.5f * x.data[i] + 0.2f;
  const auto a = hf::degrade(scaled, 4);
  const auto b = hf::degrade(x, 4);
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    EXPECT_NEAR(a.data[i], 0.5f * b.data[i] + 0.2f, 1e-5f);
  }
}

// --- histogram matching -------------------------------------------------------

namespace {

std::array<double, 256> channel_cdf(const hf::RgbImage& img, int c) {
  std::array<double, 256> h{};
  const std::size_t p = img.plane();
  const float* d = img.data.data() + static_cast<std::size_t>(c) * p;
  for (std::size_t i = 0; i < p; ++i) {
    int b = static_cast<int>(std::clamp(d[i], 0.0f, 1.0f) * 256);
    if (b > 255) b = 255;
    h[static_cast<std::size_t>(b)] += 1.0 / static_cast<double>(p);
  }
  for (int b = 1; b < 256; ++b) h[static_cast<std::size_t>(b)] += h[static_cast<std::size_t>(b - 1)];
  return h;
}

// Earth-mover distance between channel histograms, in bin units.
double emd_bins(const hf::RgbImage& a, const hf::RgbImage& b, int c) {
  const auto ca = channel_cdf(a, c);
  const auto cb = channel_cdf(b, c);
  double s = 0.0;
  for (int i = 0; i < 256; ++i) s += std::abs(ca[static_cast<std::size_t>(i)] - cb[static_cast<std::size_t>(i)]);
  return s;
}

}  // namespace

TEST(HistogramMatch, SelfMatchStaysWithinOneBin) {
  hf::Rng rng(8);
  hf::RgbImage img(16, 16);
  for (auto& v : img.data) v = static_cast<float>(rng.uniform());
  const auto out = hf::histogram_match(img, img);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    EXPECT_LE(std::abs(out.data[i] - img.data[i]), 1.0f / 256.0f);
  }
}

TEST(HistogramMatch, ClosedFormStretch) {
  // src uniform over [0, 0.5) at bin centers, ref uniform over [0, 1):
  // matching doubles the values, within one bin width.
  hf::RgbImage src(8, 16), ref(16, 16);
  int i = 0;
  for (int c = 0; c < 3; ++c) {
    for (int k = 0; k < 128; ++k) {
      src.data[static_cast<std::size_t>(c) * 128 + k] = (k + 0.5f) / 256.0f;
    }
  }
  i = 0;
  for (int c = 0; c < 3; ++c) {
    for (int k = 0; k < 256; ++k) {
      ref.data[static_cast<std::size_t>(c) * 256 + k] = (k + 0.5f) / 256.0f;
    }
  }
  const auto out = hf::histogram_match(src, ref);
  for (std::size_t j = 0; j < src.data.size(); ++j) {
    EXPECT_LE(std::abs(out.data[j] - 2.0f * src.data[j]), 1.0f / 256.0f + 1e-6f);
  }
}

TEST(HistogramMatch, OutputHistogramMatchesReference) {
  hf::Rng rng(9);
  hf::RgbImage src(24, 24), ref(20, 28);
  for (auto& v : src.data) v = static_cast<float>(0.5 * rng.uniform());  // dark source
  for (auto& v : ref.data) v = static_cast<float>(std::pow(rng.uniform(), 0.4));  // bright ref
  const auto out = hf::histogram_match(src, ref);
  for (int c = 0; c < 3; ++c) EXPECT_LT(emd_bins(out, ref, c), 2.0);
}

TEST(HistogramMatch, MappingIsMonotone) {
  hf::Rng rng(10);
  hf::RgbImage src(16, 16), ref(16, 16);
  for (auto& v : src.data) v = static_cast<float>(rng.uniform());
  for (auto& v : ref.data) v = static_cast<float>(rng.uniform());
  const auto out = hf::histogram_match(src, ref);
  const std::size_t p = src.plane();
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 1; i < p; ++i) {
      const float s0 = src.data[c * p + i - 1], s1 = src.data[c * p + i];
      const float o0 = out.data[c * p + i - 1], o1 = out.data[c * p + i];
      if (s0 < s1) {
        EXPECT_LE(o0, o1 + 1e-6f);
      } else if (s0 > s1) {
        EXPECT_GE(o0 + 1e-6f, o1);
      }
    }
  }
}

// --- synthetic scenes ----------------------------------------------------------

TEST(SynthScene, DeterministicGivenSeed) {
  const auto a = hf::synth_scene(1234, 6, 48, 40, 5.0);
  const auto b = hf::synth_scene(1234, 6, 48, 40, 5.0);
  EXPECT_EQ(std::memcmp(a.hr_cube.data.data(), b.hr_cube.data.data(), a.hr_cube.data.size() * 4), 0);
  EXPECT_EQ(std::memcmp(a.ref_cube.data.data(), b.ref_cube.data.data(), a.ref_cube.data.size() * 4), 0);
  EXPECT_EQ(std::memcmp(a.gt_flow.data.data(), b.gt_flow.data.data(), a.gt_flow.data.size() * 4), 0);
}

TEST(SynthScene, DifferentSeedsDiffer) {
  const auto a = hf::synth_scene(1, 4, 32, 32, 4.0);
  const auto b = hf::synth_scene(2, 4, 32, 32, 4.0);
  EXPECT_NE(std::memcmp(a.hr_cube.data.data(), b.hr_cube.data.data(), a.hr_cube.data.size() * 4), 0);
}

TEST(SynthScene, ZeroDisplacementIsIdentity) {
  const auto pair = hf::synth_scene(77, 4, 32, 32, 0.0);
  for (float v : pair.gt_flow.data) EXPECT_EQ(v, 0.0f);
  EXPECT_EQ(std::memcmp(pair.hr_cube.data.data(), pair.ref_cube.data.data(),
                        pair.hr_cube.data.size() * 4),
            0);
}

TEST(SynthScene, FlowBoundAndValueInvariants) {
  for (std::uint64_t seed : {11ull, 22ull, 33ull}) {
    const double max_disp = 6.0;
    const auto pair = hf::synth_scene(seed, 8, 64, 64, max_disp);
    float fmax = 0.0f;
    for (float v : pair.gt_flow.data) fmax = std::max(fmax, std::abs(v));
    EXPECT_LE(fmax, static_cast<float>(max_disp));
    EXPECT_GT(fmax, 0.0f);
    for (float v : pair.hr_cube.data) {
      EXPECT_GE(v, 0.0f);
      EXPECT_LE(v, 1.0f);
    }
    for (float v : pair.ref_cube.data) {
      EXPECT_GE(v, 0.0f);
      EXPECT_LE(v, 1.0f);
    }
    EXPECT_EQ(pair.hr_cube.bands, pair.ref_cube.bands);
    EXPECT_EQ(pair.gt_flow.height, pair.hr_cube.height);
  }
}

TEST(SynthScene, GtFlowAlignsRefOntoHr) {
  // warping the reference by gt_flow must reduce the distance to the
  // ground truth by a wide margin (interior only).
  const auto pair = hf::synth_scene(5, 4, 64, 64, 6.0);
  const int h = 64, w = 64, margin = 8;
  double err_unaligned = 0.0, err_aligned = 0.0;
  for (int b = 0; b < 4; ++b) {
    const float* hr = pair.hr_cube.band(b);
    const float* ref = pair.ref_cube.band(b);
    for (int y = margin; y < h - margin; ++y) {
      for (int x = margin; x < w - margin; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        const double warped = hf::detail::bilinear_clamped(
            ref, h, w, x + pair.gt_flow.dx(y, x), y + pair.gt_flow.dy(y, x));
        err_aligned += (warped - hr[i]) * (warped - hr[i]);
        err_unaligned += (ref[i] - hr[i]) * (ref[i] - hr[i]);
      }
    }
  }
  EXPECT_LT(err_aligned, 0.15 * err_unaligned);
}

TEST(SynthScene, PreconditionViolationsThrow) {
  EXPECT_THROW(hf::synth_scene(1, 4, 16, 64, 4.0), hf::ContractViolation);
  EXPECT_THROW(hf::synth_scene(1, 4, 64, 64, 11.0), hf::ContractViolation);
}
