#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "gradcheck.hpp"
#include "hsifuse/ops.hpp"
#include "hsifuse/tensor.hpp"

using hsifuse::Tensor;
namespace hf = hsifuse;

TEST(Upsample, NearestValuesAndGradient) {
  auto x = Tensor<double>::from_values({1, 2, 2}, {1, 2, 3, 4});
  auto y = hf::upsample_nearest2x(x);
  ASSERT_EQ(y.shape(), (hf::Shape{1, 4, 4}));
  EXPECT_DOUBLE_EQ(y.values()[0], 1);
  EXPECT_DOUBLE_EQ(y.values()[3], 2);
  EXPECT_DOUBLE_EQ(y.values()[15], 4);

  hf::Rng rng(2);
  auto z = testutil::random_tensor({2, 3, 4}, rng);
  auto loss = [&]() { return hf::mean(hf::upsample_nearest2x(z)); };
  EXPECT_LT(testutil::gradcheck(loss, {z}), 1e-8);
}

TEST(Downsample, AverageValuesAndGradient) {
  auto x = Tensor<double>::from_values({1, 2, 2}, {1, 2, 3, 4});
  auto y = hf::avg_downsample2x(x);
  ASSERT_EQ(y.shape(), (hf::Shape{1, 1, 1}));
  EXPECT_DOUBLE_EQ(y.values()[0], 2.5);

  hf::Rng rng(3);
  auto z = testutil::random_tensor({2, 4, 6}, rng);
  auto loss = [&]() { return hf::sum(hf::avg_downsample2x(z)); };
  EXPECT_LT(testutil::gradcheck(loss, {z}), 1e-8);
}

TEST(Concat, ChannelsAndGradient) {
  auto a = Tensor<double>::from_values({1, 1, 2}, {1, 2});
  auto b = Tensor<double>::from_values({2, 1, 2}, {3, 4, 5, 6});
  auto y = hf::concat_channels<double>({a, b});
  ASSERT_EQ(y.shape(), (hf::Shape{3, 1, 2}));
  EXPECT_DOUBLE_EQ(y.values()[0], 1);
  EXPECT_DOUBLE_EQ(y.values()[2], 3);
  EXPECT_DOUBLE_EQ(y.values()[5], 6);

  hf::Rng rng(4);
  auto u = testutil::random_tensor({2, 3, 3}, rng);
  auto v = testutil::random_tensor({1, 3, 3}, rng);
  auto loss = [&]() {
    auto c = hf::concat_channels<double>({u, v});
    return hf::mean(hf::mul(c, c));
  };
  EXPECT_LT(testutil::gradcheck(loss, {u, v}), 1e-6);
}

TEST(BandReverse, InvolutionAndGradient) {
  hf::Rng rng(5);
  auto x = testutil::random_tensor({2, 4, 3, 3}, rng);
  auto y = hf::band_reverse(hf::band_reverse(x));
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(x.values()[i], y.values()[i]);

  auto loss = [&]() { return hf::mean(hf::mul(hf::band_reverse(x), x)); };
  EXPECT_LT(testutil::gradcheck(loss, {x}), 1e-6);
}

TEST(BroadcastBand, ReplicationContract) {
  hf::Rng rng(6);
  auto x = testutil::random_tensor({2, 3, 3}, rng);

  auto y1 = hf::broadcast_band(x, 1);
  ASSERT_EQ(y1.shape(), (hf::Shape{2, 1, 3, 3}));
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y1.values()[i], x.values()[i]);

  const int B = 5;
  auto y = hf::broadcast_band(x, B);
  double band_sum = 0, base_sum = 0;
  for (double v : y.values()) band_sum += v;
  for (double v : x.values()) base_sum += v;
  EXPECT_NEAR(band_sum, B * base_sum, 1e-9);

  // gradient of sum-loss is exactly B per input element
  x.set_requires_grad(true);
  x.impl()->grad.clear();
  hf::backward(hf::sum(hf::broadcast_band(x, B)));
  for (double g : x.grad()) EXPECT_DOUBLE_EQ(g, double(B));
}

TEST(MulChannelBroadcast, IdentityZeroAndOracle) {
  hf::Rng rng(7);
  auto x = testutil::random_tensor({3, 4, 4}, rng);

  auto ones = Tensor<double>::full({1, 4, 4}, 1.0);
  auto y = hf::mul_channel_broadcast(ones, x);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y.values()[i], x.values()[i]);

  auto zeros = Tensor<double>::zeros({1, 4, 4});
  auto y0 = hf::mul_channel_broadcast(zeros, x);
  for (double v : y0.values()) EXPECT_EQ(v, 0.0);

  auto w = testutil::random_tensor({1, 4, 4}, rng, 0.0, 1.0);
  auto yw = hf::mul_channel_broadcast(w, x);
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < 16; ++i) {
      EXPECT_EQ(yw.values()[c * 16 + i], w.values()[i] * x.values()[c * 16 + i]);
    }
  }

  auto loss = [&]() { return hf::mean(hf::mul_channel_broadcast(w, x)); };
  EXPECT_LT(testutil::gradcheck(loss, {w, x}), 1e-6);
}

TEST(QruMerge, SaturatedGatePassesCandidate) {
  hf::Rng rng(8);
  auto f = testutil::random_tensor({1, 3, 2, 2}, rng);
  auto w = Tensor<double>::full({1, 3, 2, 2}, 1.0);
  auto h = hf::qru_merge(w, f);
  for (std::size_t i = 0; i < h.numel(); ++i) EXPECT_EQ(h.values()[i], f.values()[i]);
}

TEST(QruMerge, TwoBandHandCase) {
  auto w = Tensor<double>::from_values({1, 2, 1, 1}, {0.5, 0.5});
  auto f = Tensor<double>::from_values({1, 2, 1, 1}, {2.0, 4.0});
  auto h = hf::qru_merge(w, f);
  EXPECT_DOUBLE_EQ(h.values()[0], 1.0);
  EXPECT_DOUBLE_EQ(h.values()[1], 2.5);
}

TEST(QruMerge, MatchesUnrolledClosedForm) {
  // h_i = sum_j f_j w_j prod_{k: j<k<=i} (1-w_k), evaluated by brute force.
  hf::Rng rng(9);
  auto w = testutil::random_tensor({2, 4, 3, 3}, rng, 0.05, 0.95);
  auto f = testutil::random_tensor({2, 4, 3, 3}, rng);
  auto h = hf::qru_merge(w, f);
  const int C = 2, B = 4, P = 9;
  for (int c = 0; c < C; ++c) {
    for (int i = 0; i < B; ++i) {
      for (int p = 0; p < P; ++p) {
        double expect = 0.0;
        for (int j = 0; j <= i; ++j) {
          double term = f.values()[(c * B + j) * P + p] * w.values()[(c * B + j) * P + p];
          for (int k = j + 1; k <= i; ++k) term *= 1.0 - w.values()[(c * B + k) * P + p];
          expect += term;
        }
        EXPECT_NEAR(h.values()[(c * B + i) * P + p], expect, 1e-12);
      }
    }
  }
}

TEST(QruMerge, Gradient) {
  hf::Rng rng(10);
  auto w = testutil::random_tensor({1, 4, 2, 2}, rng, 0.1, 0.9);
  auto f = testutil::random_tensor({1, 4, 2, 2}, rng);
  auto loss = [&]() { return hf::mean(hf::qru_merge(w, f)); };
  EXPECT_LT(testutil::gradcheck(loss, {w, f}), 1e-6);
}

TEST(WarpBilinear, ZeroFlowIsExactIdentity) {
  hf::Rng rng(11);
  auto x = testutil::random_tensor({3, 5, 6}, rng);
  auto flow = Tensor<double>::zeros({2, 5, 6});
  auto y = hf::warp_bilinear(x, flow);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y.values()[i], x.values()[i]);
}

TEST(WarpBilinear, HalfPixelShiftWithClamp) {
  auto x = Tensor<double>::from_values({1, 2, 2}, {1, 2, 3, 4});
  auto flow = Tensor<double>::zeros({2, 2, 2});
  for (int i = 0; i < 4; ++i) flow.values_mut()[i] = 0.5;  // dx = 0.5, dy = 0
  auto y = hf::warp_bilinear(x, flow);
  EXPECT_DOUBLE_EQ(y.values()[0], 1.5);
  EXPECT_DOUBLE_EQ(y.values()[1], 2.0);
  EXPECT_DOUBLE_EQ(y.values()[2], 3.5);
  EXPECT_DOUBLE_EQ(y.values()[3], 4.0);
}

TEST(WarpBilinear, IntegerShiftInteriorExact) {
  hf::Rng rng(12);
  auto x = testutil::random_tensor({2, 6, 6}, rng);
  auto flow = Tensor<double>::zeros({2, 6, 6});
  for (int i = 0; i < 36; ++i) {
    flow.values_mut()[i] = 2.0;   // dx
    flow.values_mut()[36 + i] = 1.0;  // dy
  }
  auto y = hf::warp_bilinear(x, flow);
  for (int c = 0; c < 2; ++c) {
    for (int yy = 0; yy < 5; ++yy) {
      for (int xx = 0; xx < 4; ++xx) {
        EXPECT_EQ(y.values()[(c * 6 + yy) * 6 + xx], x.values()[(c * 6 + yy + 1) * 6 + xx + 2]);
      }
    }
  }
}

TEST(WarpBilinear, GradientWrtInputAndFlow) {
  hf::Rng rng(13);
  auto x = testutil::random_tensor({2, 6, 6}, rng);
  auto flow = testutil::random_tensor({2, 6, 6}, rng, -1.3, 1.3);
  auto loss = [&]() { return hf::mean(hf::warp_bilinear(x, flow)); };
  EXPECT_LT(testutil::gradcheck(loss, {x, flow}), 1e-5);
}

TEST(Conv3dUpsample, ShapeDoubling) {
  auto x = Tensor<double>::zeros({1, 1, 2, 2});
  auto k = Tensor<double>::zeros({1, 1, 1, 3, 3});
  auto y = hf::conv3d_upsample(x, k);
  EXPECT_EQ(y.shape(), (hf::Shape{1, 1, 4, 4}));
}

TEST(Conv3dUpsample, ConstantPropagation) {
  // 1x1x1 kernel avoids padding effects: constant c maps to c * k_sum.
  auto x = Tensor<double>::full({1, 2, 3, 3}, 0.7);
  auto k = Tensor<double>::from_values({1, 1, 1, 1, 1}, {3.0});
  auto y = hf::conv3d_upsample(x, k);
  ASSERT_EQ(y.shape(), (hf::Shape{1, 2, 6, 6}));
  for (double v : y.values()) EXPECT_NEAR(v, 0.7 * 3.0, 1e-12);
}

TEST(Conv3dUpsample, Gradient) {
  hf::Rng rng(14);
  auto x = testutil::random_tensor({1, 2, 3, 3}, rng);
  auto k = testutil::random_tensor({2, 1, 3, 3, 3}, rng, -0.4, 0.4);
  auto b = testutil::random_tensor({2}, rng, -0.1, 0.1);
  auto loss = [&]() { return hf::mean(hf::conv3d_upsample(x, k, b)); };
  EXPECT_LT(testutil::gradcheck(loss, {x, k, b}), 1e-6);
}

TEST(BoxSmooth3, ConstantInteriorAndGradient) {
  auto x = Tensor<double>::full({2, 6, 6}, 0.9);
  auto y = hf::box_smooth3(x);
  // interior pixels average nine equal values; borders see zero padding
  EXPECT_NEAR(y.values()[1 * 6 + 1], 0.9, 1e-12);
  EXPECT_NEAR(y.values()[0], 0.9 * 4 / 9, 1e-12);

  hf::Rng rng(15);
  auto z = testutil::random_tensor({2, 5, 5}, rng);
  auto loss = [&]() { return hf::mean(hf::mul(hf::box_smooth3(z), z)); };
  EXPECT_LT(testutil::gradcheck(loss, {z}), 1e-6);
}

TEST(L2NormalizeChannels, UnitNormsAndGradient) {
  hf::Rng rng(16);
  auto x = testutil::random_tensor({4, 3, 3}, rng, 0.2, 1.0);
  auto y = hf::l2_normalize_channels(x, 1e-9);
  for (int p = 0; p < 9; ++p) {
    double s = 0;
    for (int c = 0; c < 4; ++c) s += y.values()[c * 9 + p] * y.values()[c * 9 + p];
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
  auto loss = [&]() {
    auto n = hf::l2_normalize_channels(x, 1e-3);
    return hf::mean(hf::mul(n, n));
  };
  EXPECT_LT(testutil::gradcheck(loss, {x}), 1e-6);
}

TEST(LocalCorrelation, PeakAtTrueShiftAndGradient) {
  // b shifted right by 2: correlation channel (dy=0, dx=2) carries the
  // self-similarity peak at interior pixels
  hf::Rng rng(17);
  const int h = 10;
  auto a = testutil::random_tensor({3, h, h}, rng);
  auto b = Tensor<double>::zeros({3, h, h});
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < h; ++x) {
        const int sx = std::clamp(x + 2, 0, h - 1);
        b.values_mut()[(c * h + y) * h + x] = a.values()[(c * h + y) * h + sx];
      }
    }
  }
  const int r = 3, side = 2 * r + 1;
  // unit-normalized features: cosine hits exactly 1 at the true shift and
  // is strictly below 1 elsewhere
  auto corr = hf::local_correlation(hf::l2_normalize_channels(a, 1e-12),
                                    hf::l2_normalize_channels(b, 1e-12), r);
  ASSERT_EQ(corr.dim(0), side * side);
  const int expect_d = (0 + r) * side + (-2 + r);  // dy=0, dx=-2: b(x-2) == a(x)
  for (int y = 3; y < h - 3; ++y) {
    for (int x = 3; x < h - 5; ++x) {
      int best_d = -1;
      double best = -1e9;
      for (int d = 0; d < side * side; ++d) {
        const double v = corr.values()[(static_cast<std::size_t>(d) * h + y) * h + x];
        if (v > best) {
          best = v;
          best_d = d;
        }
      }
      EXPECT_EQ(best_d, expect_d) << "at (" << y << "," << x << ")";
    }
  }

  auto a2 = testutil::random_tensor({2, 6, 6}, rng);
  auto b2 = testutil::random_tensor({2, 6, 6}, rng);
  auto loss = [&]() { return hf::mean(hf::local_correlation(a2, b2, 2)); };
  EXPECT_LT(testutil::gradcheck(loss, {a2, b2}), 1e-6);
}
