#include <gtest/gtest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "hsifuse/model.hpp"

namespace hf = hsifuse;
using hf::Tensor;

namespace {

// Small widths keep the f64 finite-difference suites fast.
hf::NetworkShape tiny_shape() {
  hf::NetworkShape s;
  s.rgb_channels = 6;
  s.hsi_channels = 4;
  s.flow_channels = {4, 6, 8};
  s.flow_head_width = 8;
  s.attn_flow_channels = 4;
  s.attn_reduced_channels = 4;
  s.attn_width = 6;
  s.decoder_channels = {6, 5, 4};
  return s;
}

template <typename T>
void randomize(Tensor<T>& t, hf::Rng& rng, double lo = -0.3, double hi = 0.3) {
  for (auto& v : t.values_mut()) v = static_cast<T>(rng.uniform(lo, hi));
}

}  // namespace

// --- RGB encoder -------------------------------------------------------------

TEST(RgbEncoder, DefaultShapeContract) {
  hf::ParamSet<float> ps;
  hf::Rng rng(1);
  hf::RgbEncoder<float> enc(ps, "enc", 64, rng);
  auto img = Tensor<float>::uniform({3, 64, 64}, 0.0f, 1.0f, rng);
  const auto pyr = enc(img);
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(pyr[i].dim(0), 64);
    EXPECT_EQ(pyr[i].dim(1), 64 >> i);
    EXPECT_EQ(pyr[i].dim(2), 64 >> i);
  }
}

TEST(RgbEncoder, ZeroInputGivesZeroPyramid) {
  hf::ParamSet<double> ps;
  hf::Rng rng(2);
  hf::RgbEncoder<double> enc(ps, "enc", 8, rng);  // biases are zero-initialized
  const auto pyr = enc(Tensor<double>::zeros({3, 16, 16}));
  for (const auto& level : pyr) {
    for (double v : level.values()) EXPECT_EQ(v, 0.0);
  }
}

TEST(RgbEncoder, IndivisibleDimsThrow) {
  hf::ParamSet<float> ps;
  hf::Rng rng(3);
  hf::RgbEncoder<float> enc(ps, "enc", 4, rng);
  EXPECT_THROW(enc(Tensor<float>::zeros({3, 20, 16})), hf::ContractViolation);
}

TEST(RgbEncoder, GradientThroughAllLayers) {
  hf::ParamSet<double> ps;
  hf::Rng rng(4);
  hf::RgbEncoder<double> enc(ps, "enc", 3, rng);
  auto img = testutil::random_tensor({3, 8, 8}, rng, 0.0, 1.0);
  auto loss = [&]() {
    const auto pyr = enc(img);
    return hf::mean(pyr[3]);
  };
  std::vector<Tensor<double>> leaves{img, enc.l1.weight, enc.l3.weight, enc.l5.weight,
                                     enc.l5.bias};
  EXPECT_LT(testutil::gradcheck(loss, leaves, 1e-5, 20, &rng), 1e-5);
}

// --- QRU / HSI encoder ---------------------------------------------------------

TEST(QruLayer, SaturatedGatePassesCandidates) {
  hf::ParamSet<double> ps;
  hf::Rng rng(5);
  hf::QruLayer<double> qru(ps, "q", 2, 3, hf::BandDirection::forward, 1, false, rng);
  for (auto& v : qru.gate.bias.values_mut()) v = 60.0;  // pre-sigmoid -> +inf
  auto x = testutil::random_tensor({2, 4, 5, 5}, rng);
  const auto h = qru(x);
  const auto f = hf::tanh(qru.cand(x));
  ASSERT_EQ(h.shape(), f.shape());
  for (std::size_t i = 0; i < h.numel(); ++i) EXPECT_NEAR(h.values()[i], f.values()[i], 1e-12);
}

TEST(QruLayer, MatchesManualComposition) {
  hf::ParamSet<double> ps;
  hf::Rng rng(6);
  hf::QruLayer<double> qru(ps, "q", 1, 2, hf::BandDirection::forward, 1, false, rng);
  auto x = testutil::random_tensor({1, 3, 4, 4}, rng);
  const auto h = qru(x);
  const auto manual = hf::qru_merge(hf::sigmoid(qru.gate(x)), hf::tanh(qru.cand(x)));
  for (std::size_t i = 0; i < h.numel(); ++i) EXPECT_EQ(h.values()[i], manual.values()[i]);
}

TEST(QruLayer, BidirectionalReversalInvariance) {
  hf::ParamSet<double> ps;
  hf::Rng rng(7);
  hf::QruLayer<double> qru(ps, "q", 2, 2, hf::BandDirection::bidirectional, 1, false, rng);
  auto x = testutil::random_tensor({2, 5, 4, 4}, rng);
  const auto lhs = hf::band_reverse(qru(x));
  const auto rhs = qru(hf::band_reverse(x));
  for (std::size_t i = 0; i < lhs.numel(); ++i) EXPECT_EQ(lhs.values()[i], rhs.values()[i]);
}

TEST(HsiEncoder, ShapeAndBandPreservation) {
  hf::ParamSet<float> ps;
  hf::Rng rng(8);
  hf::HsiEncoder<float> enc(ps, "enc", 16, rng);
  auto cube = Tensor<float>::uniform({1, 8, 64, 64}, 0.0f, 1.0f, rng);
  const auto pyr = enc(cube);
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(pyr[i].dim(0), 16);
    EXPECT_EQ(pyr[i].dim(1), 8);  // every QRU layer emits exactly B band slices
    EXPECT_EQ(pyr[i].dim(2), 64 >> i);
  }
}

TEST(HsiEncoder, ZeroInputGivesZeroPyramid) {
  hf::ParamSet<double> ps;
  hf::Rng rng(9);
  hf::HsiEncoder<double> enc(ps, "enc", 4, rng);
  const auto pyr = enc(Tensor<double>::zeros({1, 4, 16, 16}));
  for (const auto& level : pyr) {
    for (double v : level.values()) EXPECT_EQ(v, 0.0);
  }
}

TEST(HsiEncoder, EndToEndGradient) {
  hf::ParamSet<double> ps;
  hf::Rng rng(10);
  hf::HsiEncoder<double> enc(ps, "enc", 2, rng);
  auto cube = testutil::random_tensor({1, 3, 16, 16}, rng, 0.0, 1.0);
  auto loss = [&]() { return hf::mean(enc(cube)[3]); };
  std::vector<Tensor<double>> leaves{cube, enc.l1.gate.weight, enc.l2.cand.weight,
                                     enc.l4.gate.bias};
  EXPECT_LT(testutil::gradcheck(loss, leaves, 1e-5, 16, &rng), 1e-5);
}

// --- flow estimator ------------------------------------------------------------

TEST(FlowEstimator, OutputShapeAndZeroInit) {
  hf::ParamSet<float> ps;
  hf::Rng rng(11);
  hf::FlowEstimator<float> est(ps, "flow", tiny_shape(), rng);
  auto a = Tensor<float>::uniform({3, 32, 32}, 0.0f, 1.0f, rng);
  auto b = Tensor<float>::uniform({3, 32, 32}, 0.0f, 1.0f, rng);
  const auto flow = est.estimate(a, b);
  EXPECT_EQ(flow.shape(), (hf::Shape{2, 32, 32}));
  // zero-initialized heads: exactly zero flow before training
  for (float v : flow.values()) EXPECT_EQ(v, 0.0f);
}

TEST(FlowEstimator, MultilevelScalingRule) {
  auto v0 = Tensor<float>::zeros({2, 32, 32});
  for (std::size_t i = 0; i < 32 * 32; ++i) v0.values_mut()[i] = 8.0f;  // dx = 8, dy = 0
  const auto flows = hf::multilevel_flows(v0);
  for (int level = 0; level < 4; ++level) {
    EXPECT_EQ(flows[level].dim(1), 32 >> level);
    const float expect_dx = 8.0f / static_cast<float>(1 << level);
    const std::size_t plane = flows[level].numel() / 2;
    for (std::size_t i = 0; i < plane; ++i) {
      EXPECT_FLOAT_EQ(flows[level].values()[i], expect_dx);
      EXPECT_FLOAT_EQ(flows[level].values()[plane + i], 0.0f);
    }
  }
}

TEST(FlowEstimator, ZeroFullResFlowGivesZeroLevels) {
  const auto flows = hf::multilevel_flows(Tensor<float>::zeros({2, 16, 16}));
  for (const auto& f : flows) {
    for (float v : f.values()) EXPECT_EQ(v, 0.0f);
  }
}

TEST(FlowEstimator, FlowScalingCommutesWithCoarseWarp) {
  // downsample(warp(x, v)) vs warp(downsample(x), downsample(v)/2) on
  // smooth inputs, interior tolerance 1e-2
  hf::Rng rng(12);
  const int h = 32;
  auto x = Tensor<double>::zeros({1, h, h});
  auto v = Tensor<double>::zeros({2, h, h});
  for (int y = 0; y < h; ++y) {
    for (int xx = 0; xx < h; ++xx) {
      x.values_mut()[static_cast<std::size_t>(y) * h + xx] =
          0.5 + 0.4 * std::sin(2.0 * 3.14159265 * (0.7 * xx + 0.4 * y) / h);
      v.values_mut()[static_cast<std::size_t>(y) * h + xx] =
          2.0 * std::sin(2.0 * 3.14159265 * y / h);
      v.values_mut()[h * h + static_cast<std::size_t>(y) * h + xx] =
          1.5 * std::cos(2.0 * 3.14159265 * xx / h);
    }
  }
  const auto path_a = hf::avg_downsample2x(hf::warp_bilinear(x, v));
  const auto path_b =
      hf::warp_bilinear(hf::avg_downsample2x(x), hf::scale(hf::avg_downsample2x(v), 0.5));
  const int oh = h / 2;
  for (int y = 2; y < oh - 2; ++y) {
    for (int xx = 2; xx < oh - 2; ++xx) {
      EXPECT_NEAR(path_a.values()[static_cast<std::size_t>(y) * oh + xx],
                  path_b.values()[static_cast<std::size_t>(y) * oh + xx], 1e-2);
    }
  }
}

TEST(FlowEstimator, TwoStagePathIsDifferentiable) {
  hf::ParamSet<double> ps;
  hf::Rng rng(13);
  const auto shape = tiny_shape();
  hf::FlowEstimator<double> flow1(ps, "flow1", shape, rng);
  hf::FlowEstimator<double> flow2(ps, "flow2", shape, rng);
  randomize(flow1.h1.out.weight, rng, -0.05, 0.05);
  randomize(flow1.h3.out.weight, rng, -0.05, 0.05);
  randomize(flow2.h2.out.weight, rng, -0.05, 0.05);
  randomize(flow2.h1.out.weight, rng, -0.05, 0.05);
  auto anchor = testutil::random_tensor({3, 16, 16}, rng, 0.0, 1.0);
  auto ref = testutil::random_tensor({3, 16, 16}, rng, 0.0, 1.0);
  auto loss = [&]() {
    auto cf = flow1.estimate(anchor, ref);
    auto ref2 = hf::warp_bilinear(ref, cf);
    auto v0 = flow2.estimate(anchor, ref2);
    return hf::mean(hf::warp_bilinear(ref2, v0));
  };
  std::vector<Tensor<double>> leaves{anchor, ref, flow1.f1.weight, flow1.h1.out.weight,
                                     flow2.h2.c1.weight};
  EXPECT_LT(testutil::gradcheck(loss, leaves, 1e-5, 12, &rng), 1e-4);
}

TEST(AlignReference, ZeroFlowsLeavePyramidUnchanged) {
  hf::ParamSet<float> ps;
  hf::Rng rng(14);
  hf::RgbEncoder<float> enc(ps, "enc", 4, rng);
  auto img = Tensor<float>::uniform({3, 16, 16}, 0.0f, 1.0f, rng);
  const auto pyr = enc(img);
  std::array<Tensor<float>, 4> zeros;
  for (int i = 0; i < 4; ++i) zeros[i] = Tensor<float>::zeros({2, 16 >> i, 16 >> i});
  const auto aligned = hf::align_reference(pyr, zeros);
  for (int i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < pyr[i].numel(); ++j) {
      EXPECT_EQ(aligned[i].values()[j], pyr[i].values()[j]);
    }
  }
}

TEST(AlignReference, GroundTruthFlowRecoversAlignment) {
  // Features of a shifted image warped by the true aligning flow must land
  // much closer to the unshifted features than the unaligned ones.
  hf::ParamSet<float> ps;
  hf::Rng rng(15);
  hf::RgbEncoder<float> enc(ps, "enc", 4, rng);
  const auto pair = hf::synth_scene(31, 4, 64, 64, 6.0);
  const auto srf = hf::default_srf(4);
  auto hr = hf::rgb_to_tensor<float>(hf::srf_project(pair.hr_cube, srf));
  auto ref = hf::rgb_to_tensor<float>(hf::srf_project(pair.ref_cube, srf));
  const auto pyr_hr = enc(hr);
  const auto pyr_ref = enc(ref);
  const auto flows = hf::multilevel_flows(hf::flow_to_tensor<float>(pair.gt_flow));
  const auto aligned = hf::align_reference(pyr_ref, flows);
  double unaligned_err = 0.0, aligned_err = 0.0;
  for (int i = 0; i < 4; ++i) {
    const int hh = 64 >> i, margin = std::max(2, 8 >> i);
    for (int c = 0; c < 4; ++c) {
      for (int y = margin; y < hh - margin; ++y) {
        for (int x = margin; x < hh - margin; ++x) {
          const std::size_t idx = (static_cast<std::size_t>(c) * hh + y) * hh + x;
          const double ta = pyr_hr[i].values()[idx];
          unaligned_err += std::pow(pyr_ref[i].values()[idx] - ta, 2.0);
          aligned_err += std::pow(aligned[i].values()[idx] - ta, 2.0);
        }
      }
    }
  }
  EXPECT_LT(aligned_err, 0.5 * unaligned_err);
}

// --- attention -----------------------------------------------------------------

TEST(Attention, EmbedFlowShapeZeroAndGradient) {
  hf::ParamSet<double> ps;
  hf::Rng rng(16);
  hf::AttentionHead<double> head(ps, "attn", 4, tiny_shape(), rng);

  const auto z = head.embed_flow(Tensor<double>::zeros({2, 8, 8}));
  EXPECT_EQ(z.dim(1), 8);
  EXPECT_EQ(z.dim(2), 8);
  for (double v : z.values()) EXPECT_EQ(v, 0.0);  // zero flow, zero biases

  auto flow = testutil::random_tensor({2, 6, 6}, rng, -2.0, 2.0);
  auto loss = [&]() { return hf::mean(head.embed_flow(flow)); };
  EXPECT_LT(testutil::gradcheck(loss, {flow, head.fe1.weight, head.fe2.bias}, 1e-5, 16, &rng),
            1e-6);
}

TEST(Attention, WeightsInOpenUnitInterval) {
  hf::ParamSet<float> ps;
  hf::Rng rng(17);
  const auto shape = tiny_shape();
  hf::AttentionHead<float> head(ps, "attn", shape.rgb_channels, shape, rng);
  auto fr = Tensor<float>::uniform({shape.rgb_channels, 8, 8}, -1.0f, 1.0f, rng);
  auto fh = Tensor<float>::uniform({shape.rgb_channels, 8, 8}, -1.0f, 1.0f, rng);
  auto fl = Tensor<float>::uniform({2, 8, 8}, -3.0f, 3.0f, rng);
  const auto w = head.weights(fr, fh, fl);
  EXPECT_EQ(w.shape(), (hf::Shape{1, 8, 8}));
  for (float v : w.values()) {
    EXPECT_GT(v, 0.0f);
    EXPECT_LT(v, 1.0f);
  }
}

TEST(Attention, ZeroInputsGiveHalf) {
  hf::ParamSet<double> ps;
  hf::Rng rng(18);
  const auto shape = tiny_shape();
  hf::AttentionHead<double> head(ps, "attn", shape.rgb_channels, shape, rng);
  const auto w = head.weights(Tensor<double>::zeros({shape.rgb_channels, 8, 8}),
                              Tensor<double>::zeros({shape.rgb_channels, 8, 8}),
                              Tensor<double>::zeros({2, 8, 8}));
  for (double v : w.values()) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(Attention, GradientFlowsToAllThreeBranches) {
  hf::ParamSet<double> ps;
  hf::Rng rng(19);
  const auto shape = tiny_shape();
  hf::AttentionHead<double> head(ps, "attn", shape.rgb_channels, shape, rng);
  auto fr = testutil::random_tensor({shape.rgb_channels, 6, 6}, rng);
  auto fh = testutil::random_tensor({shape.rgb_channels, 6, 6}, rng);
  auto fl = testutil::random_tensor({2, 6, 6}, rng, -2.0, 2.0);
  auto loss = [&]() { return hf::mean(head.weights(fr, fh, fl)); };
  EXPECT_LT(testutil::gradcheck(loss, {fr, fh, fl}, 1e-5, 16, &rng), 1e-6);
  for (auto* leaf : {&fr, &fh, &fl}) {
    double norm = 0.0;
    for (double g : leaf->grad()) norm += std::abs(g);
    EXPECT_GT(norm, 0.0);
  }
}

TEST(Attention, ApplyIsBroadcastProductAndMonotone) {
  hf::Rng rng(20);
  auto w = Tensor<double>::uniform({1, 5, 5}, 0.1, 0.9, rng);
  auto f = testutil::random_tensor({3, 5, 5}, rng);
  const auto out = hf::apply_attention(w, f);
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < 25; ++i) {
      EXPECT_EQ(out.values()[c * 25 + i], w.values()[i] * f.values()[c * 25 + i]);
    }
  }
  // raising any weight never decreases the output magnitude
  auto w2 = Tensor<double>::zeros({1, 5, 5});
  for (int i = 0; i < 25; ++i) w2.values_mut()[i] = std::min(1.0, w.values()[i] + 0.05);
  const auto out2 = hf::apply_attention(w2, f);
  for (std::size_t i = 0; i < out.numel(); ++i) {
    EXPECT_GE(std::abs(out2.values()[i]) + 1e-15, std::abs(out.values()[i]));
  }
}

// --- decoder -------------------------------------------------------------------

TEST(FusionDecoder, OutputShape) {
  hf::ParamSet<float> ps;
  hf::Rng rng(21);
  const auto shape = tiny_shape();
  hf::FusionDecoder<float> dec(ps, "dec", shape, rng);
  const int bands = 5, h = 32;
  hf::FeaturePyramid<float> ref3, hsi;
  for (int i = 0; i < 4; ++i) {
    ref3[i] = Tensor<float>::uniform({shape.rgb_channels, h >> i, h >> i}, -1, 1, rng);
    hsi[i] = Tensor<float>::uniform({shape.hsi_channels, bands, h >> i, h >> i}, -1, 1, rng);
  }
  const auto out = dec(ref3, hsi, bands, 1.0f, 1.0f);
  EXPECT_EQ(out.shape(), (hf::Shape{1, bands, h, h}));
}

TEST(FusionDecoder, ZeroPyramidsGiveZeroResidual) {
  hf::ParamSet<double> ps;
  hf::Rng rng(22);
  const auto shape = tiny_shape();
  hf::FusionDecoder<double> dec(ps, "dec", shape, rng);
  hf::FeaturePyramid<double> ref3, hsi;
  const int bands = 3, h = 16;
  for (int i = 0; i < 4; ++i) {
    ref3[i] = Tensor<double>::zeros({shape.rgb_channels, h >> i, h >> i});
    hsi[i] = Tensor<double>::zeros({shape.hsi_channels, bands, h >> i, h >> i});
  }
  const auto out = dec(ref3, hsi, bands, 1.0, 1.0);
  for (double v : out.values()) EXPECT_EQ(v, 0.0);
}

TEST(FusionDecoder, GradientReachesEveryInput) {
  hf::ParamSet<double> ps;
  hf::Rng rng(23);
  const auto shape = tiny_shape();
  hf::FusionDecoder<double> dec(ps, "dec", shape, rng);
  // the final candidate conv ships zero-initialized; give it weight so
  // gradients can reach the rest of the graph
  randomize(dec.qout.cand.weight, rng);
  const int bands = 2, h = 16;
  hf::FeaturePyramid<double> ref3, hsi;
  std::vector<Tensor<double>> leaves;
  for (int i = 0; i < 4; ++i) {
    ref3[i] = testutil::random_tensor({shape.rgb_channels, h >> i, h >> i}, rng);
    hsi[i] = testutil::random_tensor({shape.hsi_channels, bands, h >> i, h >> i}, rng);
    leaves.push_back(ref3[i]);
    leaves.push_back(hsi[i]);
  }
  leaves.push_back(dec.q3.gate.weight);
  leaves.push_back(dec.q1.cand.weight);
  leaves.push_back(dec.qout.cand.weight);
  auto loss = [&]() { return hf::mean(dec(ref3, hsi, bands, 1.0, 1.0)); };
  EXPECT_LT(testutil::gradcheck(loss, leaves, 1e-5, 6, &rng), 1e-4);
  for (auto& leaf : leaves) {
    double norm = 0.0;
    for (double g : leaf.grad()) norm += std::abs(g);
    EXPECT_GT(norm, 0.0);
  }
}

// --- full network ---------------------------------------------------------------

TEST(Hsifn, OutputShapeContract) {
  const auto shape = tiny_shape();
  hf::HsifnNet<float> net(shape, hf::default_srf(4), 7);
  const auto pair = hf::synth_scene(3, 4, 64, 64, 4.0);
  const auto lr = hf::degrade(pair.hr_cube, 4);
  const auto ref = hf::srf_project(pair.ref_cube, net.srf());
  const auto sr = hf::hsifn_forward(lr, ref, net, 4);
  EXPECT_EQ(sr.bands, 4);
  EXPECT_EQ(sr.height, 64);
  EXPECT_EQ(sr.width, 64);
}

TEST(Hsifn, ZeroResidualReproducesBicubic) {
  const auto shape = tiny_shape();
  hf::HsifnNet<float> net(shape, hf::default_srf(4), 8);
  const auto pair = hf::synth_scene(4, 4, 32, 32, 4.0);
  const auto lr = hf::degrade(pair.hr_cube, 4);
  const auto ref = hf::srf_project(pair.ref_cube, net.srf());
  const auto sr = hf::hsifn_forward(lr, ref, net, 4);  // freshly built: residual == 0
  const auto bicubic = hf::bicubic_resize(lr, 4);
  ASSERT_EQ(sr.data.size(), bicubic.data.size());
  for (std::size_t i = 0; i < sr.data.size(); ++i) EXPECT_EQ(sr.data[i], bicubic.data[i]);
}

TEST(Hsifn, MismatchedReferenceDimsThrow) {
  const auto shape = tiny_shape();
  hf::HsifnNet<float> net(shape, hf::default_srf(4), 9);
  const auto pair = hf::synth_scene(5, 4, 32, 32, 2.0);
  const auto lr = hf::degrade(pair.hr_cube, 4);
  hf::RgbImage bad(16, 16);
  EXPECT_THROW(hf::hsifn_forward(lr, bad, net, 4), hf::ContractViolation);
}

TEST(Hsifn, EveryParameterGroupReceivesFiniteGradients) {
  const auto shape = tiny_shape();
  hf::HsifnNet<double> net(shape, hf::default_srf(4), 10);
  hf::Rng rng(24);
  randomize(net.decoder().qout.cand.weight, rng);
  randomize(net.flow1().h1.out.weight, rng, -0.02, 0.02);
  randomize(net.flow2().h1.out.weight, rng, -0.02, 0.02);

  const auto pair = hf::synth_scene(6, 4, 32, 32, 3.0);
  const auto lr = hf::degrade(pair.hr_cube, 4);
  const auto up = hf::bicubic_resize(lr, 4);
  const auto r_hsi = hf::srf_project(up, net.srf());
  const auto r_ref = hf::srf_project(pair.ref_cube, net.srf());

  auto result = net.forward(hf::cube_to_tensor<double>(up), hf::rgb_to_tensor<double>(r_ref),
                            hf::rgb_to_tensor<double>(r_hsi));
  auto loss = hf::smooth_l1(result.sr, hf::cube_to_tensor<double>(pair.hr_cube));
  hf::backward(loss);

  std::map<std::string, double> group_norm;
  for (const auto& [name, t] : net.params().items()) {
    ASSERT_TRUE(t.has_grad()) << name;
    double norm = 0.0;
    for (double g : t.grad()) {
      ASSERT_TRUE(std::isfinite(g)) << name;
      norm += std::abs(g);
    }
    group_norm[name.substr(0, name.find('.'))] += norm;
  }
  for (const auto& [group, norm] : group_norm) {
    EXPECT_GT(norm, 0.0) << group;
  }
}

TEST(Hsifn, TinyInstanceGradientCheck) {
  const auto shape = tiny_shape();
  hf::HsifnNet<double> net(shape, hf::default_srf(4), 11);
  hf::Rng rng(25);
  randomize(net.decoder().qout.cand.weight, rng, -0.1, 0.1);
  randomize(net.flow1().h1.out.weight, rng, -0.02, 0.02);
  randomize(net.flow2().h1.out.weight, rng, -0.02, 0.02);

  const auto pair = hf::synth_scene(7, 4, 32, 32, 2.0);
  const auto lr = hf::degrade(pair.hr_cube, 4);
  const auto up = bicubic_resize(lr, 2);  // 16x16 working resolution
  const auto up_t = hf::cube_to_tensor<double>(hf::bicubic_resize_to(up, 16, 16));
  const auto ref_t = hf::rgb_to_tensor<double>(
      hf::srf_project(hf::bicubic_resize_to(pair.ref_cube, 16, 16), net.srf()));
  const auto hsi_t = hf::rgb_to_tensor<double>(
      hf::srf_project(hf::bicubic_resize_to(hf::bicubic_resize(lr, 2), 16, 16), net.srf()));
  const auto target = hf::cube_to_tensor<double>(hf::bicubic_resize_to(pair.hr_cube, 16, 16));

  auto loss = [&]() {
    auto r = net.forward(up_t, ref_t, hsi_t);
    return hf::smooth_l1(r.sr, target);
  };
  std::vector<Tensor<double>> leaves{
      net.rgb_encoder().l1.weight,        net.hsi_encoder().l1.gate.weight,
      net.flow2().h1.out.weight,          net.attention(0).head.weight,
      net.decoder().qout.cand.weight,     net.decoder().q3.gate.weight,
  };
  EXPECT_LT(testutil::gradcheck(loss, leaves, 1e-4, 4, &rng), 1e-4);
}
