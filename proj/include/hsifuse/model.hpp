#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "hsifuse/conv.hpp"
#include "hsifuse/image.hpp"
#include "hsifuse/ops.hpp"
#include "hsifuse/optim.hpp"
#include "hsifuse/resize.hpp"
#include "hsifuse/simulate.hpp"

namespace hsifuse {

constexpr int kPyramidLevels = 4;

template <typename T>
using FeaturePyramid = std::array<Tensor<T>, kPyramidLevels>;

/// Channel widths of every sub-network. Defaults give the reference
/// configuration; pipeline configs may shrink them for quick runs.
struct NetworkShape {
  int rgb_channels = 64;
  int hsi_channels = 16;
  std::array<int, 3> flow_channels = {16, 24, 32};  // pyramid features at 1/2, 1/4, 1/8
  int flow_head_width = 32;
  int attn_flow_channels = 16;     // flow embedding width
  int attn_reduced_channels = 16;  // point-wise reduction width
  int attn_width = 16;             // residual blocks width
  std::array<int, 3> decoder_channels = {16, 16, 16};  // levels 3, 2, 1
};

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

// Parameter init is uniform in +-sqrt(1/fan_in); biases start at zero.

template <typename T>
struct Conv2dLayer {
  Tensor<T> weight, bias;
  int stride = 1, pad = 0;

  Conv2dLayer() = default;
  Conv2dLayer(ParamSet<T>& ps, const std::string& name, int cin, int cout, int k, int stride_,
              Rng& rng, bool zero_init = false)
      : stride(stride_), pad((k - 1) / 2) {
    const T bound = static_cast<T>(std::sqrt(1.0 / (static_cast<double>(cin) * k * k)));
    Tensor<T> w = zero_init ? Tensor<T>::zeros({cout, cin, k, k})
                            : Tensor<T>::uniform({cout, cin, k, k}, -bound, bound, rng);
    weight = ps.add(name + ".weight", w);
    bias = ps.add(name + ".bias", Tensor<T>::zeros({cout}));
  }

  Tensor<T> operator()(const Tensor<T>& x) const { return conv2d(x, weight, bias, stride, pad); }
};

template <typename T>
struct Conv3dLayer {
  Tensor<T> weight, bias;
  int stride_spatial = 1;
  int kb = 3, ks = 3;

  Conv3dLayer() = default;
  Conv3dLayer(ParamSet<T>& ps, const std::string& name, int cin, int cout, int stride_, Rng& rng,
              bool zero_init = false)
      : stride_spatial(stride_) {
    const T bound = static_cast<T>(std::sqrt(1.0 / (static_cast<double>(cin) * kb * ks * ks)));
    Tensor<T> w = zero_init ? Tensor<T>::zeros({cout, cin, kb, ks, ks})
                            : Tensor<T>::uniform({cout, cin, kb, ks, ks}, -bound, bound, rng);
    weight = ps.add(name + ".weight", w);
    bias = ps.add(name + ".bias", Tensor<T>::zeros({cout}));
  }

  Tensor<T> operator()(const Tensor<T>& x) const {
    return conv3d(x, weight, bias, stride_spatial, (kb - 1) / 2, (ks - 1) / 2);
  }
};

enum class BandDirection { forward, backward, bidirectional };

/// Quasi-recurrent unit: two 3D convolutions produce per-band gates
/// (sigmoid) and candidates (tanh), merged by the gated band recurrence.
/// The backward direction runs the whole unit on band-reversed input and
/// reverses the result; bidirectional sums both passes. With upsample set,
/// the input is first nearest-neighbor upsampled x2 (upsampled 3D conv).
template <typename T>
struct QruLayer {
  Conv3dLayer<T> gate, cand;
  BandDirection dir = BandDirection::forward;
  bool upsample = false;

  QruLayer() = default;
  QruLayer(ParamSet<T>& ps, const std::string& name, int cin, int cout, BandDirection dir_,
           int stride_spatial, bool upsample_, Rng& rng, bool zero_init_candidate = false)
      : gate(ps, name + ".gate", cin, cout, stride_spatial, rng),
        cand(ps, name + ".cand", cin, cout, stride_spatial, rng, zero_init_candidate),
        dir(dir_),
        upsample(upsample_) {}

  Tensor<T> run_oriented(const Tensor<T>& x) const {
    return qru_merge(sigmoid(gate(x)), tanh(cand(x)));
  }

  Tensor<T> operator()(const Tensor<T>& input) const {
    Tensor<T> x = upsample ? upsample_nearest2x(input) : input;
    switch (dir) {
      case BandDirection::forward:
        return run_oriented(x);
      case BandDirection::backward:
        return band_reverse(run_oriented(band_reverse(x)));
      case BandDirection::bidirectional:
        return add(run_oriented(x), band_reverse(run_oriented(band_reverse(x))));
    }
    throw ContractViolation("QruLayer: unknown direction");
  }
};

// ---------------------------------------------------------------------------
// Encoders
// ---------------------------------------------------------------------------

/// Five conv(K=5)+SELU layers; the first two keep resolution, the last
/// three halve it. The pyramid is the outputs of layers 2..5 (full, 1/2,
/// 1/4, 1/8 resolution), all with the same channel count.
template <typename T>
struct RgbEncoder {
  Conv2dLayer<T> l1, l2, l3, l4, l5;

  RgbEncoder() = default;
  RgbEncoder(ParamSet<T>& ps, const std::string& name, int width, Rng& rng)
      : l1(ps, name + ".conv1", 3, width, 5, 1, rng),
        l2(ps, name + ".conv2", width, width, 5, 1, rng),
        l3(ps, name + ".conv3", width, width, 5, 2, rng),
        l4(ps, name + ".conv4", width, width, 5, 2, rng),
        l5(ps, name + ".conv5", width, width, 5, 2, rng) {}

  FeaturePyramid<T> operator()(const Tensor<T>& img) const {
    require(img.rank() == 3 && img.dim(0) == 3, "rgb_encode: input must be [3,H,W]");
    require(img.dim(1) % 8 == 0 && img.dim(2) % 8 == 0,
            "rgb_encode: dims must be divisible by 8");
    auto f1 = selu(l1(img));
    auto f2 = selu(l2(f1));
    auto f3 = selu(l3(f2));
    auto f4 = selu(l4(f3));
    auto f5 = selu(l5(f4));
    return {f2, f3, f4, f5};
  }
};

/// Four QRU layers: bidirectional at full resolution, then alternating
/// directions with spatial stride 2. The pyramid is the four layer outputs.
template <typename T>
struct HsiEncoder {
  QruLayer<T> l1, l2, l3, l4;

  HsiEncoder() = default;
  HsiEncoder(ParamSet<T>& ps, const std::string& name, int width, Rng& rng)
      : l1(ps, name + ".qru1", 1, width, BandDirection::bidirectional, 1, false, rng),
        l2(ps, name + ".qru2", width, width, BandDirection::forward, 2, false, rng),
        l3(ps, name + ".qru3", width, width, BandDirection::backward, 2, false, rng),
        l4(ps, name + ".qru4", width, width, BandDirection::forward, 2, false, rng) {}

  FeaturePyramid<T> operator()(const Tensor<T>& cube) const {
    require(cube.rank() == 4 && cube.dim(0) == 1, "hsi_encode: input must be [1,B,H,W]");
    require(cube.dim(2) % 8 == 0 && cube.dim(3) % 8 == 0,
            "hsi_encode: dims must be divisible by 8");
    auto f1 = l1(cube);
    auto f2 = l2(f1);
    auto f3 = l3(f2);
    auto f4 = l4(f3);
    return {f1, f2, f3, f4};
  }
};

// ---------------------------------------------------------------------------
// Flow estimation
// ---------------------------------------------------------------------------

template <typename T>
struct FlowRefineHead {
  Conv2dLayer<T> c1, c2, out;

  FlowRefineHead() = default;
  FlowRefineHead(ParamSet<T>& ps, const std::string& name, int cin, int width, Rng& rng)
      : c1(ps, name + ".c1", cin, width, 3, 1, rng),
        c2(ps, name + ".c2", width, width, 3, 1, rng),
        // zero-init: training starts from identity alignment
        out(ps, name + ".out", width, 2, 3, 1, rng, true) {}

  Tensor<T> operator()(const Tensor<T>& cost) const { return out(selu(c2(selu(c1(cost))))); }
};

/// Coarse-to-fine estimator: a shared 3-level feature pyramid, a flow
/// prediction at 1/8 scale, and per-level refinement from the cost
/// concat(features_anchor, warped features_src, local correlation, flow).
/// The explicit correlation volume gives the refinement heads direct
/// matching evidence, which is what lets them train from scratch at this
/// size. Flow values are in pixels at each level's own resolution;
/// upsampling doubles magnitudes.
template <typename T>
struct FlowEstimator {
  static constexpr int kCorrRadius = 2;
  static constexpr int kCorrChannels = (2 * kCorrRadius + 1) * (2 * kCorrRadius + 1);

  Conv2dLayer<T> f1, f2, f3;
  FlowRefineHead<T> h3, h2, h1;

  FlowEstimator() = default;
  FlowEstimator(ParamSet<T>& ps, const std::string& name, const NetworkShape& shape, Rng& rng)
      : f1(ps, name + ".feat1", 3, shape.flow_channels[0], 3, 2, rng),
        f2(ps, name + ".feat2", shape.flow_channels[0], shape.flow_channels[1], 3, 2, rng),
        f3(ps, name + ".feat3", shape.flow_channels[1], shape.flow_channels[2], 3, 2, rng),
        h3(ps, name + ".head3", 2 * shape.flow_channels[2] + kCorrChannels + 2,
           shape.flow_head_width, rng),
        h2(ps, name + ".head2", 2 * shape.flow_channels[1] + kCorrChannels + 2,
           shape.flow_head_width, rng),
        h1(ps, name + ".head1", 2 * shape.flow_channels[0] + kCorrChannels + 2,
           shape.flow_head_width, rng) {}

  std::array<Tensor<T>, 3> features(const Tensor<T>& img) const {
    auto a = selu(f1(img));
    auto b = selu(f2(a));
    auto c = selu(f3(b));
    return {a, b, c};
  }

  // Raw per-pixel feature similarity is nearly flat on smooth content, so
  // the correlation runs on high-passed, unit-normalized features and is
  // then box-smoothed for spatial support (patch-NCC-like evidence).
  static Tensor<T> matchable(const Tensor<T>& f) {
    return l2_normalize_channels(sub(f, box_smooth3(f)), T(1e-3));
  }

  static Tensor<T> cost(const Tensor<T>& fa, const Tensor<T>& fs_warped, const Tensor<T>& flow) {
    const auto corr = box_smooth3(
        local_correlation(matchable(fa), matchable(fs_warped), kCorrRadius));
    return concat_channels<T>({fa, fs_warped, scale(corr, static_cast<T>(fa.dim(0))), flow});
  }

  /// Flows at 1/8, 1/4, 1/2 and full resolution, each in its level's own
  /// pixel units. Exposed so pretraining can supervise every level.
  struct Levels {
    Tensor<T> eighth, quarter, half, full;
  };

  Levels estimate_levels(const Tensor<T>& anchor, const Tensor<T>& src) const {
    require(anchor.shape() == src.shape(), "estimate_flow: input dims must match");
    require(anchor.dim(1) % 8 == 0 && anchor.dim(2) % 8 == 0,
            "estimate_flow: dims must be divisible by 8");
    const auto fa = features(anchor);
    const auto fs = features(src);
    Levels out;
    out.eighth =
        h3(cost(fa[2], fs[2], Tensor<T>::zeros({2, fa[2].dim(1), fa[2].dim(2)})));
    auto up = scale(upsample_nearest2x(out.eighth), T(2));
    out.quarter = add(up, h2(cost(fa[1], warp_bilinear(fs[1], up), up)));
    up = scale(upsample_nearest2x(out.quarter), T(2));
    out.half = add(up, h1(cost(fa[0], warp_bilinear(fs[0], up), up)));
    out.full = scale(upsample_nearest2x(out.half), T(2));
    return out;
  }

  /// Full-resolution flow such that warp(src, flow) aligns src onto anchor.
  Tensor<T> estimate(const Tensor<T>& anchor, const Tensor<T>& src) const {
    return estimate_levels(anchor, src).full;
  }
};

/// Level-native flow set: V_0 is the full-resolution flow, V_i the previous
/// level spatially downsampled with magnitudes halved.
template <typename T>
inline std::array<Tensor<T>, kPyramidLevels> multilevel_flows(const Tensor<T>& full_res) {
  std::array<Tensor<T>, kPyramidLevels> v;
  v[0] = full_res;
  for (int i = 1; i < kPyramidLevels; ++i) {
    v[i] = scale(avg_downsample2x(v[i - 1]), T(0.5));
  }
  return v;
}

/// Per-level warp of a reference pyramid by level-native flows.
template <typename T>
inline FeaturePyramid<T> align_reference(const FeaturePyramid<T>& pyr,
                                         const std::array<Tensor<T>, kPyramidLevels>& flows) {
  FeaturePyramid<T> out;
  for (int i = 0; i < kPyramidLevels; ++i) {
    require(pyr[i].dim(1) == flows[i].dim(1) && pyr[i].dim(2) == flows[i].dim(2),
            "align_reference: level dims mismatch");
    out[i] = warp_bilinear(pyr[i], flows[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Attention
// ---------------------------------------------------------------------------

/// Element-wise attention over one pyramid level: the flow is embedded by a
/// small CNN, reference and HSI-RGB features are reduced by a shared
/// point-wise convolution, and a two-block residual CNN produces a
/// single-channel sigmoid weight map.
template <typename T>
struct AttentionHead {
  Conv2dLayer<T> reduce;    // shared point-wise reduction
  Conv2dLayer<T> fe1, fe2;  // flow embedding
  Conv2dLayer<T> entry, r1a, r1b, r2a, r2b, head;

  AttentionHead() = default;
  AttentionHead(ParamSet<T>& ps, const std::string& name, int level_channels,
                const NetworkShape& shape, Rng& rng)
      : reduce(ps, name + ".reduce", level_channels, shape.attn_reduced_channels, 1, 1, rng),
        fe1(ps, name + ".flow1", 2, shape.attn_flow_channels, 3, 1, rng),
        fe2(ps, name + ".flow2", shape.attn_flow_channels, shape.attn_flow_channels, 3, 1, rng),
        entry(ps, name + ".entry", 2 * shape.attn_reduced_channels + shape.attn_flow_channels,
              shape.attn_width, 3, 1, rng),
        r1a(ps, name + ".res1a", shape.attn_width, shape.attn_width, 3, 1, rng),
        r1b(ps, name + ".res1b", shape.attn_width, shape.attn_width, 3, 1, rng),
        r2a(ps, name + ".res2a", shape.attn_width, shape.attn_width, 3, 1, rng),
        r2b(ps, name + ".res2b", shape.attn_width, shape.attn_width, 3, 1, rng),
        head(ps, name + ".head", shape.attn_width, 1, 3, 1, rng) {}

  Tensor<T> embed_flow(const Tensor<T>& flow) const {
    require(flow.rank() == 3 && flow.dim(0) == 2, "embed_flow: flow must be [2,H,W]");
    return selu(fe2(selu(fe1(flow))));
  }

  /// W_i in (0,1), one channel.
  Tensor<T> weights(const Tensor<T>& f_ref, const Tensor<T>& f_hrgb,
                    const Tensor<T>& flow) const {
    require(f_ref.dim(1) == f_hrgb.dim(1) && f_ref.dim(2) == f_hrgb.dim(2) &&
                f_ref.dim(1) == flow.dim(1) && f_ref.dim(2) == flow.dim(2),
            "attention_weights: level dims mismatch");
    auto f_flow = embed_flow(flow);
    auto h = selu(entry(concat_channels<T>({reduce(f_ref), reduce(f_hrgb), f_flow})));
    h = add(h, selu(r1b(selu(r1a(h)))));
    h = add(h, selu(r2b(selu(r2a(h)))));
    return sigmoid(head(h));
  }
};

/// F_ref3 = W (broadcast over channels) * F_ref2.
template <typename T>
inline Tensor<T> apply_attention(const Tensor<T>& weight, const Tensor<T>& f_ref2) {
  return mul_channel_broadcast(weight, f_ref2);
}

// ---------------------------------------------------------------------------
// Fusion decoder
// ---------------------------------------------------------------------------

/// Deepest-to-shallowest fusion: three upsample-QRU layers close the
/// resolution gap from H/8 to H, then a final bidirectional QRU emits the
/// single-channel B-band residual. Level i consumes
/// concat(previous decoder features, alpha_hsi * F_hsi_i,
/// alpha_ref * broadcast(F_ref3_i)).
template <typename T>
struct FusionDecoder {
  QruLayer<T> q3, q2, q1, qout;

  FusionDecoder() = default;
  FusionDecoder(ParamSet<T>& ps, const std::string& name, const NetworkShape& shape, Rng& rng)
      : q3(ps, name + ".qru3", shape.hsi_channels + shape.rgb_channels, shape.decoder_channels[0],
           BandDirection::forward, 1, true, rng),
        q2(ps, name + ".qru2",
           shape.decoder_channels[0] + shape.hsi_channels + shape.rgb_channels,
           shape.decoder_channels[1], BandDirection::backward, 1, true, rng),
        q1(ps, name + ".qru1",
           shape.decoder_channels[1] + shape.hsi_channels + shape.rgb_channels,
           shape.decoder_channels[2], BandDirection::forward, 1, true, rng),
        // zero-init candidate: the residual starts at zero, so an untrained
        // network reproduces its bicubic input
        qout(ps, name + ".out", shape.decoder_channels[2] + shape.hsi_channels + shape.rgb_channels,
             1, BandDirection::bidirectional, 1, false, rng, true) {}

  Tensor<T> operator()(const FeaturePyramid<T>& ref3, const FeaturePyramid<T>& hsi, int bands,
                       T alpha_hsi, T alpha_ref) const {
    for (int i = 0; i < kPyramidLevels; ++i) {
      require(ref3[i].dim(1) == hsi[i].dim(2) && ref3[i].dim(2) == hsi[i].dim(3),
              "decode_fuse: pyramids are not level-aligned");
    }
    auto level_input = [&](int level, const Tensor<T>* prev) {
      std::vector<Tensor<T>> parts;
      if (prev) parts.push_back(*prev);
      parts.push_back(scale(hsi[static_cast<std::size_t>(level)], alpha_hsi));
      parts.push_back(
          broadcast_band(scale(ref3[static_cast<std::size_t>(level)], alpha_ref), bands));
      return concat_channels(parts);
    };
    auto d = q3(level_input(3, nullptr));
    d = q2(level_input(2, &d));
    d = q1(level_input(1, &d));
    return qout(level_input(0, &d));
  }
};

// ---------------------------------------------------------------------------
// Full network
// ---------------------------------------------------------------------------

struct AblationFlags {
  bool align = true;      // off: zero flows everywhere (no_align)
  bool attention = true;  // off: W == 1 (no_attention)
  bool reference = true;  // off: zero reference features (sisr_only)
};

template <typename T>
struct HsifnForwardResult {
  Tensor<T> sr;  // [1,B,H,W], clamped to [0,1]
  Tensor<T> coarse_flow;
  std::array<Tensor<T>, kPyramidLevels> flows;
  std::array<Tensor<T>, kPyramidLevels> attention_maps;  // defined iff attention ran
};

/// The assembled fusion network. Construction order of parameters is fixed
/// and, together with the seed, determines the whole run.
template <typename T>
class HsifnNet {
 public:
  HsifnNet(const NetworkShape& shape, const Srf& srf, std::uint64_t init_seed)
      : shape_(shape), srf_(srf) {
    Rng rng = Rng(init_seed).fork(1);
    rgb_enc_ = RgbEncoder<T>(params_, "rgb_encoder", shape.rgb_channels, rng);
    hsi_enc_ = HsiEncoder<T>(params_, "hsi_encoder", shape.hsi_channels, rng);
    flow1_ = FlowEstimator<T>(params_, "flow1", shape, rng);
    flow2_ = FlowEstimator<T>(params_, "flow2", shape, rng);
    for (int i = 0; i < kPyramidLevels; ++i) {
      attn_[static_cast<std::size_t>(i)] = AttentionHead<T>(
          params_, "attention.l" + std::to_string(i), shape.rgb_channels, shape, rng);
    }
    decoder_ = FusionDecoder<T>(params_, "decoder", shape, rng);
  }

  ParamSet<T>& params() { return params_; }
  const ParamSet<T>& params() const { return params_; }
  const NetworkShape& shape() const { return shape_; }
  const Srf& srf() const { return srf_; }

  FlowEstimator<T>& flow1() { return flow1_; }
  FlowEstimator<T>& flow2() { return flow2_; }
  RgbEncoder<T>& rgb_encoder() { return rgb_enc_; }
  HsiEncoder<T>& hsi_encoder() { return hsi_enc_; }
  AttentionHead<T>& attention(int level) { return attn_[static_cast<std::size_t>(level)]; }
  FusionDecoder<T>& decoder() { return decoder_; }

  T alpha_hsi = T(1);
  T alpha_ref = T(1);

  /// hsi_up: [1,B,H,W] upsampled LR cube; r_ref / r_hsi: [3,H,W].
  HsifnForwardResult<T> forward(const Tensor<T>& hsi_up, const Tensor<T>& r_ref,
                                const Tensor<T>& r_hsi, const AblationFlags& flags = {}) const {
    require(hsi_up.rank() == 4 && hsi_up.dim(0) == 1, "hsifn: hsi input must be [1,B,H,W]");
    require(r_ref.rank() == 3 && r_ref.dim(0) == 3, "hsifn: reference must be [3,H,W]");
    const int bands = hsi_up.dim(1), h = hsi_up.dim(2), w = hsi_up.dim(3);
    require(r_ref.dim(1) == h && r_ref.dim(2) == w && r_hsi.dim(1) == h && r_hsi.dim(2) == w,
            "hsifn: image dims must match the upsampled cube");
    require(h % 8 == 0 && w % 8 == 0, "hsifn: dims must be divisible by 8");

    HsifnForwardResult<T> result;
    auto stage = [](const char* label, auto&& fn) {
      try {
        return fn();
      } catch (const ContractViolation& e) {
        throw ContractViolation(std::string(label) + ": " + e.what());
      }
    };

    const auto f_hsi = stage("hsi-encoder", [&] { return hsi_enc_(hsi_up); });

    FeaturePyramid<T> ref3;
    result.coarse_flow = Tensor<T>::zeros({2, h, w});
    for (int i = 0; i < kPyramidLevels; ++i) {
      result.flows[static_cast<std::size_t>(i)] = Tensor<T>::zeros({2, h >> i, w >> i});
    }

    if (!flags.reference) {
      for (int i = 0; i < kPyramidLevels; ++i) {
        ref3[static_cast<std::size_t>(i)] =
            Tensor<T>::zeros({shape_.rgb_channels, h >> i, w >> i});
      }
    } else {
      Tensor<T> r_ref2 = r_ref;
      if (flags.align) {
        result.coarse_flow = stage("flow-coarse", [&] { return flow1_.estimate(r_hsi, r_ref); });
        r_ref2 = warp_bilinear(r_ref, result.coarse_flow);
      }
      const auto f_ref = stage("rgb-encoder", [&] { return rgb_enc_(r_ref2); });
      const auto f_hrgb = stage("rgb-encoder", [&] { return rgb_enc_(r_hsi); });
      if (flags.align) {
        const auto v0 = stage("flow-multilevel", [&] { return flow2_.estimate(r_hsi, r_ref2); });
        result.flows = multilevel_flows(v0);
      }
      const auto f_ref2 =
          flags.align ? stage("align", [&] { return align_reference(f_ref, result.flows); })
                      : f_ref;
      if (flags.attention) {
        for (int i = 0; i < kPyramidLevels; ++i) {
          const auto wmap = stage("attention", [&] {
            return attn_[static_cast<std::size_t>(i)].weights(
                f_ref[static_cast<std::size_t>(i)], f_hrgb[static_cast<std::size_t>(i)],
                result.flows[static_cast<std::size_t>(i)]);
          });
          result.attention_maps[static_cast<std::size_t>(i)] = wmap;
          ref3[static_cast<std::size_t>(i)] =
              apply_attention(wmap, f_ref2[static_cast<std::size_t>(i)]);
        }
      } else {
        ref3 = f_ref2;
      }
    }

    const auto residual =
        stage("decoder", [&] { return decoder_(ref3, f_hsi, bands, alpha_hsi, alpha_ref); });
    result.sr = clamp01(add(hsi_up, residual));
    return result;
  }

 private:
  NetworkShape shape_;
  Srf srf_;
  ParamSet<T> params_;
  RgbEncoder<T> rgb_enc_;
  HsiEncoder<T> hsi_enc_;
  FlowEstimator<T> flow1_, flow2_;
  std::array<AttentionHead<T>, kPyramidLevels> attn_;
  FusionDecoder<T> decoder_;
};

/// Cube-level forward pass: upsampling, RGB synthesis, network, clamp.
template <typename T>
inline HsiCube hsifn_forward(const HsiCube& h_lr, const RgbImage& r_ref, const HsifnNet<T>& net,
                             int scale, const AblationFlags& flags = {}) {
  require(r_ref.height == h_lr.height * scale && r_ref.width == h_lr.width * scale,
          "hsifn_forward: reference dims must equal scale x LR dims");
  const HsiCube up = bicubic_resize(h_lr, scale);
  const RgbImage r_hsi = srf_project(up, net.srf());
  const auto result =
      net.forward(cube_to_tensor<T>(up), rgb_to_tensor<T>(r_ref), rgb_to_tensor<T>(r_hsi), flags);
  return tensor_to_cube(result.sr);
}

}  // namespace hsifuse
