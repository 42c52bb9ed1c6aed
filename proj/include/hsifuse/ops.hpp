#pragma once

#include <cstddef>
#include <vector>

#include "hsifuse/conv.hpp"
#include "hsifuse/tensor.hpp"

namespace hsifuse {

/// Nearest-neighbor x2 upsampling of the last two (spatial) axes.
/// Accepts [C,H,W] or [C,B,H,W].
template <typename T>
inline Tensor<T> upsample_nearest2x(const Tensor<T>& x) {
  require(x.rank() == 3 || x.rank() == 4, "upsample_nearest2x: rank must be 3 or 4");
  const int h = x.dim(x.rank() - 2), w = x.dim(x.rank() - 1);
  std::size_t planes = 1;
  Shape oshape = x.shape();
  for (int i = 0; i < x.rank() - 2; ++i) planes *= static_cast<std::size_t>(x.dim(i));
  oshape[x.rank() - 2] = 2 * h;
  oshape[x.rank() - 1] = 2 * w;

  Tensor<T> out = Tensor<T>::zeros(oshape);
  const T* xv = x.values().data();
  T* ov = out.impl()->data.data();
  const int oh = 2 * h, ow = 2 * w;
  for (std::size_t p = 0; p < planes; ++p) {
    const T* xp = xv + p * h * w;
    T* op = ov + p * static_cast<std::size_t>(oh) * ow;
    for (int y = 0; y < oh; ++y) {
      const T* xr = xp + static_cast<std::size_t>(y / 2) * w;
      T* orow = op + static_cast<std::size_t>(y) * ow;
      for (int xo = 0; xo < ow; ++xo) orow[xo] = xr[xo / 2];
    }
  }
  auto px = x.impl();
  detail::attach(out, {x}, [px, planes, h, w](detail::Node<T>& self) {
    px->ensure_grad();
    const int oh = 2 * h, ow = 2 * w;
    const T* g = self.grad.data();
    for (std::size_t p = 0; p < planes; ++p) {
      const T* gp = g + p * static_cast<std::size_t>(oh) * ow;
      T* xp = px->grad.data() + p * static_cast<std::size_t>(h) * w;
      for (int y = 0; y < h; ++y) {
        const T* g0 = gp + static_cast<std::size_t>(2 * y) * ow;
        const T* g1 = gp + static_cast<std::size_t>(2 * y + 1) * ow;
        T* xr = xp + static_cast<std::size_t>(y) * w;
        for (int xo = 0; xo < w; ++xo) {
          xr[xo] += g0[2 * xo] + g0[2 * xo + 1] + g1[2 * xo] + g1[2 * xo + 1];
        }
      }
    }
  });
  return out;
}

/// 2x2 mean pooling over the last two axes of a [C,H,W] tensor (H, W even).
template <typename T>
inline Tensor<T> avg_downsample2x(const Tensor<T>& x) {
  require(x.rank() == 3, "avg_downsample2x: rank must be 3");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  require(h % 2 == 0 && w % 2 == 0, "avg_downsample2x: spatial dims must be even");
  const int oh = h / 2, ow = w / 2;
  Tensor<T> out = Tensor<T>::zeros({c, oh, ow});
  const T* xv = x.values().data();
  T* ov = out.impl()->data.data();
  for (int ci = 0; ci < c; ++ci) {
    const T* xp = xv + static_cast<std::size_t>(ci) * h * w;
    T* op = ov + static_cast<std::size_t>(ci) * oh * ow;
    for (int y = 0; y < oh; ++y) {
      const T* r0 = xp + static_cast<std::size_t>(2 * y) * w;
      const T* r1 = xp + static_cast<std::size_t>(2 * y + 1) * w;
      T* orow = op + static_cast<std::size_t>(y) * ow;
      for (int xo = 0; xo < ow; ++xo) {
        orow[xo] = (r0[2 * xo] + r0[2 * xo + 1] + r1[2 * xo] + r1[2 * xo + 1]) * T(0.25);
      }
    }
  }
  auto px = x.impl();
  detail::attach(out, {x}, [px, c, h, w](detail::Node<T>& self) {
    px->ensure_grad();
    const int oh = h / 2, ow = w / 2;
    for (int ci = 0; ci < c; ++ci) {
      const T* gp = self.grad.data() + static_cast<std::size_t>(ci) * oh * ow;
      T* xp = px->grad.data() + static_cast<std::size_t>(ci) * h * w;
      for (int y = 0; y < h; ++y) {
        const T* gr = gp + static_cast<std::size_t>(y / 2) * ow;
        T* xr = xp + static_cast<std::size_t>(y) * w;
        for (int xo = 0; xo < w; ++xo) xr[xo] += gr[xo / 2] * T(0.25);
      }
    }
  });
  return out;
}

/// Concatenation along axis 0 (channels). Channel-major layout makes this a
/// plain buffer concatenation.
template <typename T>
inline Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts) {
  require(!parts.empty(), "concat_channels: needs at least one part");
  Shape oshape = parts[0].shape();
  int c = 0;
  for (const auto& p : parts) {
    require(p.rank() == parts[0].rank(), "concat_channels: rank mismatch");
    for (int i = 1; i < p.rank(); ++i) {
      require(p.dim(i) == parts[0].dim(i), "concat_channels: trailing dims mismatch");
    }
    c += p.dim(0);
  }
  oshape[0] = c;
  Tensor<T> out = Tensor<T>::zeros(oshape);
  T* ov = out.impl()->data.data();
  std::size_t off = 0;
  for (const auto& p : parts) {
    const auto& pv = p.values();
    std::copy(pv.begin(), pv.end(), ov + off);
    off += pv.size();
  }

  bool need = false;
  for (const auto& p : parts) need = need || detail::wants_grad(p.impl());
  if (need) {
    std::vector<std::shared_ptr<detail::Node<T>>> pn;
    pn.reserve(parts.size());
    for (const auto& p : parts) pn.push_back(p.impl());
    auto& n = *out.impl();
    n.needs_grad = true;
    n.parents.assign(pn.begin(), pn.end());
    n.backward = [pn](detail::Node<T>& self) {
      std::size_t off = 0;
      for (const auto& p : pn) {
        if (detail::wants_grad(p)) {
          p->ensure_grad();
#pragma omp parallel for simd schedule(static)
          for (std::size_t i = 0; i < p->data.size(); ++i) p->grad[i] += self.grad[off + i];
        }
        off += p->data.size();
      }
    };
  }
  return out;
}

/// Reverses the band axis of a [C,B,H,W] tensor.
template <typename T>
inline Tensor<T> band_reverse(const Tensor<T>& x) {
  require(x.rank() == 4, "band_reverse: input must be [C,B,H,W]");
  const int c = x.dim(0), nb = x.dim(1);
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  const T* xv = x.values().data();
  T* ov = out.impl()->data.data();
  for (int ci = 0; ci < c; ++ci) {
    for (int b = 0; b < nb; ++b) {
      const T* src = xv + (static_cast<std::size_t>(ci) * nb + (nb - 1 - b)) * plane;
      T* dst = ov + (static_cast<std::size_t>(ci) * nb + b) * plane;
      std::copy(src, src + plane, dst);
    }
  }
  auto px = x.impl();
  detail::attach(out, {x}, [px, c, nb, plane](detail::Node<T>& self) {
    px->ensure_grad();
    for (int ci = 0; ci < c; ++ci) {
      for (int b = 0; b < nb; ++b) {
        const T* g = self.grad.data() + (static_cast<std::size_t>(ci) * nb + b) * plane;
        T* xg = px->grad.data() + (static_cast<std::size_t>(ci) * nb + (nb - 1 - b)) * plane;
#pragma omp parallel for simd schedule(static)
        for (std::size_t i = 0; i < plane; ++i) xg[i] += g[i];
      }
    }
  });
  return out;
}

/// Replicates a [C,H,W] map across a new band axis: result [C,B,H,W].
/// The gradient sums over the band axis.
template <typename T>
inline Tensor<T> broadcast_band(const Tensor<T>& x, int bands) {
  require(x.rank() == 3, "broadcast_band: input must be [C,H,W]");
  require(bands >= 1, "broadcast_band: band count must be >= 1");
  const int c = x.dim(0);
  const std::size_t plane = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
  Tensor<T> out = Tensor<T>::zeros({c, bands, x.dim(1), x.dim(2)});
  const T* xv = x.values().data();
  T* ov = out.impl()->data.data();
  for (int ci = 0; ci < c; ++ci) {
    const T* src = xv + static_cast<std::size_t>(ci) * plane;
    for (int b = 0; b < bands; ++b) {
      std::copy(src, src + plane, ov + (static_cast<std::size_t>(ci) * bands + b) * plane);
    }
  }
  auto px = x.impl();
  detail::attach(out, {x}, [px, c, bands, plane](detail::Node<T>& self) {
    px->ensure_grad();
    for (int ci = 0; ci < c; ++ci) {
      T* xg = px->grad.data() + static_cast<std::size_t>(ci) * plane;
      for (int b = 0; b < bands; ++b) {
        const T* g = self.grad.data() + (static_cast<std::size_t>(ci) * bands + b) * plane;
#pragma omp parallel for simd schedule(static)
        for (std::size_t i = 0; i < plane; ++i) xg[i] += g[i];
      }
    }
  });
  return out;
}

/// Multiplies a single-channel map [1,H,W] across every channel of x [C,H,W].
template <typename T>
inline Tensor<T> mul_channel_broadcast(const Tensor<T>& weight, const Tensor<T>& x) {
  require(weight.rank() == 3 && weight.dim(0) == 1, "mul_channel_broadcast: weight must be [1,H,W]");
  require(x.rank() == 3, "mul_channel_broadcast: input must be [C,H,W]");
  require(weight.dim(1) == x.dim(1) && weight.dim(2) == x.dim(2),
          "mul_channel_broadcast: spatial dims mismatch");
  const int c = x.dim(0);
  const std::size_t plane = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  const T* wv = weight.values().data();
  const T* xv = x.values().data();
  T* ov = out.impl()->data.data();
  for (int ci = 0; ci < c; ++ci) {
    const T* xp = xv + static_cast<std::size_t>(ci) * plane;
    T* op = ov + static_cast<std::size_t>(ci) * plane;
    for (std::size_t i = 0; i < plane; ++i) op[i] = wv[i] * xp[i];
  }
  auto pw = weight.impl();
  auto px = x.impl();
  detail::attach(out, {weight, x}, [pw, px, c, plane](detail::Node<T>& self) {
    if (detail::wants_grad(pw)) {
      pw->ensure_grad();
      for (int ci = 0; ci < c; ++ci) {
        const T* g = self.grad.data() + static_cast<std::size_t>(ci) * plane;
        const T* xp = px->data.data() + static_cast<std::size_t>(ci) * plane;
        for (std::size_t i = 0; i < plane; ++i) pw->grad[i] += g[i] * xp[i];
      }
    }
    if (detail::wants_grad(px)) {
      px->ensure_grad();
      for (int ci = 0; ci < c; ++ci) {
        const T* g = self.grad.data() + static_cast<std::size_t>(ci) * plane;
        T* xg = px->grad.data() + static_cast<std::size_t>(ci) * plane;
        for (std::size_t i = 0; i < plane; ++i) xg[i] += g[i] * pw->data[i];
      }
    }
  });
  return out;
}

/// Gated band recurrence: h_i = (1 - w_i) * h_{i-1} + w_i * f_i with h_0 = 0.
/// Both inputs are [C,B,H,W]; the recurrence runs along the band axis.
template <typename T>
inline Tensor<T> qru_merge(const Tensor<T>& w, const Tensor<T>& f) {
  detail::check_same_shape(w, f, "qru_merge");
  require(w.rank() == 4, "qru_merge: inputs must be [C,B,H,W]");
  const int c = w.dim(0), nb = w.dim(1);
  const std::size_t plane = static_cast<std::size_t>(w.dim(2)) * w.dim(3);
  Tensor<T> out = Tensor<T>::zeros(w.shape());
  const T* wv = w.values().data();
  const T* fv = f.values().data();
  T* hv = out.impl()->data.data();
  for (int ci = 0; ci < c; ++ci) {
    const std::size_t base = static_cast<std::size_t>(ci) * nb * plane;
    for (int b = 0; b < nb; ++b) {
      const T* wb = wv + base + static_cast<std::size_t>(b) * plane;
      const T* fb = fv + base + static_cast<std::size_t>(b) * plane;
      T* hb = hv + base + static_cast<std::size_t>(b) * plane;
      if (b == 0) {
        for (std::size_t i = 0; i < plane; ++i) hb[i] = wb[i] * fb[i];
      } else {
        const T* hp = hb - plane;
        for (std::size_t i = 0; i < plane; ++i) {
          hb[i] = (T(1) - wb[i]) * hp[i] + wb[i] * fb[i];
        }
      }
    }
  }
  auto pw = w.impl();
  auto pf = f.impl();
  detail::attach(out, {w, f}, [pw, pf, c, nb, plane](detail::Node<T>& self) {
    const bool needw = detail::wants_grad(pw);
    const bool needf = detail::wants_grad(pf);
    if (needw) pw->ensure_grad();
    if (needf) pf->ensure_grad();
    std::vector<T> carry(plane);
    for (int ci = 0; ci < c; ++ci) {
      const std::size_t base = static_cast<std::size_t>(ci) * nb * plane;
      std::fill(carry.begin(), carry.end(), T(0));
      for (int b = nb - 1; b >= 0; --b) {
        const std::size_t boff = base + static_cast<std::size_t>(b) * plane;
        const T* g = self.grad.data() + boff;
        const T* wb = pw->data.data() + boff;
        const T* fb = pf->data.data() + boff;
        const T* hp = b > 0 ? self.data.data() + boff - plane : nullptr;
        T* gw = needw ? pw->grad.data() + boff : nullptr;
        T* gf = needf ? pf->grad.data() + boff : nullptr;
        for (std::size_t i = 0; i < plane; ++i) {
          const T adj = g[i] + carry[i];
          if (needf) gf[i] += adj * wb[i];
          if (needw) gw[i] += adj * (fb[i] - (hp ? hp[i] : T(0)));
          carry[i] = adj * (T(1) - wb[i]);
        }
      }
    }
  });
  return out;
}

/// Differentiable bilinear warp. x is [C,H,W], flow is [2,H,W] holding
/// (dx, dy) in pixels; output(p) samples x at p + flow(p) with border clamp.
template <typename T>
inline Tensor<T> warp_bilinear(const Tensor<T>& x, const Tensor<T>& flow) {
  require(x.rank() == 3, "warp_bilinear: input must be [C,H,W]");
  require(flow.rank() == 3 && flow.dim(0) == 2, "warp_bilinear: flow must be [2,H,W]");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  require(flow.dim(1) == h && flow.dim(2) == w, "warp_bilinear: flow dims must match input");

  Tensor<T> out = Tensor<T>::zeros(x.shape());
  const T* xv = x.values().data();
  const T* fv = flow.values().data();
  T* ov = out.impl()->data.data();
  const std::size_t plane = static_cast<std::size_t>(h) * w;

  auto sample_setup = [h, w](T sx, T sy, int& ix, int& iy, T& fx, T& fy, bool& cx, bool& cy) {
    cx = false;
    cy = false;
    if (sx <= T(0)) {
      sx = T(0);
      cx = true;
    } else if (sx >= T(w - 1)) {
      sx = T(w - 1);
      cx = true;
    }
    if (sy <= T(0)) {
      sy = T(0);
      cy = true;
    } else if (sy >= T(h - 1)) {
      sy = T(h - 1);
      cy = true;
    }
    ix = static_cast<int>(sx);
    iy = static_cast<int>(sy);
    if (ix > w - 2) ix = w - 2 < 0 ? 0 : w - 2;
    if (iy > h - 2) iy = h - 2 < 0 ? 0 : h - 2;
    fx = sx - static_cast<T>(ix);
    fy = sy - static_cast<T>(iy);
  };

  for (int y = 0; y < h; ++y) {
    for (int xo = 0; xo < w; ++xo) {
      const std::size_t p = static_cast<std::size_t>(y) * w + xo;
      int ix, iy;
      T fx, fy;
      bool cx, cy;
      sample_setup(static_cast<T>(xo) + fv[p], static_cast<T>(y) + fv[plane + p], ix, iy, fx, fy,
                   cx, cy);
      const std::size_t i00 = static_cast<std::size_t>(iy) * w + ix;
      const T w00 = (T(1) - fx) * (T(1) - fy), w01 = fx * (T(1) - fy);
      const T w10 = (T(1) - fx) * fy, w11 = fx * fy;
      const int x1 = (w > 1) ? 1 : 0;
      const int y1 = (h > 1) ? w : 0;
      for (int ci = 0; ci < c; ++ci) {
        const T* xp = xv + static_cast<std::size_t>(ci) * plane;
        ov[static_cast<std::size_t>(ci) * plane + p] = w00 * xp[i00] + w01 * xp[i00 + x1] +
                                                       w10 * xp[i00 + y1] + w11 * xp[i00 + y1 + x1];
      }
    }
  }

  auto px = x.impl();
  auto pf = flow.impl();
  detail::attach(out, {x, flow}, [px, pf, c, h, w, plane, sample_setup](detail::Node<T>& self) {
    const bool needx = detail::wants_grad(px);
    const bool needf = detail::wants_grad(pf);
    if (needx) px->ensure_grad();
    if (needf) pf->ensure_grad();
    const T* fv = pf->data.data();
    const T* xv = px->data.data();
    for (int y = 0; y < h; ++y) {
      for (int xo = 0; xo < w; ++xo) {
        const std::size_t p = static_cast<std::size_t>(y) * w + xo;
        int ix, iy;
        T fx, fy;
        bool cx, cy;
        sample_setup(static_cast<T>(xo) + fv[p], static_cast<T>(y) + fv[plane + p], ix, iy, fx,
                     fy, cx, cy);
        const std::size_t i00 = static_cast<std::size_t>(iy) * w + ix;
        const int x1 = (w > 1) ? 1 : 0;
        const int y1 = (h > 1) ? w : 0;
        const T w00 = (T(1) - fx) * (T(1) - fy), w01 = fx * (T(1) - fy);
        const T w10 = (T(1) - fx) * fy, w11 = fx * fy;
        T gfx = T(0), gfy = T(0);
        for (int ci = 0; ci < c; ++ci) {
          const T g = self.grad[static_cast<std::size_t>(ci) * plane + p];
          const T* xp = xv + static_cast<std::size_t>(ci) * plane;
          if (needx) {
            T* xg = px->grad.data() + static_cast<std::size_t>(ci) * plane;
            xg[i00] += g * w00;
            xg[i00 + x1] += g * w01;
            xg[i00 + y1] += g * w10;
            xg[i00 + y1 + x1] += g * w11;
          }
          if (needf) {
            const T v00 = xp[i00], v01 = xp[i00 + x1], v10 = xp[i00 + y1], v11 = xp[i00 + y1 + x1];
            gfx += g * ((T(1) - fy) * (v01 - v00) + fy * (v11 - v10));
            gfy += g * ((T(1) - fx) * (v10 - v00) + fx * (v11 - v01));
          }
        }
        if (needf) {
          if (!cx) pf->grad[p] += gfx;
          if (!cy) pf->grad[plane + p] += gfy;
        }
      }
    }
  });
  return out;
}

/// 3x3 box mean per channel (zero padding, fixed divisor 9). Self-adjoint,
/// so the backward pass is the same filter applied to the gradient.
template <typename T>
inline Tensor<T> box_smooth3(const Tensor<T>& x) {
  require(x.rank() == 3, "box_smooth3: input must be [C,H,W]");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const T inv9 = T(1) / T(9);
  auto run = [c, h, w, plane, inv9](const T* in, T* out_add, bool accumulate) {
    for (int ci = 0; ci < c; ++ci) {
      const T* xp = in + static_cast<std::size_t>(ci) * plane;
      T* op = out_add + static_cast<std::size_t>(ci) * plane;
      for (int y = 0; y < h; ++y) {
        for (int x0 = 0; x0 < w; ++x0) {
          T acc = T(0);
          for (int dy = -1; dy <= 1; ++dy) {
            const int yy = y + dy;
            if (yy < 0 || yy >= h) continue;
            for (int dx = -1; dx <= 1; ++dx) {
              const int xx = x0 + dx;
              if (xx < 0 || xx >= w) continue;
              acc += xp[static_cast<std::size_t>(yy) * w + xx];
            }
          }
          const T v = acc * inv9;
          if (accumulate) {
            op[static_cast<std::size_t>(y) * w + x0] += v;
          } else {
            op[static_cast<std::size_t>(y) * w + x0] = v;
          }
        }
      }
    }
  };
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  run(x.values().data(), out.impl()->data.data(), false);
  auto px = x.impl();
  detail::attach(out, {x}, [px, run](detail::Node<T>& self) {
    px->ensure_grad();
    run(self.grad.data(), px->grad.data(), true);
  });
  return out;
}

/// Per-pixel L2 normalization across the channel axis of a [C,H,W] tensor:
/// y(p) = x(p) / (||x(p)|| + eps).
template <typename T>
inline Tensor<T> l2_normalize_channels(const Tensor<T>& x, T eps = T(1e-6)) {
  require(x.rank() == 3, "l2_normalize_channels: input must be [C,H,W]");
  const int c = x.dim(0);
  const std::size_t plane = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  const T* xv = x.values().data();
  T* ov = out.impl()->data.data();
  for (std::size_t p = 0; p < plane; ++p) {
    T s = T(0);
    for (int ci = 0; ci < c; ++ci) {
      const T v = xv[static_cast<std::size_t>(ci) * plane + p];
      s += v * v;
    }
    const T n = std::sqrt(s) + eps;
    for (int ci = 0; ci < c; ++ci) {
      ov[static_cast<std::size_t>(ci) * plane + p] = xv[static_cast<std::size_t>(ci) * plane + p] / n;
    }
  }
  auto px = x.impl();
  detail::attach(out, {x}, [px, c, plane, eps](detail::Node<T>& self) {
    px->ensure_grad();
    const T* xv = px->data.data();
    const T* g = self.grad.data();
    for (std::size_t p = 0; p < plane; ++p) {
      T s = T(0), gx = T(0);
      for (int ci = 0; ci < c; ++ci) {
        const T v = xv[static_cast<std::size_t>(ci) * plane + p];
        s += v * v;
        gx += g[static_cast<std::size_t>(ci) * plane + p] * v;
      }
      const T n0 = std::sqrt(s);
      const T n = n0 + eps;
      const T corr = n0 > T(0) ? gx / (n0 * n * n) : T(0);
      for (int ci = 0; ci < c; ++ci) {
        const T v = xv[static_cast<std::size_t>(ci) * plane + p];
        px->grad[static_cast<std::size_t>(ci) * plane + p] +=
            g[static_cast<std::size_t>(ci) * plane + p] / n - v * corr;
      }
    }
  });
  return out;
}

/// Local correlation cost volume between two [C,H,W] feature maps: output
/// channel d = (dy+r)*(2r+1) + (dx+r) holds the channel-mean inner product
/// <a(p), b(p + (dx,dy))>; out-of-bounds samples contribute zero.
template <typename T>
inline Tensor<T> local_correlation(const Tensor<T>& a, const Tensor<T>& b, int radius) {
  detail::check_same_shape(a, b, "local_correlation");
  require(a.rank() == 3, "local_correlation: inputs must be [C,H,W]");
  require(radius >= 1, "local_correlation: radius must be >= 1");
  const int c = a.dim(0), h = a.dim(1), w = a.dim(2);
  const int side = 2 * radius + 1;
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const T inv = T(1) / static_cast<T>(c);

  Tensor<T> out = Tensor<T>::zeros({side * side, h, w});
  const T* av = a.values().data();
  const T* bv = b.values().data();
  T* ov = out.impl()->data.data();
#pragma omp parallel for schedule(static)
  for (int d = 0; d < side * side; ++d) {
    const int dy = d / side - radius;
    const int dx = d % side - radius;
    T* op = ov + static_cast<std::size_t>(d) * plane;
    const int y0 = std::max(0, -dy), y1 = h - std::max(0, dy);
    const int x0 = std::max(0, -dx), x1 = w - std::max(0, dx);
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        T acc = T(0);
        for (int ci = 0; ci < c; ++ci) {
          acc += av[static_cast<std::size_t>(ci) * plane + static_cast<std::size_t>(y) * w + x] *
                 bv[static_cast<std::size_t>(ci) * plane + static_cast<std::size_t>(y + dy) * w +
                    (x + dx)];
        }
        op[static_cast<std::size_t>(y) * w + x] = acc * inv;
      }
    }
  }

  auto pa = a.impl();
  auto pb = b.impl();
  detail::attach(out, {a, b}, [pa, pb, c, h, w, radius, side, plane, inv](detail::Node<T>& self) {
    const bool needa = detail::wants_grad(pa);
    const bool needb = detail::wants_grad(pb);
    if (needa) pa->ensure_grad();
    if (needb) pb->ensure_grad();
    const T* g = self.grad.data();
    for (int d = 0; d < side * side; ++d) {
      const int dy = d / side - radius;
      const int dx = d % side - radius;
      const T* gp = g + static_cast<std::size_t>(d) * plane;
      const int y0 = std::max(0, -dy), y1 = h - std::max(0, dy);
      const int x0 = std::max(0, -dx), x1 = w - std::max(0, dx);
#pragma omp parallel for schedule(static)
      for (int ci = 0; ci < c; ++ci) {
        const T* ad = pa->data.data() + static_cast<std::size_t>(ci) * plane;
        const T* bd = pb->data.data() + static_cast<std::size_t>(ci) * plane;
        T* ag = needa ? pa->grad.data() + static_cast<std::size_t>(ci) * plane : nullptr;
        T* bg = needb ? pb->grad.data() + static_cast<std::size_t>(ci) * plane : nullptr;
        for (int y = y0; y < y1; ++y) {
          for (int x = x0; x < x1; ++x) {
            const T gv = gp[static_cast<std::size_t>(y) * w + x] * inv;
            const std::size_t ip = static_cast<std::size_t>(y) * w + x;
            const std::size_t iq = static_cast<std::size_t>(y + dy) * w + (x + dx);
            if (needa) ag[ip] += gv * bd[iq];
            if (needb) bg[iq] += gv * ad[ip];
          }
        }
      }
    }
  });
  return out;
}

/// Nearest-neighbor x2 spatial upsample followed by a stride-1 conv3d;
/// spatial dims double, band count is preserved.
template <typename T>
inline Tensor<T> conv3d_upsample(const Tensor<T>& x, const Tensor<T>& kernel,
                                 const Tensor<T>* bias, int factor = 2) {
  require(factor == 2, "conv3d_upsample: only factor 2 is supported");
  require(kernel.rank() == 5, "conv3d_upsample: kernel must be [Cout,Cin,KB,K,K]");
  const int kb = kernel.dim(2), ks = kernel.dim(3);
  Tensor<T> up = upsample_nearest2x(x);
  return conv3d(up, kernel, bias, 1, (kb - 1) / 2, (ks - 1) / 2);
}

template <typename T>
inline Tensor<T> conv3d_upsample(const Tensor<T>& x, const Tensor<T>& kernel,
                                 const Tensor<T>& bias, int factor = 2) {
  return conv3d_upsample(x, kernel, &bias, factor);
}

template <typename T>
inline Tensor<T> conv3d_upsample(const Tensor<T>& x, const Tensor<T>& kernel, int factor = 2) {
  return conv3d_upsample(x, kernel, static_cast<const Tensor<T>*>(nullptr), factor);
}

}  // namespace hsifuse
