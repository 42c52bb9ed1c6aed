#pragma once

#include <algorithm>
#include <cstddef>

#include "hsifuse/tensor.hpp"

namespace hsifuse {

namespace detail {

// Convolutions accumulate per output element in a fixed order (kernel taps
// fused innermost, channels outer). Parallel loops split work so that each
// output element is produced by exactly one thread, which keeps results
// bitwise identical regardless of thread count. Row helpers fuse the kx
// taps into one pass so each output element costs one load/store.

// y[ox] += sum_kx k[kx] * x[ox + kx - pad], stride 1. x has w valid
// samples; out-of-range taps contribute nothing.
template <typename T>
inline void row_taps_axpy(T* __restrict y, const T* __restrict x, const T* __restrict k, int ksz,
                          int pad, int w, int ow) {
  const int lo = std::min(std::max(0, pad), ow);
  const int hi = std::max(lo, std::min(ow, w - ksz + pad + 1));
  auto edge = [&](int ox0, int ox1) {
    for (int ox = ox0; ox < ox1; ++ox) {
      T acc = T(0);
      for (int kx = 0; kx < ksz; ++kx) {
        const int ix = ox + kx - pad;
        if (ix >= 0 && ix < w) acc += k[kx] * x[ix];
      }
      y[ox] += acc;
    }
  };
  edge(0, lo);
  const T* xs = x - pad;
  if (ksz == 3) {
    const T k0 = k[0], k1 = k[1], k2 = k[2];
#pragma omp simd
    for (int ox = lo; ox < hi; ++ox) {
      y[ox] += k0 * xs[ox] + k1 * xs[ox + 1] + k2 * xs[ox + 2];
    }
  } else if (ksz == 5) {
    const T k0 = k[0], k1 = k[1], k2 = k[2], k3 = k[3], k4 = k[4];
#pragma omp simd
    for (int ox = lo; ox < hi; ++ox) {
      y[ox] += k0 * xs[ox] + k1 * xs[ox + 1] + k2 * xs[ox + 2] + k3 * xs[ox + 3] + k4 * xs[ox + 4];
    }
  } else if (ksz == 1) {
    const T k0 = k[0];
#pragma omp simd
    for (int ox = lo; ox < hi; ++ox) y[ox] += k0 * xs[ox];
  } else {
    for (int ox = lo; ox < hi; ++ox) {
      T acc = T(0);
      for (int kx = 0; kx < ksz; ++kx) acc += k[kx] * xs[ox + kx];
      y[ox] += acc;
    }
  }
  edge(hi, ow);
}

// acc[kx] += sum_ox gy[ox] * x[ox + kx - pad], stride 1.
template <typename T>
inline void row_taps_dot(const T* __restrict gy, const T* __restrict x, T* __restrict acc,
                         int ksz, int pad, int w, int ow) {
  const int lo = std::min(std::max(0, pad), ow);
  const int hi = std::max(lo, std::min(ow, w - ksz + pad + 1));
  auto edge = [&](int ox0, int ox1) {
    for (int ox = ox0; ox < ox1; ++ox) {
      for (int kx = 0; kx < ksz; ++kx) {
        const int ix = ox + kx - pad;
        if (ix >= 0 && ix < w) acc[kx] += gy[ox] * x[ix];
      }
    }
  };
  edge(0, lo);
  const T* xs = x - pad;
  if (ksz == 3) {
    T a0 = T(0), a1 = T(0), a2 = T(0);
#pragma omp simd reduction(+ : a0, a1, a2)
    for (int ox = lo; ox < hi; ++ox) {
      const T g = gy[ox];
      a0 += g * xs[ox];
      a1 += g * xs[ox + 1];
      a2 += g * xs[ox + 2];
    }
    acc[0] += a0;
    acc[1] += a1;
    acc[2] += a2;
  } else if (ksz == 5) {
    T a0 = T(0), a1 = T(0), a2 = T(0), a3 = T(0), a4 = T(0);
#pragma omp simd reduction(+ : a0, a1, a2, a3, a4)
    for (int ox = lo; ox < hi; ++ox) {
      const T g = gy[ox];
      a0 += g * xs[ox];
      a1 += g * xs[ox + 1];
      a2 += g * xs[ox + 2];
      a3 += g * xs[ox + 3];
      a4 += g * xs[ox + 4];
    }
    acc[0] += a0;
    acc[1] += a1;
    acc[2] += a2;
    acc[3] += a3;
    acc[4] += a4;
  } else {
    for (int kx = 0; kx < ksz; ++kx) {
      T a = T(0);
#pragma omp simd reduction(+ : a)
      for (int ox = lo; ox < hi; ++ox) a += gy[ox] * xs[ox + kx];
      acc[kx] += a;
    }
  }
  edge(hi, ow);
}

// strided variants (stride 2), kept simple: per-tap passes.
template <typename T>
inline void row_taps_axpy_strided(T* y, const T* x, const T* k, int ksz, int pad, int stride,
                                  int w, int ow) {
  for (int ox = 0; ox < ow; ++ox) {
    T acc = T(0);
    const int base = ox * stride - pad;
    for (int kx = 0; kx < ksz; ++kx) {
      const int ix = base + kx;
      if (ix >= 0 && ix < w) acc += k[kx] * x[ix];
    }
    y[ox] += acc;
  }
}

template <typename T>
inline void row_taps_dot_strided(const T* gy, const T* x, T* acc, int ksz, int pad, int stride,
                                 int w, int ow) {
  for (int ox = 0; ox < ow; ++ox) {
    const int base = ox * stride - pad;
    for (int kx = 0; kx < ksz; ++kx) {
      const int ix = base + kx;
      if (ix >= 0 && ix < w) acc[kx] += gy[ox] * x[ix];
    }
  }
}

template <typename T>
void conv2d_forward(const T* x, const T* k, const T* bias, T* y, int cin, int h, int w, int cout,
                    int ksz, int stride, int pad, int oh, int ow) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int oc = 0; oc < cout; ++oc) {
    for (int oy = 0; oy < oh; ++oy) {
      T* yr = y + (static_cast<std::size_t>(oc) * oh + oy) * ow;
      const T bv = bias ? bias[oc] : T(0);
      for (int ox = 0; ox < ow; ++ox) yr[ox] = bv;
      for (int ic = 0; ic < cin; ++ic) {
        const T* xc = x + static_cast<std::size_t>(ic) * h * w;
        const T* kc = k + (static_cast<std::size_t>(oc) * cin + ic) * ksz * ksz;
        for (int ky = 0; ky < ksz; ++ky) {
          const int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= h) continue;
          const T* xr = xc + static_cast<std::size_t>(iy) * w;
          if (stride == 1) {
            row_taps_axpy(yr, xr, kc + ky * ksz, ksz, pad, w, ow);
          } else {
            row_taps_axpy_strided(yr, xr, kc + ky * ksz, ksz, pad, stride, w, ow);
          }
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward_input(const T* gy, const T* k, T* gx, int cin, int h, int w, int cout,
                           int ksz, int stride, int pad, int oh, int ow) {
  // gather form: each (ic, iy) input row is owned by one thread; for
  // stride 1 the gather is a correlation with the reversed kernel row
#pragma omp parallel for collapse(2) schedule(static)
  for (int ic = 0; ic < cin; ++ic) {
    for (int iy = 0; iy < h; ++iy) {
      T* gxr = gx + (static_cast<std::size_t>(ic) * h + iy) * w;
      for (int oc = 0; oc < cout; ++oc) {
        const T* gyc = gy + static_cast<std::size_t>(oc) * oh * ow;
        const T* kc = k + (static_cast<std::size_t>(oc) * cin + ic) * ksz * ksz;
        for (int ky = 0; ky < ksz; ++ky) {
          const int num = iy - ky + pad;
          if (num < 0 || num % stride != 0) continue;
          const int oy = num / stride;
          if (oy >= oh) continue;
          const T* gyr = gyc + static_cast<std::size_t>(oy) * ow;
          if (stride == 1) {
            T krev[16];
            for (int kx = 0; kx < ksz; ++kx) krev[kx] = kc[ky * ksz + (ksz - 1 - kx)];
            row_taps_axpy(gxr, gyr, krev, ksz, ksz - 1 - pad, ow, w);
          } else {
            for (int kx = 0; kx < ksz; ++kx) {
              const T wv = kc[ky * ksz + kx];
              const int dx = kx - pad;
              int ox0 = 0, ox1 = ow;
              if (dx < 0) ox0 = (-dx + stride - 1) / stride;
              while (ox1 > ox0 && (ox1 - 1) * stride + dx >= w) --ox1;
              for (int ox = ox0; ox < ox1; ++ox) gxr[ox * stride + dx] += wv * gyr[ox];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward_kernel(const T* gy, const T* x, T* gk, int cin, int h, int w, int cout,
                            int ksz, int stride, int pad, int oh, int ow) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int oc = 0; oc < cout; ++oc) {
    for (int ic = 0; ic < cin; ++ic) {
      const T* gyc = gy + static_cast<std::size_t>(oc) * oh * ow;
      const T* xc = x + static_cast<std::size_t>(ic) * h * w;
      T* gkc = gk + (static_cast<std::size_t>(oc) * cin + ic) * ksz * ksz;
      for (int ky = 0; ky < ksz; ++ky) {
        T acc[16] = {};
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= h) continue;
          const T* xr = xc + static_cast<std::size_t>(iy) * w;
          const T* gyr = gyc + static_cast<std::size_t>(oy) * ow;
          if (stride == 1) {
            row_taps_dot(gyr, xr, acc, ksz, pad, w, ow);
          } else {
            row_taps_dot_strided(gyr, xr, acc, ksz, pad, stride, w, ow);
          }
        }
        for (int kx = 0; kx < ksz; ++kx) gkc[ky * ksz + kx] += acc[kx];
      }
    }
  }
}

}  // namespace detail

/// 2D convolution: x [Cin,H,W], kernel [Cout,Cin,K,K], optional bias [Cout].
/// Output is [Cout,H',W'] with H' = floor((H + 2 pad - K) / stride) + 1.
template <typename T>
inline Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>* bias,
                        int stride, int pad) {
  require(x.rank() == 3, "conv2d: input must be [C,H,W]");
  require(kernel.rank() == 4, "conv2d: kernel must be [Cout,Cin,K,K]");
  const int cin = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int cout = kernel.dim(0), ksz = kernel.dim(2);
  require(kernel.dim(1) == cin, "conv2d: kernel Cin does not match input channels");
  require(kernel.dim(3) == ksz, "conv2d: kernel must be square");
  require(ksz % 2 == 1, "conv2d: kernel size must be odd");
  require(ksz <= 15, "conv2d: kernel size must be <= 15");
  require(stride == 1 || stride == 2, "conv2d: stride must be 1 or 2");
  require(pad >= 0, "conv2d: padding must be nonnegative");
  if (bias) {
    require(bias->rank() == 1 && bias->dim(0) == cout, "conv2d: bias must be [Cout]");
  }
  const int oh = (h + 2 * pad - ksz) / stride + 1;
  const int ow = (w + 2 * pad - ksz) / stride + 1;
  require(oh >= 1 && ow >= 1 && h + 2 * pad >= ksz && w + 2 * pad >= ksz,
          "conv2d: kernel larger than padded input");

  Tensor<T> out = Tensor<T>::zeros({cout, oh, ow});
  detail::conv2d_forward(x.values().data(), kernel.values().data(),
                         bias ? bias->values().data() : nullptr, out.impl()->data.data(), cin, h,
                         w, cout, ksz, stride, pad, oh, ow);

  auto px = x.impl();
  auto pk = kernel.impl();
  std::shared_ptr<detail::Node<T>> pb = bias ? bias->impl() : nullptr;
  auto bwd = [px, pk, pb, cin, h, w, cout, ksz, stride, pad, oh, ow](detail::Node<T>& self) {
    if (detail::wants_grad(pk)) {
      pk->ensure_grad();
      detail::conv2d_backward_kernel(self.grad.data(), px->data.data(), pk->grad.data(), cin, h,
                                     w, cout, ksz, stride, pad, oh, ow);
    }
    if (detail::wants_grad(px)) {
      px->ensure_grad();
      detail::conv2d_backward_input(self.grad.data(), pk->data.data(), px->grad.data(), cin, h, w,
                                    cout, ksz, stride, pad, oh, ow);
    }
    if (pb && detail::wants_grad(pb)) {
      pb->ensure_grad();
      for (int oc = 0; oc < cout; ++oc) {
        const T* g = self.grad.data() + static_cast<std::size_t>(oc) * oh * ow;
        T acc = T(0);
#pragma omp simd reduction(+ : acc)
        for (std::size_t i = 0; i < static_cast<std::size_t>(oh) * ow; ++i) acc += g[i];
        pb->grad[oc] += acc;
      }
    }
  };
  if (bias) {
    detail::attach(out, {x, kernel, *bias}, bwd);
  } else {
    detail::attach(out, {x, kernel}, bwd);
  }
  return out;
}

template <typename T>
inline Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernel, int stride, int pad) {
  return conv2d(x, kernel, static_cast<const Tensor<T>*>(nullptr), stride, pad);
}

template <typename T>
inline Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias,
                        int stride, int pad) {
  return conv2d(x, kernel, &bias, stride, pad);
}

namespace detail {

template <typename T>
void conv3d_forward(const T* x, const T* k, const T* bias, T* y, int cin, int nb, int h, int w,
                    int cout, int kb, int ks, int stride, int pad_b, int pad_s, int oh, int ow) {
  const std::size_t xplane = static_cast<std::size_t>(h) * w;
  const std::size_t yplane = static_cast<std::size_t>(oh) * ow;
#pragma omp parallel for collapse(2) schedule(static)
  for (int oc = 0; oc < cout; ++oc) {
    for (int ob = 0; ob < nb; ++ob) {
      T* yb = y + (static_cast<std::size_t>(oc) * nb + ob) * yplane;
      const T bv = bias ? bias[oc] : T(0);
      for (std::size_t i = 0; i < yplane; ++i) yb[i] = bv;
      for (int ic = 0; ic < cin; ++ic) {
        const T* xc = x + static_cast<std::size_t>(ic) * nb * xplane;
        const T* kc = k + ((static_cast<std::size_t>(oc) * cin + ic) * kb) * ks * ks;
        for (int fb = 0; fb < kb; ++fb) {
          const int ib = ob + fb - pad_b;
          if (ib < 0 || ib >= nb) continue;
          const T* xb = xc + static_cast<std::size_t>(ib) * xplane;
          const T* kplane = kc + static_cast<std::size_t>(fb) * ks * ks;
          for (int oy = 0; oy < oh; ++oy) {
            T* yr = yb + static_cast<std::size_t>(oy) * ow;
            for (int ky = 0; ky < ks; ++ky) {
              const int iy = oy * stride + ky - pad_s;
              if (iy < 0 || iy >= h) continue;
              const T* xr = xb + static_cast<std::size_t>(iy) * w;
              if (stride == 1) {
                row_taps_axpy(yr, xr, kplane + ky * ks, ks, pad_s, w, ow);
              } else {
                row_taps_axpy_strided(yr, xr, kplane + ky * ks, ks, pad_s, stride, w, ow);
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
void conv3d_backward_input(const T* gy, const T* k, T* gx, int cin, int nb, int h, int w,
                           int cout, int kb, int ks, int stride, int pad_b, int pad_s, int oh,
                           int ow) {
  const std::size_t xplane = static_cast<std::size_t>(h) * w;
  const std::size_t yplane = static_cast<std::size_t>(oh) * ow;
#pragma omp parallel for collapse(2) schedule(static)
  for (int ic = 0; ic < cin; ++ic) {
    for (int ib = 0; ib < nb; ++ib) {
      T* gxb = gx + (static_cast<std::size_t>(ic) * nb + ib) * xplane;
      for (int oc = 0; oc < cout; ++oc) {
        const T* kc = k + ((static_cast<std::size_t>(oc) * cin + ic) * kb) * ks * ks;
        for (int fb = 0; fb < kb; ++fb) {
          const int ob = ib - fb + pad_b;
          if (ob < 0 || ob >= nb) continue;
          const T* gyb = gy + (static_cast<std::size_t>(oc) * nb + ob) * yplane;
          const T* kplane = kc + static_cast<std::size_t>(fb) * ks * ks;
          if (stride == 1) {
            for (int iy = 0; iy < h; ++iy) {
              T* gxr = gxb + static_cast<std::size_t>(iy) * w;
              for (int ky = 0; ky < ks; ++ky) {
                const int oy = iy - ky + pad_s;
                if (oy < 0 || oy >= oh) continue;
                const T* gyr = gyb + static_cast<std::size_t>(oy) * ow;
                T krev[16];
                for (int kx = 0; kx < ks; ++kx) krev[kx] = kplane[ky * ks + (ks - 1 - kx)];
                row_taps_axpy(gxr, gyr, krev, ks, ks - 1 - pad_s, ow, w);
              }
            }
          } else {
            for (int oy = 0; oy < oh; ++oy) {
              const T* gyr = gyb + static_cast<std::size_t>(oy) * ow;
              for (int ky = 0; ky < ks; ++ky) {
                const int iy = oy * stride + ky - pad_s;
                if (iy < 0 || iy >= h) continue;
                T* gxr = gxb + static_cast<std::size_t>(iy) * w;
                for (int kx = 0; kx < ks; ++kx) {
                  const T wv = kplane[ky * ks + kx];
                  const int dx = kx - pad_s;
                  int ox0 = 0, ox1 = ow;
                  if (dx < 0) ox0 = (-dx + stride - 1) / stride;
                  while (ox1 > ox0 && (ox1 - 1) * stride + dx >= w) --ox1;
                  for (int ox = ox0; ox < ox1; ++ox) gxr[ox * stride + dx] += wv * gyr[ox];
                }
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
void conv3d_backward_kernel(const T* gy, const T* x, T* gk, int cin, int nb, int h, int w,
                            int cout, int kb, int ks, int stride, int pad_b, int pad_s, int oh,
                            int ow) {
  const std::size_t xplane = static_cast<std::size_t>(h) * w;
  const std::size_t yplane = static_cast<std::size_t>(oh) * ow;
#pragma omp parallel for collapse(2) schedule(static)
  for (int oc = 0; oc < cout; ++oc) {
    for (int ic = 0; ic < cin; ++ic) {
      const T* gyc = gy + static_cast<std::size_t>(oc) * nb * yplane;
      const T* xc = x + static_cast<std::size_t>(ic) * nb * xplane;
      T* gkc = gk + ((static_cast<std::size_t>(oc) * cin + ic) * kb) * ks * ks;
      for (int fb = 0; fb < kb; ++fb) {
        for (int ky = 0; ky < ks; ++ky) {
          T acc[16] = {};
          for (int ob = 0; ob < nb; ++ob) {
            const int ib = ob + fb - pad_b;
            if (ib < 0 || ib >= nb) continue;
            const T* xb = xc + static_cast<std::size_t>(ib) * xplane;
            const T* gyb = gyc + static_cast<std::size_t>(ob) * yplane;
            for (int oy = 0; oy < oh; ++oy) {
              const int iy = oy * stride + ky - pad_s;
              if (iy < 0 || iy >= h) continue;
              const T* xr = xb + static_cast<std::size_t>(iy) * w;
              const T* gyr = gyb + static_cast<std::size_t>(oy) * ow;
              if (stride == 1) {
                row_taps_dot(gyr, xr, acc, ks, pad_s, w, ow);
              } else {
                row_taps_dot_strided(gyr, xr, acc, ks, pad_s, stride, w, ow);
              }
            }
          }
          for (int kx = 0; kx < ks; ++kx) {
            gkc[(static_cast<std::size_t>(fb) * ks + ky) * ks + kx] += acc[kx];
          }
        }
      }
    }
  }
}

}  // namespace detail

/// 3D convolution over a banded volume: x [Cin,B,H,W], kernel
/// [Cout,Cin,KB,K,K]. The band axis always has stride 1 and padding
/// (KB-1)/2 so the band count is preserved; the spatial stride may be 1 or 2.
template <typename T>
inline Tensor<T> conv3d(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>* bias,
                        int stride_spatial, int pad_band, int pad_spatial) {
  require(x.rank() == 4, "conv3d: input must be [C,B,H,W]");
  require(kernel.rank() == 5, "conv3d: kernel must be [Cout,Cin,KB,K,K]");
  const int cin = x.dim(0), nb = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int cout = kernel.dim(0), kb = kernel.dim(2), ks = kernel.dim(3);
  require(kernel.dim(1) == cin, "conv3d: kernel Cin does not match input channels");
  require(kernel.dim(4) == ks, "conv3d: kernel must be spatially square");
  require(kb % 2 == 1 && ks % 2 == 1, "conv3d: kernel extents must be odd");
  require(ks <= 15, "conv3d: kernel size must be <= 15");
  require(pad_band == (kb - 1) / 2, "conv3d: band padding must equal (KB-1)/2");
  require(stride_spatial == 1 || stride_spatial == 2, "conv3d: spatial stride must be 1 or 2");
  require(pad_spatial >= 0, "conv3d: padding must be nonnegative");
  if (bias) {
    require(bias->rank() == 1 && bias->dim(0) == cout, "conv3d: bias must be [Cout]");
  }
  const int oh = (h + 2 * pad_spatial - ks) / stride_spatial + 1;
  const int ow = (w + 2 * pad_spatial - ks) / stride_spatial + 1;
  require(oh >= 1 && ow >= 1 && h + 2 * pad_spatial >= ks && w + 2 * pad_spatial >= ks,
          "conv3d: kernel larger than padded input");

  Tensor<T> out = Tensor<T>::zeros({cout, nb, oh, ow});
  detail::conv3d_forward(x.values().data(), kernel.values().data(),
                         bias ? bias->values().data() : nullptr, out.impl()->data.data(), cin, nb,
                         h, w, cout, kb, ks, stride_spatial, pad_band, pad_spatial, oh, ow);

  auto px = x.impl();
  auto pk = kernel.impl();
  std::shared_ptr<detail::Node<T>> pb = bias ? bias->impl() : nullptr;
  auto bwd = [px, pk, pb, cin, nb, h, w, cout, kb, ks, stride_spatial, pad_band, pad_spatial, oh,
              ow](detail::Node<T>& self) {
    if (detail::wants_grad(pk)) {
      pk->ensure_grad();
      detail::conv3d_backward_kernel(self.grad.data(), px->data.data(), pk->grad.data(), cin, nb,
                                     h, w, cout, kb, ks, stride_spatial, pad_band, pad_spatial,
                                     oh, ow);
    }
    if (detail::wants_grad(px)) {
      px->ensure_grad();
      detail::conv3d_backward_input(self.grad.data(), pk->data.data(), px->grad.data(), cin, nb,
                                    h, w, cout, kb, ks, stride_spatial, pad_band, pad_spatial, oh,
                                    ow);
    }
    if (pb && detail::wants_grad(pb)) {
      pb->ensure_grad();
      const std::size_t plane = static_cast<std::size_t>(nb) * oh * ow;
      for (int oc = 0; oc < cout; ++oc) {
        const T* g = self.grad.data() + static_cast<std::size_t>(oc) * plane;
        T acc = T(0);
#pragma omp simd reduction(+ : acc)
        for (std::size_t i = 0; i < plane; ++i) acc += g[i];
        pb->grad[oc] += acc;
      }
    }
  };
  if (bias) {
    detail::attach(out, {x, kernel, *bias}, bwd);
  } else {
    detail::attach(out, {x, kernel}, bwd);
  }
  return out;
}

template <typename T>
inline Tensor<T> conv3d(const Tensor<T>& x, const Tensor<T>& kernel, int stride_spatial,
                        int pad_band, int pad_spatial) {
  return conv3d(x, kernel, static_cast<const Tensor<T>*>(nullptr), stride_spatial, pad_band,
                pad_spatial);
}

template <typename T>
inline Tensor<T> conv3d(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias,
                        int stride_spatial, int pad_band, int pad_spatial) {
  return conv3d(x, kernel, &bias, stride_spatial, pad_band, pad_spatial);
}

}  // namespace hsifuse
