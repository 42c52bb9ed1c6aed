#pragma once

#include <cstddef>
#include <vector>

#include "hsifuse/errors.hpp"
#include "hsifuse/tensor.hpp"

namespace hsifuse {

/// B-band spectral cube, band-major f32 in [0,1]. Wavelength labels (nm)
/// are optional; when present there is one per band.
struct HsiCube {
  int bands = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;          // [B][H][W]
  std::vector<float> wavelengths;   // empty or size B

  HsiCube() = default;
  HsiCube(int b, int h, int w) : bands(b), height(h), width(w) {
    require(b >= 1 && h >= 1 && w >= 1, "HsiCube: dims must be positive");
    data.assign(static_cast<std::size_t>(b) * h * w, 0.0f);
  }

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  float& at(int b, int y, int x) { return data[(static_cast<std::size_t>(b) * height + y) * width + x]; }
  float at(int b, int y, int x) const {
    return data[(static_cast<std::size_t>(b) * height + y) * width + x];
  }
  const float* band(int b) const { return data.data() + static_cast<std::size_t>(b) * plane(); }
  float* band(int b) { return data.data() + static_cast<std::size_t>(b) * plane(); }
};

/// 3-channel image, channel-major f32 in [0,1].
struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<float> data;  // [3][H][W]

  RgbImage() = default;
  RgbImage(int h, int w) : height(h), width(w) {
    require(h >= 1 && w >= 1, "RgbImage: dims must be positive");
    data.assign(3 * static_cast<std::size_t>(h) * w, 0.0f);
  }

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  float& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
  float at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
};

/// Per-pixel displacement map: plane 0 holds dx, plane 1 dy, in pixels at
/// the field's own resolution.
struct FlowField {
  int height = 0;
  int width = 0;
  std::vector<float> data;  // [2][H][W]

  FlowField() = default;
  FlowField(int h, int w) : height(h), width(w) {
    require(h >= 1 && w >= 1, "FlowField: dims must be positive");
    data.assign(2 * static_cast<std::size_t>(h) * w, 0.0f);
  }

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  float& dx(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
  float dx(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
  float& dy(int y, int x) { return data[plane() + static_cast<std::size_t>(y) * width + x]; }
  float dy(int y, int x) const { return data[plane() + static_cast<std::size_t>(y) * width + x]; }
};

namespace detail {

inline float bilinear_clamped(const float* plane, int h, int w, double sx, double sy) {
  sx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
  sy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
  int ix = std::min(static_cast<int>(sx), w > 1 ? w - 2 : 0);
  int iy = std::min(static_cast<int>(sy), h > 1 ? h - 2 : 0);
  const double fx = sx - ix, fy = sy - iy;
  const int x1 = w > 1 ? 1 : 0, y1 = h > 1 ? w : 0;
  const double v00 = plane[static_cast<std::size_t>(iy) * w + ix];
  const double v01 = plane[static_cast<std::size_t>(iy) * w + ix + x1];
  const double v10 = plane[static_cast<std::size_t>(iy) * w + ix + y1];
  const double v11 = plane[static_cast<std::size_t>(iy) * w + ix + y1 + x1];
  return static_cast<float>((1 - fx) * (1 - fy) * v00 + fx * (1 - fy) * v01 +
                            (1 - fx) * fy * v10 + fx * fy * v11);
}

}  // namespace detail

// --- tensor conversions ------------------------------------------------------

template <typename T>
inline Tensor<T> cube_to_tensor(const HsiCube& c) {
  std::vector<T> v(c.data.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<T>(c.data[i]);
  return Tensor<T>::from_values({1, c.bands, c.height, c.width}, std::move(v));
}

template <typename T>
inline HsiCube tensor_to_cube(const Tensor<T>& t) {
  require(t.rank() == 4 && t.dim(0) == 1, "tensor_to_cube: expected [1,B,H,W]");
  HsiCube c(t.dim(1), t.dim(2), t.dim(3));
  for (std::size_t i = 0; i < c.data.size(); ++i) {
    const float v = static_cast<float>(t.values()[i]);
    c.data[i] = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
  }
  return c;
}

template <typename T>
inline Tensor<T> rgb_to_tensor(const RgbImage& img) {
  std::vector<T> v(img.data.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<T>(img.data[i]);
  return Tensor<T>::from_values({3, img.height, img.width}, std::move(v));
}

template <typename T>
inline RgbImage tensor_to_rgb(const Tensor<T>& t) {
  require(t.rank() == 3 && t.dim(0) == 3, "tensor_to_rgb: expected [3,H,W]");
  RgbImage img(t.dim(1), t.dim(2));
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    const float v = static_cast<float>(t.values()[i]);
    img.data[i] = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
  }
  return img;
}

template <typename T>
inline Tensor<T> flow_to_tensor(const FlowField& f) {
  std::vector<T> v(f.data.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<T>(f.data[i]);
  return Tensor<T>::from_values({2, f.height, f.width}, std::move(v));
}

template <typename T>
inline FlowField tensor_to_flow(const Tensor<T>& t) {
  require(t.rank() == 3 && t.dim(0) == 2, "tensor_to_flow: expected [2,H,W]");
  FlowField f(t.dim(1), t.dim(2));
  for (std::size_t i = 0; i < f.data.size(); ++i) f.data[i] = static_cast<float>(t.values()[i]);
  return f;
}

}  // namespace hsifuse
