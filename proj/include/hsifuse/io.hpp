#pragma once

// File formats:
//   HSIC  - magic "HSIC", version u32=1, B,H,W u32, wavelength count u32
//           (0 or B) + f32 labels, then f32 band-major payload. All fields
//           little-endian. Round-trips are bit-exact.
//   FLOW  - magic "FLOW", H,W u32, f32 dx plane, f32 dy plane.
//   PPM   - binary P6, maxval 255, byte = round_half_up(clamp(v,0,1)*255).
//   PGM   - binary P5, same quantization, one plane.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "hsifuse/image.hpp"

namespace hsifuse {

namespace detail {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts are unsupported");

inline void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), 4);
}

inline bool read_u32(std::istream& is, std::uint32_t& v) {
  is.read(reinterpret_cast<char*>(&v), 4);
  return is.gcount() == 4;
}

inline void write_f32(std::ostream& os, const float* p, std::size_t n) {
  os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * 4));
}

inline bool read_f32(std::istream& is, float* p, std::size_t n) {
  is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * 4));
  return static_cast<std::size_t>(is.gcount()) == n * 4;
}

inline std::uint8_t quantize8(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::floor(c * 255.0f + 0.5f));
}

}  // namespace detail

inline void write_cube(const HsiCube& cube, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError(IoError::Kind::open_failed, "write_cube: cannot open " + path);
  os.write("HSIC", 4);
  detail::write_u32(os, 1u);
  detail::write_u32(os, static_cast<std::uint32_t>(cube.bands));
  detail::write_u32(os, static_cast<std::uint32_t>(cube.height));
  detail::write_u32(os, static_cast<std::uint32_t>(cube.width));
  detail::write_u32(os, static_cast<std::uint32_t>(cube.wavelengths.size()));
  if (!cube.wavelengths.empty()) {
    detail::write_f32(os, cube.wavelengths.data(), cube.wavelengths.size());
  }
  detail::write_f32(os, cube.data.data(), cube.data.size());
  if (!os) throw IoError(IoError::Kind::open_failed, "write_cube: write failed for " + path);
}

inline HsiCube read_cube(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(IoError::Kind::open_failed, "read_cube: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (is.gcount() != 4 || std::memcmp(magic, "HSIC", 4) != 0) {
    throw IoError(IoError::Kind::bad_magic, "read_cube: bad magic in " + path);
  }
  std::uint32_t version, b, h, w, nwl;
  if (!detail::read_u32(is, version) || !detail::read_u32(is, b) || !detail::read_u32(is, h) ||
      !detail::read_u32(is, w) || !detail::read_u32(is, nwl)) {
    throw IoError(IoError::Kind::truncated, "read_cube: truncated header in " + path);
  }
  if (version != 1) throw IoError(IoError::Kind::bad_version, "read_cube: unsupported version");
  if (b < 1 || h < 1 || w < 1 || (nwl != 0 && nwl != b)) {
    throw IoError(IoError::Kind::malformed, "read_cube: malformed header in " + path);
  }
  HsiCube cube(static_cast<int>(b), static_cast<int>(h), static_cast<int>(w));
  if (nwl != 0) {
    cube.wavelengths.resize(nwl);
    if (!detail::read_f32(is, cube.wavelengths.data(), nwl)) {
      throw IoError(IoError::Kind::truncated, "read_cube: truncated wavelengths in " + path);
    }
  }
  if (!detail::read_f32(is, cube.data.data(), cube.data.size())) {
    throw IoError(IoError::Kind::truncated, "read_cube: truncated payload in " + path);
  }
  for (float v : cube.data) {
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw IoError(IoError::Kind::value_out_of_range, "read_cube: value outside [0,1] in " + path);
    }
  }
  return cube;
}

inline void write_flow(const FlowField& f, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError(IoError::Kind::open_failed, "write_flow: cannot open " + path);
  os.write("FLOW", 4);
  detail::write_u32(os, static_cast<std::uint32_t>(f.height));
  detail::write_u32(os, static_cast<std::uint32_t>(f.width));
  detail::write_f32(os, f.data.data(), f.data.size());
  if (!os) throw IoError(IoError::Kind::open_failed, "write_flow: write failed for " + path);
}

inline FlowField read_flow(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(IoError::Kind::open_failed, "read_flow: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (is.gcount() != 4 || std::memcmp(magic, "FLOW", 4) != 0) {
    throw IoError(IoError::Kind::bad_magic, "read_flow: bad magic in " + path);
  }
  std::uint32_t h, w;
  if (!detail::read_u32(is, h) || !detail::read_u32(is, w)) {
    throw IoError(IoError::Kind::truncated, "read_flow: truncated header in " + path);
  }
  if (h < 1 || w < 1) throw IoError(IoError::Kind::malformed, "read_flow: malformed header");
  FlowField f(static_cast<int>(h), static_cast<int>(w));
  if (!detail::read_f32(is, f.data.data(), f.data.size())) {
    throw IoError(IoError::Kind::truncated, "read_flow: truncated payload in " + path);
  }
  for (float v : f.data) {
    if (!std::isfinite(v)) {
      throw IoError(IoError::Kind::value_out_of_range, "read_flow: non-finite value in " + path);
    }
  }
  return f;
}

inline void export_ppm(const RgbImage& img, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError(IoError::Kind::open_failed, "export_ppm: cannot open " + path);
  os << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<std::uint8_t> row(static_cast<std::size_t>(img.width) * 3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) row[x * 3 + c] = detail::quantize8(img.at(c, y, x));
    }
    os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!os) throw IoError(IoError::Kind::open_failed, "export_ppm: write failed for " + path);
}

namespace detail {
inline int pnm_next_token(std::istream& is) {
  // Skips whitespace and '#' comments, returns next integer.
  int c = is.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = is.get();
    } else if (std::isspace(c)) {
      c = is.get();
    } else {
      break;
    }
  }
  if (c == EOF) throw IoError(IoError::Kind::truncated, "pnm: truncated header");
  int v = 0;
  bool digits = false;
  while (c != EOF && std::isdigit(c)) {
    v = v * 10 + (c - '0');
    digits = true;
    c = is.get();
  }
  if (!digits) throw IoError(IoError::Kind::malformed, "pnm: malformed header");
  return v;
}
}  // namespace detail

inline RgbImage read_ppm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(IoError::Kind::open_failed, "read_ppm: cannot open " + path);
  char m0 = 0, m1 = 0;
  is.get(m0);
  is.get(m1);
  if (m0 != 'P' || m1 != '6') throw IoError(IoError::Kind::bad_magic, "read_ppm: not a P6 file");
  const int w = detail::pnm_next_token(is);
  const int h = detail::pnm_next_token(is);
  const int maxval = detail::pnm_next_token(is);
  if (w < 1 || h < 1 || maxval != 255) {
    throw IoError(IoError::Kind::malformed, "read_ppm: unsupported header");
  }
  RgbImage img(h, w);
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(w) * h * 3);
  is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(is.gcount()) != buf.size()) {
    throw IoError(IoError::Kind::truncated, "read_ppm: truncated payload");
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        img.at(c, y, x) = buf[(static_cast<std::size_t>(y) * w + x) * 3 + c] / 255.0f;
      }
    }
  }
  return img;
}

/// Writes a single plane (values in [0,1]) as binary PGM (P5).
inline void export_pgm(const float* plane, int h, int w, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError(IoError::Kind::open_failed, "export_pgm: cannot open " + path);
  os << "P5\n" << w << " " << h << "\n255\n";
  std::vector<std::uint8_t> row(static_cast<std::size_t>(w));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) row[x] = detail::quantize8(plane[static_cast<std::size_t>(y) * w + x]);
    os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!os) throw IoError(IoError::Kind::open_failed, "export_pgm: write failed for " + path);
}

/// Renders a flow field with the standard optical-flow color wheel
/// (Middlebury convention: hue encodes direction, saturation magnitude).
/// Magnitudes are normalized by `max_mag`, or by the field maximum when
/// `max_mag` <= 0.
inline RgbImage flow_to_color(const FlowField& f, float max_mag = -1.0f) {
  constexpr int RY = 15, YG = 6, GC = 4, CB = 11, BM = 13, MR = 6;
  constexpr int NCOLS = RY + YG + GC + CB + BM + MR;
  static const auto wheel = [] {
    std::array<std::array<float, 3>, NCOLS> w{};
    int k = 0;
    for (int i = 0; i < RY; ++i, ++k) w[k] = {1.0f, static_cast<float>(i) / RY, 0.0f};
    for (int i = 0; i < YG; ++i, ++k) w[k] = {1.0f - static_cast<float>(i) / YG, 1.0f, 0.0f};
    for (int i = 0; i < GC; ++i, ++k) w[k] = {0.0f, 1.0f, static_cast<float>(i) / GC};
    for (int i = 0; i < CB; ++i, ++k) w[k] = {0.0f, 1.0f - static_cast<float>(i) / CB, 1.0f};
    for (int i = 0; i < BM; ++i, ++k) w[k] = {static_cast<float>(i) / BM, 0.0f, 1.0f};
    for (int i = 0; i < MR; ++i, ++k) w[k] = {1.0f, 0.0f, 1.0f - static_cast<float>(i) / MR};
    return w;
  }();

  float norm = max_mag;
  if (norm <= 0.0f) {
    for (int y = 0; y < f.height; ++y) {
      for (int x = 0; x < f.width; ++x) {
        norm = std::max(norm, std::hypot(f.dx(y, x), f.dy(y, x)));
      }
    }
    if (norm <= 0.0f) norm = 1.0f;
  }

  RgbImage img(f.height, f.width);
  for (int y = 0; y < f.height; ++y) {
    for (int x = 0; x < f.width; ++x) {
      const float u = f.dx(y, x) / norm, v = f.dy(y, x) / norm;
      const float rad = std::min(1.0f, std::hypot(u, v));
      const float a = std::atan2(-v, -u) / 3.14159265358979323846f;
      const float fk = (a + 1.0f) / 2.0f * (NCOLS - 1);
      const int k0 = static_cast<int>(fk);
      const int k1 = (k0 + 1) % NCOLS;
      const float frac = fk - k0;
      for (int c = 0; c < 3; ++c) {
        float col = (1.0f - frac) * wheel[k0][c] + frac * wheel[k1][c];
        col = 1.0f - rad * (1.0f - col);
        img.at(c, y, x) = col;
      }
    }
  }
  return img;
}

}  // namespace hsifuse
