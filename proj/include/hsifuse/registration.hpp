#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "hsifuse/image.hpp"
#include "hsifuse/rng.hpp"

namespace hsifuse {

/// 2x3 affine (a b tx; c d ty) mapping source pixel coords to target coords.
struct Affine2D {
  double a = 1, b = 0, tx = 0;
  double c = 0, d = 1, ty = 0;

  static Affine2D identity() { return {}; }

  double det() const { return a * d - b * c; }

  void apply(double x, double y, double& ox, double& oy) const {
    ox = a * x + b * y + tx;
    oy = c * x + d * y + ty;
  }

  Affine2D inverse() const {
    const double dt = det();
    require(std::abs(dt) > 1e-12, "Affine2D: matrix is singular");
    Affine2D inv;
    inv.a = d / dt;
    inv.b = -b / dt;
    inv.c = -c / dt;
    inv.d = a / dt;
    inv.tx = -(inv.a * tx + inv.b * ty);
    inv.ty = -(inv.c * tx + inv.d * ty);
    return inv;
  }
};

struct Point2 {
  double x = 0, y = 0;
};

struct Correspondence {
  Point2 src;
  Point2 dst;
  double score = 0;
};

namespace detail {

inline std::vector<float> to_gray(const RgbImage& img) {
  std::vector<float> g(img.plane());
  const std::size_t p = img.plane();
  for (std::size_t i = 0; i < p; ++i) {
    g[i] = (img.data[i] + img.data[p + i] + img.data[2 * p + i]) / 3.0f;
  }
  return g;
}

}  // namespace detail

struct HarrisOptions {
  double k = 0.04;
  int nms_radius = 4;
  int border = 8;
  double rel_threshold = 1e-4;  // relative to the max response
};

/// Harris corner detection with non-max suppression; returns at most max_n
/// points ordered by decreasing response (ties broken by y then x).
inline std::vector<Point2> detect_corners(const RgbImage& img, int max_n,
                                          const HarrisOptions& opt = {}) {
  const int h = img.height, w = img.width;
  const auto gray = detail::to_gray(img);
  std::vector<double> ix(gray.size(), 0.0), iy(gray.size(), 0.0);
  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 1; x + 1 < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      ix[i] = 0.5 * (gray[i + 1] - gray[i - 1]);
      iy[i] = 0.5 * (gray[i + w] - gray[i - w]);
    }
  }
  // structure tensor smoothed with a 5x5 Gaussian (sigma 1)
  std::array<double, 5> g1;
  {
    double s = 0;
    for (int i = 0; i < 5; ++i) {
      g1[i] = std::exp(-(i - 2.0) * (i - 2.0) / 2.0);
      s += g1[i];
    }
    for (auto& v : g1) v /= s;
  }
  auto smooth = [&](const std::vector<double>& in) {
    std::vector<double> t(in.size(), 0.0), out(in.size(), 0.0);
    for (int y = 0; y < h; ++y) {
      for (int x = 2; x + 2 < w; ++x) {
        double acc = 0;
        for (int k = -2; k <= 2; ++k) acc += g1[k + 2] * in[static_cast<std::size_t>(y) * w + x + k];
        t[static_cast<std::size_t>(y) * w + x] = acc;
      }
    }
    for (int y = 2; y + 2 < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0;
        for (int k = -2; k <= 2; ++k) acc += g1[k + 2] * t[static_cast<std::size_t>(y + k) * w + x];
        out[static_cast<std::size_t>(y) * w + x] = acc;
      }
    }
    return out;
  };
  std::vector<double> ixx(gray.size()), iyy(gray.size()), ixy(gray.size());
  for (std::size_t i = 0; i < gray.size(); ++i) {
    ixx[i] = ix[i] * ix[i];
    iyy[i] = iy[i] * iy[i];
    ixy[i] = ix[i] * iy[i];
  }
  ixx = smooth(ixx);
  iyy = smooth(iyy);
  ixy = smooth(ixy);

  std::vector<double> resp(gray.size(), 0.0);
  double rmax = 0.0;
  for (std::size_t i = 0; i < gray.size(); ++i) {
    const double tr = ixx[i] + iyy[i];
    resp[i] = ixx[i] * iyy[i] - ixy[i] * ixy[i] - opt.k * tr * tr;
    rmax = std::max(rmax, resp[i]);
  }
  if (rmax <= 1e-12) return {};

  struct Scored {
    double r;
    int y, x;
  };
  std::vector<Scored> picked;
  const double thresh = std::max(1e-12, opt.rel_threshold * rmax);
  for (int y = opt.border; y < h - opt.border; ++y) {
    for (int x = opt.border; x < w - opt.border; ++x) {
      const double r = resp[static_cast<std::size_t>(y) * w + x];
      if (r <= thresh) continue;
      bool is_max = true;
      for (int dy = -opt.nms_radius; dy <= opt.nms_radius && is_max; ++dy) {
        for (int dx = -opt.nms_radius; dx <= opt.nms_radius; ++dx) {
          if (dy == 0 && dx == 0) continue;
          const int yy = y + dy, xx = x + dx;
          if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
          const double rn = resp[static_cast<std::size_t>(yy) * w + xx];
          if (rn > r || (rn == r && (dy < 0 || (dy == 0 && dx < 0)))) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) picked.push_back({r, y, x});
    }
  }
  std::sort(picked.begin(), picked.end(), [](const Scored& l, const Scored& r) {
    if (l.r != r.r) return l.r > r.r;
    if (l.y != r.y) return l.y < r.y;
    return l.x < r.x;
  });
  if (static_cast<int>(picked.size()) > max_n) picked.resize(static_cast<std::size_t>(max_n));
  std::vector<Point2> out;
  out.reserve(picked.size());
  for (const auto& s : picked) out.push_back({static_cast<double>(s.x), static_cast<double>(s.y)});
  return out;
}

/// Normalized cross-correlation over odd-sized windows with mutual-best
/// filtering; pairs scoring below min_score are dropped (raw mutual-best
/// on unrelated images still pairs up ~half the points by chance).
inline std::vector<Correspondence> match_features(const std::vector<Point2>& a_pts,
                                                  const std::vector<Point2>& b_pts,
                                                  const RgbImage& img_a, const RgbImage& img_b,
                                                  int window = 11, double min_score = 0.5) {
  require(window % 2 == 1, "match_features: window must be odd");
  if (a_pts.empty() || b_pts.empty()) return {};
  const auto ga = detail::to_gray(img_a);
  const auto gb = detail::to_gray(img_b);
  const int half = window / 2;

  auto patch_stats = [&](const std::vector<float>& g, int h, int w, const Point2& p,
                         std::vector<double>& patch, double& mean, double& norm) {
    patch.resize(static_cast<std::size_t>(window) * window);
    double s = 0.0;
    for (int dy = -half; dy <= half; ++dy) {
      for (int dx = -half; dx <= half; ++dx) {
        const int y = std::clamp(static_cast<int>(p.y) + dy, 0, h - 1);
        const int x = std::clamp(static_cast<int>(p.x) + dx, 0, w - 1);
        const double v = g[static_cast<std::size_t>(y) * w + x];
        patch[static_cast<std::size_t>(dy + half) * window + (dx + half)] = v;
        s += v;
      }
    }
    mean = s / (window * window);
    double sq = 0.0;
    for (auto& v : patch) {
      v -= mean;
      sq += v * v;
    }
    norm = std::sqrt(sq);
  };

  std::vector<std::vector<double>> pa(a_pts.size()), pb(b_pts.size());
  std::vector<double> na(a_pts.size()), nb(b_pts.size());
  double m;
  for (std::size_t i = 0; i < a_pts.size(); ++i) patch_stats(ga, img_a.height, img_a.width, a_pts[i], pa[i], m, na[i]);
  for (std::size_t j = 0; j < b_pts.size(); ++j) patch_stats(gb, img_b.height, img_b.width, b_pts[j], pb[j], m, nb[j]);

  auto ncc = [&](std::size_t i, std::size_t j) {
    if (na[i] < 1e-9 || nb[j] < 1e-9) return -1.0;
    double dot = 0.0;
    for (std::size_t k = 0; k < pa[i].size(); ++k) dot += pa[i][k] * pb[j][k];
    return dot / (na[i] * nb[j]);
  };

  std::vector<int> best_ab(a_pts.size(), -1), best_ba(b_pts.size(), -1);
  std::vector<double> score_ab(a_pts.size(), -2.0), score_ba(b_pts.size(), -2.0);
  for (std::size_t i = 0; i < a_pts.size(); ++i) {
    for (std::size_t j = 0; j < b_pts.size(); ++j) {
      const double s = ncc(i, j);
      if (s > score_ab[i]) {
        score_ab[i] = s;
        best_ab[i] = static_cast<int>(j);
      }
      if (s > score_ba[j]) {
        score_ba[j] = s;
        best_ba[j] = static_cast<int>(i);
      }
    }
  }
  std::vector<Correspondence> out;
  for (std::size_t i = 0; i < a_pts.size(); ++i) {
    const int j = best_ab[i];
    if (j >= 0 && best_ba[static_cast<std::size_t>(j)] == static_cast<int>(i) &&
        score_ab[i] >= min_score) {
      out.push_back({a_pts[i], b_pts[static_cast<std::size_t>(j)], score_ab[i]});
    }
  }
  return out;
}

namespace detail {

// Solves the two decoupled 3-unknown least-squares systems for an affine
// from >= 3 correspondences (unweighted normal equations).
inline bool affine_least_squares(const std::vector<Correspondence>& matches,
                                 const std::vector<char>& use, Affine2D& out) {
  double m[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
  double rx[3] = {0, 0, 0}, ry[3] = {0, 0, 0};
  int count = 0;
  for (std::size_t i = 0; i < matches.size(); ++i) {
    if (!use.empty() && !use[i]) continue;
    ++count;
    const double x = matches[i].src.x, y = matches[i].src.y;
    const double u = matches[i].dst.x, v = matches[i].dst.y;
    const double row[3] = {x, y, 1.0};
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) m[a][b] += row[a] * row[b];
      rx[a] += row[a] * u;
      ry[a] += row[a] * v;
    }
  }
  if (count < 3) return false;

  // Gaussian elimination with partial pivoting on the shared 3x3 system.
  double aug[3][5];
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) aug[i][j] = m[i][j];
    aug[i][3] = rx[i];
    aug[i][4] = ry[i];
  }
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r) {
      if (std::abs(aug[r][col]) > std::abs(aug[piv][col])) piv = r;
    }
    if (std::abs(aug[piv][col]) < 1e-12) return false;
    if (piv != col) {
      for (int j = 0; j < 5; ++j) std::swap(aug[piv][j], aug[col][j]);
    }
    for (int r = 0; r < 3; ++r) {
      if (r == col) continue;
      const double f = aug[r][col] / aug[col][col];
      for (int j = 0; j < 5; ++j) aug[r][j] -= f * aug[col][j];
    }
  }
  out.a = aug[0][3] / aug[0][0];
  out.b = aug[1][3] / aug[1][1];
  out.tx = aug[2][3] / aug[2][2];
  out.c = aug[0][4] / aug[0][0];
  out.d = aug[1][4] / aug[1][1];
  out.ty = aug[2][4] / aug[2][2];
  return true;
}

}  // namespace detail

struct RansacResult {
  Affine2D model;
  std::vector<char> inliers;
  int inlier_count = 0;
};

/// RANSAC affine estimation: minimal 3-point hypotheses, inliers by
/// reprojection distance <= tol_px, final least-squares refit on the best
/// inlier set. Deterministic given the rng seed.
inline RansacResult ransac_affine(const std::vector<Correspondence>& matches, int iters,
                                  double tol_px, Rng rng = Rng(0)) {
  require(matches.size() >= 3, "ransac_affine: needs at least 3 matches");
  const int n = static_cast<int>(matches.size());
  const double tol2 = tol_px * tol_px;

  auto count_inliers = [&](const Affine2D& model, std::vector<char>& mask) {
    mask.assign(matches.size(), 0);
    int cnt = 0;
    for (std::size_t i = 0; i < matches.size(); ++i) {
      double px, py;
      model.apply(matches[i].src.x, matches[i].src.y, px, py);
      const double dx = px - matches[i].dst.x, dy = py - matches[i].dst.y;
      if (dx * dx + dy * dy <= tol2) {
        mask[i] = 1;
        ++cnt;
      }
    }
    return cnt;
  };

  RansacResult best;
  best.inlier_count = -1;
  std::vector<char> sample_mask(matches.size(), 0);
  std::vector<char> mask;
  for (int it = 0; it < iters; ++it) {
    int i0 = rng.uniform_int(n);
    int i1 = rng.uniform_int(n);
    int i2 = rng.uniform_int(n);
    if (i0 == i1 || i1 == i2 || i0 == i2) continue;
    // reject collinear triples
    const auto& p0 = matches[static_cast<std::size_t>(i0)].src;
    const auto& p1 = matches[static_cast<std::size_t>(i1)].src;
    const auto& p2 = matches[static_cast<std::size_t>(i2)].src;
    const double area = (p1.x - p0.x) * (p2.y - p0.y) - (p1.y - p0.y) * (p2.x - p0.x);
    if (std::abs(area) < 1e-6) continue;

    std::fill(sample_mask.begin(), sample_mask.end(), 0);
    sample_mask[static_cast<std::size_t>(i0)] = 1;
    sample_mask[static_cast<std::size_t>(i1)] = 1;
    sample_mask[static_cast<std::size_t>(i2)] = 1;
    Affine2D model;
    if (!detail::affine_least_squares(matches, sample_mask, model)) continue;
    const int cnt = count_inliers(model, mask);
    if (cnt > best.inlier_count) {
      best.model = model;
      best.inliers = mask;
      best.inlier_count = cnt;
    }
  }
  if (best.inlier_count < 3) {
    throw NoModelError("ransac_affine: no non-degenerate model found");
  }
  Affine2D refined;
  if (detail::affine_least_squares(matches, best.inliers, refined)) {
    best.model = refined;
    best.inlier_count = count_inliers(refined, best.inliers);
  }
  return best;
}

/// Inverse-mapped bilinear warp: output(p) = img(A^-1 p), border clamp.
inline RgbImage warp_affine(const RgbImage& img, const Affine2D& A) {
  require(std::abs(A.det()) > 1e-12, "warp_affine: matrix is singular");
  const Affine2D inv = A.inverse();
  RgbImage out(img.height, img.width);
  const std::size_t plane = img.plane();
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double sx, sy;
      inv.apply(x, y, sx, sy);
      for (int c = 0; c < 3; ++c) {
        out.data[static_cast<std::size_t>(c) * plane + static_cast<std::size_t>(y) * img.width + x] =
            detail::bilinear_clamped(img.data.data() + static_cast<std::size_t>(c) * plane,
                                     img.height, img.width, sx, sy);
      }
    }
  }
  return out;
}

/// Convenience pipeline: corners -> NCC matches -> RANSAC. Returns the
/// affine mapping src coords onto dst coords.
inline RansacResult register_images(const RgbImage& src, const RgbImage& dst, int max_corners = 200,
                                    int iters = 1000, double tol_px = 2.0, Rng rng = Rng(0),
                                    int ncc_window = 11) {
  const auto pa = detect_corners(src, max_corners);
  const auto pb = detect_corners(dst, max_corners);
  const auto matches = match_features(pa, pb, src, dst, ncc_window);
  if (matches.size() < 3) throw NoModelError("register_images: fewer than 3 matches");
  return ransac_affine(matches, iters, tol_px, rng);
}

}  // namespace hsifuse
