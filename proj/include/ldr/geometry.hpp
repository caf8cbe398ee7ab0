#pragma once

// 2D primitives for document outlines: ordered quads, equal-division point
// rings, 4-point homography estimation (DLT), convex polygon clipping, and
// the perspective-removed Jaccard index used by the evaluation protocol.
//
// Coordinate convention: image coordinates, y axis pointing down. Quads are
// ordered counter-clockwise on screen starting at the content top-left
// corner, which makes the signed area of a valid quad positive under the
// formula below.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "ldr/common.hpp"

namespace ldr {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

inline Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
inline Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
inline Point2 operator*(double s, Point2 p) { return {s * p.x, s * p.y}; }
inline double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }
inline double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Point2 a) { return std::hypot(a.x, a.y); }
inline bool finite(Point2 p) { return std::isfinite(p.x) && std::isfinite(p.y); }

// Ordered document outline; corner 0 is the content top-left corner.
struct Quad {
  std::array<Point2, 4> corners{};

  static Quad rect(double w, double h) {
    return Quad{{Point2{0, 0}, Point2{0, h}, Point2{w, h}, Point2{w, 0}}};
  }
};

// Positive for the screen counter-clockwise corner order above.
inline double signed_area(const Quad& q) {
  double s = 0.0;
  for (int i = 0; i < 4; ++i) {
    const Point2& a = q.corners[size_t(i)];
    const Point2& b = q.corners[size_t((i + 1) % 4)];
    s += (b.x - a.x) * (b.y + a.y);
  }
  return 0.5 * s;
}

inline double polygon_area(const std::vector<Point2>& poly) {
  if (poly.size() < 3) return 0.0;
  double s = 0.0;
  for (size_t i = 0; i < poly.size(); ++i) {
    const Point2& a = poly[i];
    const Point2& b = poly[(i + 1) % poly.size()];
    s += cross(a, b);
  }
  return 0.5 * std::abs(s);
}

// Strictly convex in the quad corner convention (no collinear triples).
inline bool is_convex(const Quad& q, double eps = 1e-12) {
  for (int i = 0; i < 4; ++i) {
    Point2 e0 = q.corners[size_t((i + 1) % 4)] - q.corners[size_t(i)];
    Point2 e1 = q.corners[size_t((i + 2) % 4)] - q.corners[size_t((i + 1) % 4)];
    if (cross(e0, e1) >= -eps) return false;
  }
  return true;
}

inline double min_interior_angle(const Quad& q) {
  double best = 1e30;
  for (int i = 0; i < 4; ++i) {
    Point2 u = q.corners[size_t((i + 3) % 4)] - q.corners[size_t(i)];
    Point2 v = q.corners[size_t((i + 1) % 4)] - q.corners[size_t(i)];
    double nu = norm(u), nv = norm(v);
    if (nu < 1e-15 || nv < 1e-15) return 0.0;
    double c = std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
    best = std::min(best, std::acos(c));
  }
  return best;
}

// -----------------------------------------------------------------------------
// Point rings: 4 corners plus (N-4)/4 equal-division points per border.
// Corners sit at ring indices 0, N/4, N/2, 3N/4. Border view k has
// N/4 + 1 entries, first and last being the adjacent corners.
// -----------------------------------------------------------------------------

struct PointRing {
  std::vector<Point2> points;

  int n_total() const { return int(points.size()); }
  int quarter() const { return n_total() / 4; }

  Point2 corner(int k) const { return points[size_t(k * quarter())]; }

  // Entry i of border view k (i in [0, quarter()]); wraps at the ring end.
  Point2 border_point(int k, int i) const {
    return points[size_t((k * quarter() + i) % n_total())];
  }
};

inline void validate_ring_size(int n_total) {
  require(n_total >= 8 && n_total % 4 == 0,
          cat("point ring size must be a multiple of 4 and >= 8, got ", n_total));
}

inline PointRing equal_division_points(const Quad& quad, int n_total) {
  validate_ring_size(n_total);
  const int q = n_total / 4;
  PointRing ring;
  ring.points.reserve(size_t(n_total));
  for (int b = 0; b < 4; ++b) {
    Point2 c0 = quad.corners[size_t(b)];
    Point2 c1 = quad.corners[size_t((b + 1) % 4)];
    ring.points.push_back(c0);
    for (int j = 1; j < q; ++j) {
      double t = double(j) / double(q);
      ring.points.push_back(c0 + t * (c1 - c0));
    }
  }
  return ring;
}

// Sum of per-corner Euclidean distances between two quads in the same
// corner-order convention.
inline double corner_distance(const Quad& pred, const Quad& target) {
  double s = 0.0;
  for (int i = 0; i < 4; ++i)
    s += norm(pred.corners[size_t(i)] - target.corners[size_t(i)]);
  return s;
}

// -----------------------------------------------------------------------------
// Homographies
// -----------------------------------------------------------------------------

struct Homography {
  // Row-major 3x3, scale-normalized so h[2][2] == 1 whenever it is nonzero.
  std::array<std::array<double, 3>, 3> h{};

  static Homography identity() {
    Homography m;
    m.h = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    return m;
  }
};

inline double det3(const Homography& m) {
  const auto& h = m.h;
  return h[0][0] * (h[1][1] * h[2][2] - h[1][2] * h[2][1]) -
         h[0][1] * (h[1][0] * h[2][2] - h[1][2] * h[2][0]) +
         h[0][2] * (h[1][0] * h[2][1] - h[1][1] * h[2][0]);
}

inline Point2 apply_homography(const Homography& m, Point2 p) {
  const auto& h = m.h;
  double w = h[2][0] * p.x + h[2][1] * p.y + h[2][2];
  if (std::abs(w) <= 1e-12)
    throw NumericError(cat("apply_homography: point (", p.x, ", ", p.y,
                           ") maps to infinity (w = ", w, ")"));
  return {(h[0][0] * p.x + h[0][1] * p.y + h[0][2]) / w,
          (h[1][0] * p.x + h[1][1] * p.y + h[1][2]) / w};
}

inline Quad apply_homography(const Homography& m, const Quad& q) {
  Quad out;
  for (int i = 0; i < 4; ++i) out.corners[size_t(i)] = apply_homography(m, q.corners[size_t(i)]);
  return out;
}

inline Homography inverse(const Homography& m) {
  double d = det3(m);
  if (std::abs(d) <= 1e-12) throw NumericError("homography is not invertible");
  const auto& h = m.h;
  Homography r;
  r.h[0][0] = (h[1][1] * h[2][2] - h[1][2] * h[2][1]) / d;
  r.h[0][1] = (h[0][2] * h[2][1] - h[0][1] * h[2][2]) / d;
  r.h[0][2] = (h[0][1] * h[1][2] - h[0][2] * h[1][1]) / d;
  r.h[1][0] = (h[1][2] * h[2][0] - h[1][0] * h[2][2]) / d;
  r.h[1][1] = (h[0][0] * h[2][2] - h[0][2] * h[2][0]) / d;
  r.h[1][2] = (h[0][2] * h[1][0] - h[0][0] * h[1][2]) / d;
  r.h[2][0] = (h[1][0] * h[2][1] - h[1][1] * h[2][0]) / d;
  r.h[2][1] = (h[0][1] * h[2][0] - h[0][0] * h[2][1]) / d;
  r.h[2][2] = (h[0][0] * h[1][1] - h[0][1] * h[1][0]) / d;
  if (std::abs(r.h[2][2]) > 1e-12) {
    double s = r.h[2][2];
    for (auto& row : r.h)
      for (auto& v : row) v /= s;
  }
  return r;
}

namespace detail {

// Similarity transform bringing 4 points to centroid 0, mean distance sqrt(2).
struct PointNorm {
  double scale = 1.0;
  Point2 shift{};
  Point2 apply(Point2 p) const { return {scale * (p.x - shift.x), scale * (p.y - shift.y)}; }
};

inline PointNorm normalizer(const std::array<Point2, 4>& pts) {
  PointNorm n;
  for (const auto& p : pts) n.shift = n.shift + 0.25 * p;
  double mean_dist = 0.0;
  for (const auto& p : pts) mean_dist += 0.25 * norm(p - n.shift);
  n.scale = mean_dist > 1e-300 ? std::sqrt(2.0) / mean_dist : 1.0;
  return n;
}

// Gaussian elimination with partial pivoting on an n x (n+1) augmented matrix.
inline bool solve_linear(std::vector<std::vector<double>>& a, std::vector<double>& x) {
  const int n = int(a.size());
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(a[size_t(r)][size_t(col)]) > std::abs(a[size_t(piv)][size_t(col)])) piv = r;
    if (std::abs(a[size_t(piv)][size_t(col)]) < 1e-12) return false;
    std::swap(a[size_t(col)], a[size_t(piv)]);
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      double f = a[size_t(r)][size_t(col)] / a[size_t(col)][size_t(col)];
      if (f == 0.0) continue;
      for (int c = col; c <= n; ++c) a[size_t(r)][size_t(c)] -= f * a[size_t(col)][size_t(c)];
    }
  }
  x.resize(size_t(n));
  for (int r = 0; r < n; ++r) x[size_t(r)] = a[size_t(r)][size_t(n)] / a[size_t(r)][size_t(r)];
  return true;
}

inline bool has_collinear_triple(const std::array<Point2, 4>& pts, double eps) {
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j)
      for (int k = j + 1; k < 4; ++k) {
        Point2 u = pts[size_t(j)] - pts[size_t(i)];
        Point2 v = pts[size_t(k)] - pts[size_t(i)];
        if (std::abs(cross(u, v)) <= eps) return true;
      }
  return false;
}

}  // namespace detail

// 4-point direct linear transform. Points are Hartley-normalized before the
// 8x8 solve; the result maps src[i] exactly onto dst[i] (reprojection well
// under 1e-9 for sane inputs).
inline Homography estimate_homography(const std::array<Point2, 4>& src,
                                      const std::array<Point2, 4>& dst) {
  for (const auto& p : src)
    if (!finite(p)) throw NumericError("estimate_homography: non-finite source point");
  for (const auto& p : dst)
    if (!finite(p)) throw NumericError("estimate_homography: non-finite target point");

  detail::PointNorm ns = detail::normalizer(src);
  detail::PointNorm nd = detail::normalizer(dst);
  std::array<Point2, 4> s, d;
  for (int i = 0; i < 4; ++i) {
    s[size_t(i)] = ns.apply(src[size_t(i)]);
    d[size_t(i)] = nd.apply(dst[size_t(i)]);
  }
  if (detail::has_collinear_triple(s, 1e-9) || detail::has_collinear_triple(d, 1e-9))
    throw NumericError("estimate_homography: degenerate configuration (collinear or coincident points)");

  // Unknowns h00..h21 with h22 fixed to 1, two equations per correspondence.
  std::vector<std::vector<double>> a(8, std::vector<double>(9, 0.0));
  for (int i = 0; i < 4; ++i) {
    double x = s[size_t(i)].x, y = s[size_t(i)].y;
    double u = d[size_t(i)].x, v = d[size_t(i)].y;
    a[size_t(2 * i)] = {x, y, 1, 0, 0, 0, -u * x, -u * y, u};
    a[size_t(2 * i + 1)] = {0, 0, 0, x, y, 1, -v * x, -v * y, v};
  }
  std::vector<double> h8;
  if (!detail::solve_linear(a, h8))
    throw NumericError("estimate_homography: singular system (degenerate points)");

  Homography hn;
  hn.h = {{{h8[0], h8[1], h8[2]}, {h8[3], h8[4], h8[5]}, {h8[6], h8[7], 1.0}}};

  // Denormalize: H = T_dst^-1 * Hn * T_src.
  Homography ts, td_inv;
  ts.h = {{{ns.scale, 0, -ns.scale * ns.shift.x},
           {0, ns.scale, -ns.scale * ns.shift.y},
           {0, 0, 1}}};
  td_inv.h = {{{1.0 / nd.scale, 0, nd.shift.x},
               {0, 1.0 / nd.scale, nd.shift.y},
               {0, 0, 1}}};
  Homography out;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      double acc = 0.0;
      for (int k = 0; k < 3; ++k) {
        double m = 0.0;
        for (int k2 = 0; k2 < 3; ++k2) m += hn.h[size_t(k)][size_t(k2)] * ts.h[size_t(k2)][size_t(c)];
        acc += td_inv.h[size_t(r)][size_t(k)] * m;
      }
      out.h[size_t(r)][size_t(c)] = acc;
    }
  if (std::abs(out.h[2][2]) > 1e-12) {
    double sc = out.h[2][2];
    for (auto& row : out.h)
      for (auto& v : row) v /= sc;
  }
  if (std::abs(det3(out)) <= 1e-12)
    throw NumericError("estimate_homography: result not invertible");
  return out;
}

inline Homography estimate_homography(const Quad& src, const Quad& dst) {
  return estimate_homography(src.corners, dst.corners);
}

// -----------------------------------------------------------------------------
// Convex polygon intersection (Sutherland-Hodgman half-plane clipping)
// -----------------------------------------------------------------------------

namespace detail {

// Interior of an edge a->b of a counter-clockwise (screen) convex polygon.
// Boundary points count as inside.
inline bool inside_edge(Point2 p, Point2 a, Point2 b, double eps) {
  return cross(b - a, p - a) <= eps;
}

inline Point2 edge_intersect(Point2 s, Point2 e, Point2 a, Point2 b) {
  Point2 d = b - a;
  double d1 = cross(d, s - a);
  double d2 = cross(d, e - a);
  double t = d1 / (d1 - d2);
  return s + t * (e - s);
}

inline std::vector<Point2> to_screen_ccw(std::vector<Point2> poly) {
  double s = 0.0;
  for (size_t i = 0; i < poly.size(); ++i) {
    const Point2& a = poly[i];
    const Point2& b = poly[(i + 1) % poly.size()];
    s += (b.x - a.x) * (b.y + a.y);
  }
  if (s < 0.0) std::reverse(poly.begin(), poly.end());
  return poly;
}

}  // namespace detail

// Area of subject ∩ clip. `clip` must be convex; `subject` any simple
// polygon. Degenerate or disjoint inputs yield 0.
inline double convex_intersection_area(const std::vector<Point2>& subject,
                                       const std::vector<Point2>& clip,
                                       double eps = 1e-12) {
  if (subject.size() < 3 || clip.size() < 3) return 0.0;
  std::vector<Point2> clip_ccw = detail::to_screen_ccw(clip);
  std::vector<Point2> out = subject;
  for (size_t i = 0; i < clip_ccw.size() && !out.empty(); ++i) {
    Point2 a = clip_ccw[i];
    Point2 b = clip_ccw[(i + 1) % clip_ccw.size()];
    std::vector<Point2> in;
    in.swap(out);
    for (size_t j = 0; j < in.size(); ++j) {
      Point2 s = in[j];
      Point2 e = in[(j + 1) % in.size()];
      bool si = detail::inside_edge(s, a, b, eps);
      bool ei = detail::inside_edge(e, a, b, eps);
      if (si && ei) {
        out.push_back(e);
      } else if (si && !ei) {
        out.push_back(detail::edge_intersect(s, e, a, b));
      } else if (!si && ei) {
        out.push_back(detail::edge_intersect(s, e, a, b));
        out.push_back(e);
      }
    }
  }
  return polygon_area(out);
}

inline double convex_intersection_area(const Quad& a, const Quad& b, double eps = 1e-12) {
  std::vector<Point2> pa(a.corners.begin(), a.corners.end());
  std::vector<Point2> pb(b.corners.begin(), b.corners.end());
  return convex_intersection_area(pa, pb, eps);
}

// -----------------------------------------------------------------------------
// Jaccard index with perspective removal
// -----------------------------------------------------------------------------

// Maps both quads through the homography that rectifies gt onto its known
// canonical rectangle, then measures area(G' ∩ S') / area(G' ∪ S') in the
// canonical frame. Throws NumericError on degenerate configurations; the
// evaluation layer records such frames as JI = 0.
inline double jaccard_index(const Quad& pred, const Quad& gt, const Quad& gt_canonical) {
  Homography removal = estimate_homography(gt, gt_canonical);
  Quad s_prime = apply_homography(removal, pred);
  Quad g_prime = apply_homography(removal, gt);
  for (const auto& p : s_prime.corners)
    if (!finite(p)) throw NumericError("jaccard_index: prediction maps to non-finite point");

  std::vector<Point2> s_poly(s_prime.corners.begin(), s_prime.corners.end());
  std::vector<Point2> g_poly(g_prime.corners.begin(), g_prime.corners.end());
  double inter = convex_intersection_area(s_poly, g_poly);
  double uni = polygon_area(g_poly) + polygon_area(s_poly) - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

}  // namespace ldr
