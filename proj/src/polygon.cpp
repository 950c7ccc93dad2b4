#include "hdmap/polygon.hpp"

#include "hdmap/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace hdmap {

double signed_area(std::span<const Point2> ring) {
  const std::size_t n = ring.size();
  if (n < 3) return 0.0;
  // Shifted by the first vertex to limit cancellation on map-scale coordinates.
  const Point2 o = ring[0];
  double twice = 0.0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const Point2 a = ring[i] - o;
    const Point2 b = ring[i + 1] - o;
    twice += a.x() * b.y() - b.x() * a.y();
  }
  return 0.5 * twice;
}

double polygon_area(const RoadPolygon& poly) { return std::abs(signed_area(poly.vertices)); }

double orient(const Point2& a, const Point2& b, const Point2& c) {
  return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

namespace {

bool on_segment(const Point2& a, const Point2& b, const Point2& p) {
  return std::min(a.x(), b.x()) <= p.x() && p.x() <= std::max(a.x(), b.x()) && std::min(a.y(), b.y()) <= p.y() &&
         p.y() <= std::max(a.y(), b.y());
}

int sign(double v) { return (v > 0.0) - (v < 0.0); }

}  // namespace

bool segments_intersect(const Point2& a, const Point2& b, const Point2& c, const Point2& d) {
  const int o1 = sign(orient(a, b, c));
  const int o2 = sign(orient(a, b, d));
  const int o3 = sign(orient(c, d, a));
  const int o4 = sign(orient(c, d, b));
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(a, b, c)) return true;
  if (o2 == 0 && on_segment(a, b, d)) return true;
  if (o3 == 0 && on_segment(c, d, a)) return true;
  if (o4 == 0 && on_segment(c, d, b)) return true;
  return false;
}

double point_segment_distance(const Point2& p, const Point2& a, const Point2& b) {
  const Point2 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

bool point_in_polygon(const Point2& p, std::span<const Point2> ring, double tolerance) {
  const std::size_t n = ring.size();
  if (n < 3) return false;
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point2& a = ring[i];
    const Point2& b = ring[j];
    if (point_segment_distance(p, a, b) <= tolerance) return true;
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (p.x() < x) inside = !inside;
    }
  }
  return inside;
}

bool is_simple(std::span<const Point2> ring) {
  const std::size_t n = ring.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    if (ring[i] == ring[(i + 1) % n]) return false;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& a = ring[i];
    const Point2& b = ring[(i + 1) % n];
    // Adjacent edge (b, c): only a fold back onto (a, b) makes them overlap.
    const Point2& c = ring[(i + 2) % n];
    if (orient(a, b, c) == 0.0 && (c - b).dot(a - b) > 0.0) return false;
    const Point2 lo = a.cwiseMin(b);
    const Point2 hi = a.cwiseMax(b);
    for (std::size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;  // adjacent through the closing edge
      const Point2& c2 = ring[j];
      const Point2& d2 = ring[(j + 1) % n];
      if (std::max(c2.x(), d2.x()) < lo.x() || std::min(c2.x(), d2.x()) > hi.x() ||
          std::max(c2.y(), d2.y()) < lo.y() || std::min(c2.y(), d2.y()) > hi.y()) {
        continue;
      }
      if (segments_intersect(a, b, c2, d2)) return false;
    }
  }
  return true;
}

std::vector<Point2> convex_hull(std::span<const Point2> points) {
  std::vector<Point2> pts(points.begin(), points.end());
  std::sort(pts.begin(), pts.end(), [](const Point2& a, const Point2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Point2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && orient(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && orient(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

void make_counterclockwise(std::vector<Point2>& ring) {
  if (signed_area(ring) < 0.0) std::reverse(ring.begin(), ring.end());
}

void RoadPolygon::validate() const {
  if (vertices.size() < 3) throw invalid_argument("road polygon needs at least 3 vertices");
  for (const auto& v : vertices) {
    if (!v.allFinite()) throw invalid_argument("road polygon has a non-finite vertex");
  }
  if (!is_simple(vertices)) throw invalid_argument("road polygon is not simple");
  if (!(signed_area(vertices) > 0.0)) throw invalid_argument("road polygon is not counterclockwise");
}

namespace {

using Tri = std::array<Point2, 3>;

// Area of the intersection of two counterclockwise triangles
// (Sutherland-Hodgman clip of `subject` by the half-planes of `clip`).
double triangle_overlap(const Tri& subject, const Tri& clip) {
  std::array<Point2, 9> buf_a;
  std::array<Point2, 9> buf_b;
  std::size_t na = 3;
  std::copy(subject.begin(), subject.end(), buf_a.begin());
  Point2* in = buf_a.data();
  Point2* out = buf_b.data();
  for (int e = 0; e < 3 && na > 0; ++e) {
    const Point2& c0 = clip[e];
    const Point2& c1 = clip[(e + 1) % 3];
    std::size_t nb = 0;
    for (std::size_t i = 0; i < na; ++i) {
      const Point2& p = in[i];
      const Point2& q = in[(i + 1) % na];
      const double dp = orient(c0, c1, p);
      const double dq = orient(c0, c1, q);
      if (dp >= 0.0) out[nb++] = p;
      if ((dp >= 0.0) != (dq >= 0.0)) {
        const double t = dp / (dp - dq);
        out[nb++] = p + t * (q - p);
      }
    }
    std::swap(in, out);
    na = nb;
  }
  if (na < 3) return 0.0;
  return std::abs(signed_area(std::span<const Point2>(in, na)));
}

struct FanTri {
  Tri tri;  // counterclockwise
  double sign;
  Point2 lo, hi;
};

std::vector<FanTri> fan(std::span<const Point2> ring) {
  std::vector<FanTri> out;
  const double orientation = signed_area(ring) >= 0.0 ? 1.0 : -1.0;
  const Point2 apex = ring[0];
  for (std::size_t i = 1; i + 1 < ring.size(); ++i) {
    Tri t{apex, ring[i], ring[i + 1]};
    const double o = orient(t[0], t[1], t[2]);
    if (o == 0.0) continue;
    double s = orientation;
    if (o < 0.0) {
      std::swap(t[1], t[2]);
      s = -s;
    }
    const Point2 lo = t[0].cwiseMin(t[1]).cwiseMin(t[2]);
    const Point2 hi = t[0].cwiseMax(t[1]).cwiseMax(t[2]);
    out.push_back({t, s, lo, hi});
  }
  return out;
}

}  // namespace

double intersection_area(std::span<const Point2> a, std::span<const Point2> b) {
  if (a.size() < 3 || b.size() < 3) return 0.0;
  // Signed fan triangles sum to the indicator of each polygon almost
  // everywhere, so the overlap integral splits into triangle pairs.
  const auto ta = fan(a);
  const auto tb = fan(b);
  double total = 0.0;
  for (const auto& x : ta) {
    for (const auto& y : tb) {
      if (x.hi.x() < y.lo.x() || y.hi.x() < x.lo.x() || x.hi.y() < y.lo.y() || y.hi.y() < x.lo.y()) continue;
      total += x.sign * y.sign * triangle_overlap(x.tri, y.tri);
    }
  }
  return std::max(0.0, total);
}

double symmetric_difference_area(std::span<const Point2> a, std::span<const Point2> b) {
  const double area_a = std::abs(signed_area(a));
  const double area_b = std::abs(signed_area(b));
  return std::max(0.0, area_a + area_b - 2.0 * intersection_area(a, b));
}

}  // namespace hdmap
