#include "hdmap/road.hpp"

#include "hdmap/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace hdmap {

int ElevationHistogram::bin_of(double z) const {
  const int b = static_cast<int>(std::floor((z - z_min) / bin_width()));
  return std::clamp(b, 0, bin_count - 1);
}

ElevationHistogram make_histogram(std::span<const double> values, int bin_count) {
  if (bin_count < 2) throw invalid_argument("histogram needs at least 2 bins");
  if (values.empty()) throw invalid_argument("histogram needs at least one value");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (!(*hi > *lo)) throw invalid_argument("degenerate histogram: all values are identical");
  ElevationHistogram hist;
  hist.bin_count = bin_count;
  hist.z_min = *lo;
  hist.z_max = *hi;
  hist.counts.assign(static_cast<std::size_t>(bin_count), 0);
  for (double v : values) ++hist.counts[static_cast<std::size_t>(hist.bin_of(v))];
  return hist;
}

double between_class_variance(const ElevationHistogram& hist, int boundary) {
  double n0 = 0.0, n1 = 0.0, s0 = 0.0, s1 = 0.0;
  for (int i = 0; i < hist.bin_count; ++i) {
    const double c = static_cast<double>(hist.counts[static_cast<std::size_t>(i)]);
    const double center = hist.boundary(i) + 0.5 * hist.bin_width();
    if (i < boundary) {
      n0 += c;
      s0 += c * center;
    } else {
      n1 += c;
      s1 += c * center;
    }
  }
  if (n0 == 0.0 || n1 == 0.0) return 0.0;
  const double n = n0 + n1;
  const double diff = s0 / n0 - s1 / n1;
  return (n0 / n) * (n1 / n) * diff * diff;
}

int otsu_boundary(const ElevationHistogram& hist) {
  std::vector<double> variance(static_cast<std::size_t>(hist.bin_count), 0.0);
  double best = -1.0;
  for (int b = 1; b < hist.bin_count; ++b) {
    variance[static_cast<std::size_t>(b)] = between_class_variance(hist, b);
    best = std::max(best, variance[static_cast<std::size_t>(b)]);
  }
  int lo = 1;
  while (variance[static_cast<std::size_t>(lo)] != best) ++lo;
  int hi = lo;
  while (hi + 1 < hist.bin_count && variance[static_cast<std::size_t>(hi + 1)] == best) ++hi;
  return lo + (hi - lo) / 2;
}

double otsu_threshold(std::span<const double> values, int bin_count) {
  const ElevationHistogram hist = make_histogram(values, bin_count);
  return hist.boundary(otsu_boundary(hist));
}

void CurbFilterConfig::validate() const {
  if (bin_count < 2) throw invalid_argument("curb.bin_count must be >= 2");
  if (min_points < 1) throw invalid_argument("curb.min_points must be positive");
  if (!(sigma_band > 0.0)) throw invalid_argument("curb.sigma_band must be positive");
  if (min_mode_separation < 0.0) throw invalid_argument("curb.min_mode_separation must be >= 0");
}

namespace {

struct Moments {
  double mean = 0.0;
  double sigma = 0.0;
  std::size_t count = 0;
};

Moments moments(std::span<const double> values) {
  Moments m;
  m.count = values.size();
  if (values.empty()) return m;
  double sum = 0.0;
  for (double v : values) sum += v;
  m.mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - m.mean) * (v - m.mean);
  m.sigma = std::sqrt(ss / static_cast<double>(values.size()));
  return m;
}

}  // namespace

std::pair<PointCloud, CurbFilterReport> curb_filter(const PointCloud& road_cloud, const CurbFilterConfig& config) {
  config.validate();
  if (static_cast<int>(road_cloud.size()) < config.min_points) {
    throw invalid_argument("curb filter needs at least " + std::to_string(config.min_points) + " points, got " +
                           std::to_string(road_cloud.size()));
  }
  std::vector<double> z;
  z.reserve(road_cloud.size());
  for (const auto& p : road_cloud.points) z.push_back(p.z());

  CurbFilterReport report;
  report.total = z.size();
  const Moments all = moments(z);
  Moments road = all;

  const auto [lo, hi] = std::minmax_element(z.begin(), z.end());
  if (*hi > *lo) {
    const ElevationHistogram hist = make_histogram(z, config.bin_count);
    const int boundary = otsu_boundary(hist);
    std::vector<double> lower, upper;
    for (double v : z) (hist.bin_of(v) < boundary ? lower : upper).push_back(v);
    const Moments ml = moments(lower);
    const Moments mu = moments(upper);
    const bool pick_lower = config.road_is_lower_class || ml.count >= mu.count;
    const Moments& kept_class = pick_lower ? ml : mu;
    const Moments& other_class = pick_lower ? mu : ml;
    report.otsu_threshold = hist.boundary(boundary);
    if (std::abs(kept_class.mean - other_class.mean) >= config.min_mode_separation) {
      road = kept_class;
      report.mu2 = other_class.mean;
      report.sigma2 = other_class.sigma;
      report.split_applied = true;
    }
  } else {
    report.otsu_threshold = all.mean;
  }
  report.mu1 = road.mean;
  report.sigma1 = road.sigma;

  const double half_band = config.sigma_band * road.sigma + 1e-9;
  PointCloud kept;
  kept.frame = road_cloud.frame;
  if (road_cloud.intensity) kept.intensity.emplace();
  if (road_cloud.labels) kept.labels.emplace();
  for (std::size_t i = 0; i < road_cloud.size(); ++i) {
    if (std::abs(z[i] - road.mean) <= half_band) kept.push_from(road_cloud, i);
  }
  report.kept = kept.size();
  report.delta = 1.0 - static_cast<double>(report.kept) / static_cast<double>(report.total);
  return {std::move(kept), report};
}

void ConcaveHullConfig::validate() const {
  if (k < 3) throw invalid_argument("concave hull k must be >= 3");
  if (max_k_factor < 1) throw invalid_argument("concave hull max_k_factor must be >= 1");
}

namespace {

// Uniform grid over the input for k-nearest queries among points that have
// not been consumed yet.
class GridIndex {
 public:
  explicit GridIndex(std::span<const Point2> pts) : pts_(pts), removed_(pts.size(), false) {
    lo_ = hi_ = pts[0];
    for (const auto& p : pts) {
      lo_ = lo_.cwiseMin(p);
      hi_ = hi_.cwiseMax(p);
    }
    const Point2 ext = (hi_ - lo_).cwiseMax(Point2(1e-9, 1e-9));
    cell_ = std::sqrt(ext.x() * ext.y() / static_cast<double>(pts.size())) * 2.0;
    cell_ = std::max({cell_, ext.x() / 2048.0, ext.y() / 2048.0});
    nx_ = static_cast<int>(ext.x() / cell_) + 1;
    ny_ = static_cast<int>(ext.y() / cell_) + 1;
    buckets_.resize(static_cast<std::size_t>(nx_) * static_cast<std::size_t>(ny_));
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const auto [cx, cy] = cell_of(pts[i]);
      buckets_[static_cast<std::size_t>(cy) * nx_ + cx].push_back(i);
    }
  }

  void set_removed(std::size_t i, bool v) { removed_[i] = v; }

  /// Up to k nearest non-removed points ordered by (distance, index).
  std::vector<std::size_t> nearest(const Point2& q, std::size_t k) const {
    std::vector<std::pair<double, std::size_t>> found;
    const auto [qx, qy] = cell_of(q);
    const int max_ring = std::max(nx_, ny_);
    for (int r = 0; r <= max_ring; ++r) {
      for (int y = qy - r; y <= qy + r; ++y) {
        if (y < 0 || y >= ny_) continue;
        const bool edge_row = (y == qy - r || y == qy + r);
        for (int x = qx - r; x <= qx + r; x += (edge_row ? 1 : 2 * r)) {
          if (x >= 0 && x < nx_) {
            for (auto i : buckets_[static_cast<std::size_t>(y) * nx_ + x]) {
              if (!removed_[i]) found.emplace_back((pts_[i] - q).squaredNorm(), i);
            }
          }
          if (r == 0) break;
        }
      }
      if (found.size() >= k) {
        std::nth_element(found.begin(), found.begin() + static_cast<std::ptrdiff_t>(k - 1), found.end());
        const double kth = found[k - 1].first;
        const double reach = r * cell_;
        if (kth <= reach * reach) break;
      }
    }
    std::sort(found.begin(), found.end());
    if (found.size() > k) found.resize(k);
    std::vector<std::size_t> out;
    out.reserve(found.size());
    for (const auto& f : found) out.push_back(f.second);
    return out;
  }

 private:
  std::pair<int, int> cell_of(const Point2& p) const {
    const int x = std::clamp(static_cast<int>((p.x() - lo_.x()) / cell_), 0, nx_ - 1);
    const int y = std::clamp(static_cast<int>((p.y() - lo_.y()) / cell_), 0, ny_ - 1);
    return {x, y};
  }

  std::span<const Point2> pts_;
  std::vector<bool> removed_;
  Point2 lo_, hi_;
  double cell_ = 1.0;
  int nx_ = 1, ny_ = 1;
  std::vector<std::vector<std::size_t>> buckets_;
};

double normalize_angle(double a) {
  while (a < 0.0) a += 2.0 * std::numbers::pi;
  while (a >= 2.0 * std::numbers::pi) a -= 2.0 * std::numbers::pi;
  return a;
}

bool all_inside(std::span<const Point2> pts, const std::vector<Point2>& ring) {
  Point2 lo = ring[0], hi = ring[0];
  for (const auto& v : ring) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  for (const auto& p : pts) {
    if (p.x() < lo.x() - 1e-9 || p.y() < lo.y() - 1e-9 || p.x() > hi.x() + 1e-9 || p.y() > hi.y() + 1e-9) {
      return false;
    }
    if (!point_in_polygon(p, ring, 1e-9)) return false;
  }
  return true;
}

// One gift-wrapping pass with a fixed k. Returns the clockwise ring or an
// empty vector when this k fails.
std::vector<Point2> wrap(std::span<const Point2> pts, std::size_t k) {
  GridIndex index(pts);
  std::size_t first = 0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (pts[i].y() < pts[first].y() || (pts[i].y() == pts[first].y() && pts[i].x() < pts[first].x())) first = i;
  }
  std::vector<std::size_t> hull{first};
  index.set_removed(first, true);
  std::size_t remaining = pts.size() - 1;
  std::size_t current = first;
  double previous_angle = 0.0;

  while ((current != first || hull.size() == 1) && remaining > 0) {
    if (hull.size() == 4) {
      index.set_removed(first, false);
      ++remaining;
    }
    auto candidates = index.nearest(pts[current], k);
    std::vector<std::pair<double, std::size_t>> ordered;
    for (auto c : candidates) {
      const Point2 d = pts[c] - pts[current];
      ordered.emplace_back(normalize_angle(std::atan2(d.y(), d.x()) - previous_angle), c);
    }
    // Largest right-hand turn first; nearer point first on equal angles.
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });

    bool found = false;
    for (const auto& [angle, c] : ordered) {
      const std::size_t h = hull.size();
      const Point2& a = pts[current];
      const Point2& b = pts[c];
      if (h >= 2) {
        const Point2& prev = pts[hull[h - 2]];
        if (orient(prev, a, b) == 0.0 && (b - a).dot(prev - a) > 0.0) continue;  // folds back
      }
      const std::size_t stop = (c == first) ? 1 : 0;
      bool crosses = false;
      for (std::size_t e = stop; e + 2 < h && !crosses; ++e) {
        crosses = segments_intersect(a, b, pts[hull[e]], pts[hull[e + 1]]);
      }
      if (crosses) continue;
      found = true;
      current = c;
      break;
    }
    if (!found) return {};
    if (current != first) hull.push_back(current);
    index.set_removed(current, true);
    --remaining;
    const Point2 back = pts[hull[hull.size() - 2]] - pts[current];
    previous_angle = std::atan2(back.y(), back.x());
  }

  std::vector<Point2> ring;
  ring.reserve(hull.size());
  for (auto i : hull) ring.push_back(pts[i]);
  if (ring.size() < 3 || !is_simple(ring) || !all_inside(pts, ring)) return {};
  return ring;
}

}  // namespace

ConcaveHullResult concave_hull_ex(std::span<const Point2> points, const ConcaveHullConfig& config) {
  config.validate();
  std::vector<Point2> pts(points.begin(), points.end());
  for (const auto& p : pts) {
    if (!p.allFinite()) throw invalid_argument("concave hull input contains a non-finite point");
  }
  std::sort(pts.begin(), pts.end(),
            [](const Point2& a, const Point2& b) { return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y()); });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) throw invalid_argument("concave hull needs at least 3 distinct points");

  const std::vector<Point2> convex = convex_hull(pts);
  if (convex.size() < 3 || !(signed_area(convex) > 0.0)) {
    throw invalid_argument("concave hull input points are collinear");
  }

  ConcaveHullResult result;
  const int k_max = config.max_k_factor * config.k;
  for (int k = config.k; k <= k_max; ++k) {
    if (static_cast<std::size_t>(k) >= pts.size() - 1) break;
    std::vector<Point2> ring = wrap(pts, static_cast<std::size_t>(k));
    if (!ring.empty()) {
      make_counterclockwise(ring);
      result.polygon.vertices = std::move(ring);
      result.k_used = k;
      return result;
    }
  }
  result.polygon.vertices = convex;
  result.k_used = static_cast<int>(pts.size()) - 1;
  result.convex_fallback = true;
  return result;
}

RoadPolygon concave_hull(std::span<const Point2> points, int k) {
  ConcaveHullConfig config;
  config.k = k;
  return concave_hull_ex(points, config).polygon;
}

namespace {
constexpr double kFixedPointScale = 1e6;
}

RoadAccumulator::RoadAccumulator(double cell) : cell_(cell) {
  if (!(cell > 0.0)) throw invalid_argument("road accumulator cell must be positive");
}

void RoadAccumulator::update(const PointCloud& filtered_scan, const RigidTransform& pose) {
  const PointCloud moved = transform_cloud(filtered_scan, pose);
  if (moved.frame != FrameId::kMap) throw invalid_argument("road pose must map into the map frame");
  for (const auto& p : moved.points) {
    const std::pair<int, int> key{static_cast<int>(std::floor(p.x() / cell_)),
                                  static_cast<int>(std::floor(p.y() / cell_))};
    Sum& s = cells_[key];
    s.x += std::llround(p.x() * kFixedPointScale);
    s.y += std::llround(p.y() * kFixedPointScale);
    ++s.n;
  }
}

std::vector<Point2> RoadAccumulator::points() const {
  std::vector<Point2> out;
  out.reserve(cells_.size());
  for (const auto& [key, s] : cells_) {
    const double n = static_cast<double>(s.n);
    out.emplace_back(static_cast<double>(s.x) / n / kFixedPointScale, static_cast<double>(s.y) / n / kFixedPointScale);
  }
  return out;
}

RoadPolygon finalize_road(const RoadAccumulator& state, const ConcaveHullConfig& config) {
  const auto pts = state.points();
  if (pts.size() < 3) throw invalid_argument("need at least 3 accumulated road points to extract a polygon");
  return concave_hull_ex(pts, config).polygon;
}

}  // namespace hdmap
