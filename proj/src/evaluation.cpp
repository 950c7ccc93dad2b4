#include "hdmap/evaluation.hpp"

#include "hdmap/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

namespace hdmap {

namespace {

void require_polygon(const RoadPolygon& poly, const char* name) {
  if (poly.vertices.size() < 3) throw invalid_argument(std::string(name) + " polygon has fewer than 3 vertices");
  for (const auto& v : poly.vertices) {
    if (!v.allFinite()) throw invalid_argument(std::string(name) + " polygon has a non-finite vertex");
  }
  if (!(std::abs(signed_area(poly.vertices)) > 0.0)) {
    throw invalid_argument(std::string(name) + " polygon has zero area");
  }
  if (!is_simple(poly.vertices)) throw invalid_argument(std::string(name) + " polygon is not simple");
}

double population_sigma(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

}  // namespace

RoadReport road_metrics(const RoadPolygon& pred, const RoadPolygon& gt, double delta) {
  require_polygon(pred, "predicted");
  require_polygon(gt, "ground-truth");
  RoadReport r;
  r.area_pred = polygon_area(pred);
  r.area_gt = polygon_area(gt);
  r.area_error_abs = std::abs(r.area_pred - r.area_gt);
  r.area_error_symdiff = symmetric_difference_area(pred.vertices, gt.vertices);
  r.delta = delta;
  return r;
}

Point3 closest_on_polyline(const Point3& p, const std::vector<Point3>& polyline) {
  if (polyline.empty()) throw invalid_argument("closest point on an empty polyline");
  if (polyline.size() == 1) return polyline.front();
  Point3 best = polyline.front();
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < polyline.size(); ++i) {
    const Point3& a = polyline[i];
    const Point3 ab = polyline[i + 1] - a;
    const double len2 = ab.squaredNorm();
    const double u = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    const Point3 q = a + u * ab;
    const double d = (p - q).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = q;
    }
  }
  return best;
}

LaneMetrics lane_metrics(const Lane& pred, const Lane& gt) {
  if (pred.points.empty() || gt.points.empty()) throw invalid_argument("lane metrics need non-empty lanes");
  if (gt.points.size() < 2) throw invalid_argument("ground-truth lane needs at least 2 points");
  LaneMetrics m;
  std::vector<double> xs, ys;
  double total = 0.0;
  for (const auto& p : pred.points) {
    const Point3 r = closest_on_polyline(p, gt.points) - p;
    m.residuals.push_back(r);
    total += r.norm();
    xs.push_back(r.x());
    ys.push_back(r.y());
  }
  m.translation_error = total / static_cast<double>(pred.points.size());
  m.sigma_x = population_sigma(xs);
  m.sigma_y = population_sigma(ys);
  return m;
}

LaneReport evaluate_lanes(const std::vector<Lane>& pred, const std::vector<Lane>& gt, double gate) {
  struct Pair {
    double offset;
    std::size_t p, g;
  };
  std::vector<Pair> pairs;
  std::vector<std::vector<LaneMetrics>> metrics(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    for (std::size_t j = 0; j < gt.size(); ++j) {
      metrics[i].push_back(lane_metrics(pred[i], gt[j]));
      const double off = metrics[i][j].translation_error;
      if (off <= gate) pairs.push_back({off, i, j});
    }
  }
  std::sort(pairs.begin(), pairs.end(),
            [](const Pair& a, const Pair& b) { return std::tie(a.offset, a.p, a.g) < std::tie(b.offset, b.p, b.g); });
  std::vector<bool> pred_used(pred.size(), false), gt_used(gt.size(), false);
  LaneReport report;
  for (const auto& pr : pairs) {
    if (pred_used[pr.p] || gt_used[pr.g]) continue;
    pred_used[pr.p] = gt_used[pr.g] = true;
    report.matches.push_back({pred[pr.p].id, gt[pr.g].id, pr.offset, metrics[pr.p][pr.g]});
  }
  std::sort(report.matches.begin(), report.matches.end(),
            [](const LaneMatch& a, const LaneMatch& b) { return a.pred_id < b.pred_id; });
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!pred_used[i]) report.unmatched_pred.push_back(pred[i].id);
  }
  for (std::size_t j = 0; j < gt.size(); ++j) {
    if (!gt_used[j]) report.unmatched_gt.push_back(gt[j].id);
  }
  std::vector<double> xs, ys;
  double total = 0.0;
  for (const auto& m : report.matches) {
    total += m.metrics.translation_error;
    for (const auto& r : m.metrics.residuals) {
      xs.push_back(r.x());
      ys.push_back(r.y());
    }
  }
  if (!report.matches.empty()) report.mean_translation_error = total / static_cast<double>(report.matches.size());
  report.sigma_x = population_sigma(xs);
  report.sigma_y = population_sigma(ys);
  return report;
}

}  // namespace hdmap
