#include "hdmap/lane.hpp"

#include "hdmap/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <tuple>
#include <unordered_map>

namespace hdmap {

double Lane::length() const {
  double total = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) total += (points[i] - points[i - 1]).norm();
  return total;
}

void LaneConfig::validate() const {
  if (!(smoothing_distance > 0.0)) throw invalid_argument("lane.L1 must be positive");
  if (!(clustering_distance > 0.0)) throw invalid_argument("lane.L2 must be positive");
  if (look_back < 0) throw invalid_argument("lane.look_back must be >= 0");
  if (missing_scan_limit < 1) throw invalid_argument("lane.missing_scan_limit must be >= 1");
  if (!(roi_width > 0.0)) throw invalid_argument("lane.roi_width must be positive");
  if (!(cluster_tolerance_lidar > 0.0) || !(cluster_tolerance_map > 0.0)) {
    throw invalid_argument("lane cluster tolerances must be positive");
  }
  if (min_cluster_size < 1) throw invalid_argument("lane.min_cluster_size must be >= 1");
  if (min_lane_length < 0.0) throw invalid_argument("lane.min_lane_length must be >= 0");
  if (default_lane_width < 0.0) throw invalid_argument("lane.default_lane_width must be >= 0");
  if (!(normal_window > 0.0)) throw invalid_argument("lane.normal_window must be positive");
}

namespace {

// Least squares with rank detection; returns nullopt when rank deficient.
std::optional<Eigen::VectorXd> solve_least_squares(const Eigen::MatrixXd& a, const Eigen::VectorXd& y) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < a.cols()) return std::nullopt;
  return Eigen::VectorXd(qr.solve(y));
}

// y(x) polynomial of degree <= 2 used to seed lateral bands.
struct SeedCurve {
  Eigen::Vector3d coeffs = Eigen::Vector3d::Zero();  // c0 + c1 x + c2 x²
  std::vector<std::size_t> members;

  double at(double x) const { return coeffs[0] + coeffs[1] * x + coeffs[2] * x * x; }
};

void fit_seed(SeedCurve& seed, const PointCloud& cloud) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo, mean_y = 0.0;
  for (auto i : seed.members) {
    lo = std::min(lo, cloud.points[i].x());
    hi = std::max(hi, cloud.points[i].x());
    mean_y += cloud.points[i].y();
  }
  mean_y /= static_cast<double>(seed.members.size());
  const std::size_t n = seed.members.size();
  int degree = 0;
  if (hi - lo >= 5.0 && n >= 10) {
    degree = 2;
  } else if (hi - lo >= 2.0 && n >= 4) {
    degree = 1;
  }
  seed.coeffs = Eigen::Vector3d(mean_y, 0.0, 0.0);
  for (; degree > 0; --degree) {
    Eigen::MatrixXd a(n, degree + 1);
    Eigen::VectorXd y(n);
    for (std::size_t r = 0; r < n; ++r) {
      const Point3& p = cloud.points[seed.members[r]];
      for (int c = 0; c <= degree; ++c) a(static_cast<Eigen::Index>(r), c) = std::pow(p.x(), c);
      y[static_cast<Eigen::Index>(r)] = p.y();
    }
    if (auto sol = solve_least_squares(a, y)) {
      seed.coeffs.setZero();
      seed.coeffs.head(degree + 1) = *sol;
      return;
    }
  }
}

}  // namespace

std::vector<PointCloud> split_rois(const PointCloud& lane_cloud, double roi_width) {
  if (!(roi_width > 0.0)) throw invalid_argument("roi_width must be positive");
  if (lane_cloud.empty()) return {};

  std::map<int, SeedCurve> by_label;
  for (std::size_t i = 0; i < lane_cloud.size(); ++i) {
    const int label = lane_cloud.labels ? (*lane_cloud.labels)[i] : 1;
    if (label != 0) by_label[label].members.push_back(i);
  }
  if (by_label.empty()) return {};

  double x_ref = 0.0;
  for (const auto& p : lane_cloud.points) x_ref += p.x();
  x_ref /= static_cast<double>(lane_cloud.size());

  std::vector<SeedCurve> seeds;
  for (auto& [label, seed] : by_label) {
    fit_seed(seed, lane_cloud);
    seeds.push_back(std::move(seed));
  }
  bool merged = true;
  while (merged && seeds.size() > 1) {
    merged = false;
    std::sort(seeds.begin(), seeds.end(),
              [&](const SeedCurve& a, const SeedCurve& b) { return a.at(x_ref) < b.at(x_ref); });
    for (std::size_t i = 0; i + 1 < seeds.size(); ++i) {
      if (std::abs(seeds[i + 1].at(x_ref) - seeds[i].at(x_ref)) < roi_width) {
        auto& into = seeds[i].members;
        into.insert(into.end(), seeds[i + 1].members.begin(), seeds[i + 1].members.end());
        std::sort(into.begin(), into.end());
        fit_seed(seeds[i], lane_cloud);
        seeds.erase(seeds.begin() + static_cast<std::ptrdiff_t>(i) + 1);
        merged = true;
        break;
      }
    }
  }
  std::sort(seeds.begin(), seeds.end(),
            [&](const SeedCurve& a, const SeedCurve& b) { return a.at(x_ref) < b.at(x_ref); });

  std::vector<PointCloud> groups(seeds.size());
  for (auto& g : groups) {
    g.frame = lane_cloud.frame;
    if (lane_cloud.intensity) g.intensity.emplace();
    if (lane_cloud.labels) g.labels.emplace();
  }
  const double gate = 0.5 * roi_width + 1e-12;
  for (std::size_t i = 0; i < lane_cloud.size(); ++i) {
    const Point3& p = lane_cloud.points[i];
    std::size_t best = seeds.size();
    double best_d = gate;
    for (std::size_t k = 0; k < seeds.size(); ++k) {
      const double d = std::abs(p.y() - seeds[k].at(p.x()));
      if (d <= best_d && (best == seeds.size() || d < best_d)) {
        best = k;
        best_d = d;
      }
    }
    if (best < seeds.size()) groups[best].push_from(lane_cloud, i);
  }
  std::erase_if(groups, [](const PointCloud& g) { return g.empty(); });
  return groups;
}

namespace {

struct CellKey {
  long long x, y, z;
  bool operator==(const CellKey&) const = default;
};

struct CellKeyHash {
  std::size_t operator()(const CellKey& k) const {
    std::size_t h = static_cast<std::size_t>(k.x) * 73856093u;
    h ^= static_cast<std::size_t>(k.y) * 19349663u;
    h ^= static_cast<std::size_t>(k.z) * 83492791u;
    return h;
  }
};

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t i) {
  while (parent[i] != i) {
    parent[i] = parent[parent[i]];
    i = parent[i];
  }
  return i;
}

}  // namespace

std::vector<std::vector<std::size_t>> euclidean_cluster(std::span<const Point3> points, double tolerance,
                                                        int min_size) {
  if (!(tolerance > 0.0)) throw invalid_argument("cluster tolerance must be positive");
  const std::size_t n = points.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});

  std::unordered_map<CellKey, std::vector<std::size_t>, CellKeyHash> grid;
  auto key_of = [&](const Point3& p) {
    return CellKey{static_cast<long long>(std::floor(p.x() / tolerance)),
                   static_cast<long long>(std::floor(p.y() / tolerance)),
                   static_cast<long long>(std::floor(p.z() / tolerance))};
  };
  for (std::size_t i = 0; i < n; ++i) grid[key_of(points[i])].push_back(i);

  const double tol2 = tolerance * tolerance;
  for (std::size_t i = 0; i < n; ++i) {
    const CellKey k = key_of(points[i]);
    for (long long dx = -1; dx <= 1; ++dx) {
      for (long long dy = -1; dy <= 1; ++dy) {
        for (long long dz = -1; dz <= 1; ++dz) {
          auto it = grid.find({k.x + dx, k.y + dy, k.z + dz});
          if (it == grid.end()) continue;
          for (auto j : it->second) {
            if (j <= i || (points[j] - points[i]).squaredNorm() > tol2) continue;
            const std::size_t ri = find_root(parent, i), rj = find_root(parent, j);
            if (ri != rj) parent[std::max(ri, rj)] = std::min(ri, rj);
          }
        }
      }
    }
  }

  std::map<std::size_t, std::vector<std::size_t>> components;
  for (std::size_t i = 0; i < n; ++i) components[find_root(parent, i)].push_back(i);
  std::vector<std::vector<std::size_t>> out;
  for (auto& [root, members] : components) {
    if (static_cast<int>(members.size()) >= min_size) out.push_back(std::move(members));
  }
  return out;
}

CurveFrame pca_frame(std::span<const Point3> points, const Point2& direction_hint) {
  if (points.empty()) throw invalid_argument("pca_frame needs at least one point");
  Point2 mean = Point2::Zero();
  for (const auto& p : points) mean += p.head<2>();
  mean /= static_cast<double>(points.size());
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& p : points) {
    const Point2 d = p.head<2>() - mean;
    cov += d * d.transpose();
  }
  CurveFrame frame;
  frame.origin = mean;
  Point2 axis = direction_hint.norm() > 0.0 ? Point2(direction_hint.normalized()) : Point2::UnitX();
  if (cov.trace() > 0.0) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
    axis = es.eigenvectors().col(1).normalized();
    if (axis.dot(direction_hint) < 0.0) axis = -axis;
  }
  frame.axis = axis;
  return frame;
}

double CurveFit::lateral_at(double s) const {
  switch (kind) {
    case CurveKind::kLogarithmic:
      return a * std::log(s - s_min + 1.0) + b;
    case CurveKind::kQuadratic:
      return (a * s + b) * s + c;
    case CurveKind::kLinear:
      return b * s + c;
  }
  return 0.0;
}

double CurveFit::z_at(double s) const { return z_slope * s + z_offset; }

Point3 CurveFit::evaluate(double s) const {
  const Point2 xy = frame.origin + s * frame.axis + lateral_at(s) * frame.normal();
  return {xy.x(), xy.y(), z_at(s)};
}

std::vector<Point3> CurveFit::resample(std::span<const Point3> points) const {
  std::vector<Point3> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(evaluate(frame.along(p)));
  return out;
}

CurveFit fit_curve(std::span<const Point3> points, CurveKind kind, const std::optional<CurveFrame>& frame) {
  CurveFit fit;
  fit.frame = frame ? *frame : pca_frame(points);
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::VectorXd s(n), y(n), z(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    s[i] = fit.frame.along(points[static_cast<std::size_t>(i)]);
    y[i] = fit.frame.lateral(points[static_cast<std::size_t>(i)]);
    z[i] = points[static_cast<std::size_t>(i)].z();
  }
  std::vector<double> distinct(s.data(), s.data() + n);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 2) throw invalid_argument("curve fit needs at least two distinct abscissae");

  Eigen::MatrixXd line(n, 2);
  line.col(0) = s;
  line.col(1).setOnes();
  const Eigen::VectorXd zc = *solve_least_squares(line, z);
  fit.z_slope = zc[0];
  fit.z_offset = zc[1];

  auto fit_line = [&] {
    const Eigen::VectorXd c = *solve_least_squares(line, y);
    fit.kind = CurveKind::kLinear;
    fit.a = 0.0;
    fit.b = c[0];
    fit.c = c[1];
  };

  switch (kind) {
    case CurveKind::kLinear:
      fit_line();
      break;
    case CurveKind::kQuadratic: {
      Eigen::MatrixXd q(n, 3);
      q.col(0) = s.cwiseProduct(s);
      q.col(1) = s;
      q.col(2).setOnes();
      if (auto c = solve_least_squares(q, y)) {
        fit.kind = CurveKind::kQuadratic;
        fit.a = (*c)[0];
        fit.b = (*c)[1];
        fit.c = (*c)[2];
      } else {
        fit_line();
        fit.reduced = true;
      }
      break;
    }
    case CurveKind::kLogarithmic: {
      fit.s_min = distinct.front();
      Eigen::MatrixXd g(n, 2);
      for (Eigen::Index i = 0; i < n; ++i) g(i, 0) = std::log(s[i] - fit.s_min + 1.0);
      g.col(1).setOnes();
      if (auto c = solve_least_squares(g, y)) {
        fit.kind = CurveKind::kLogarithmic;
        fit.a = (*c)[0];
        fit.b = (*c)[1];
        fit.c = 0.0;
      } else {
        fit_line();
        fit.reduced = true;
      }
      break;
    }
  }

  double ss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r = y[i] - fit.lateral_at(s[i]);
    ss += r * r;
  }
  fit.rms = std::sqrt(ss / static_cast<double>(n));
  if (!std::isfinite(fit.a) || !std::isfinite(fit.b) || !std::isfinite(fit.c) || !std::isfinite(fit.rms)) {
    throw numeric_error("curve fit produced non-finite coefficients");
  }
  return fit;
}

namespace {

std::vector<double> arc_lengths(std::span<const Point3> pts) {
  std::vector<double> s(pts.size(), 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i) s[i] = s[i - 1] + (pts[i] - pts[i - 1]).norm();
  return s;
}

// Direction of the polyline near one end, measured over roughly `reach` meters.
Point2 end_direction(std::span<const Point3> pts, bool at_end, double reach = 2.0) {
  const std::size_t n = pts.size();
  const Point2 tip = (at_end ? pts[n - 1] : pts[0]).head<2>();
  Point2 dir = Point2::Zero();
  for (std::size_t k = 1; k < n; ++k) {
    const Point2 other = (at_end ? pts[n - 1 - k] : pts[k]).head<2>();
    dir = at_end ? Point2(tip - other) : Point2(other - tip);
    if (dir.norm() >= reach) break;
  }
  return dir.norm() > 0.0 ? Point2(dir.normalized()) : Point2::UnitX();
}

struct Projection {
  double distance = std::numeric_limits<double>::infinity();
  double t = 0.0;  // arc-length parameter, extended beyond both ends
};

// Closest location on the polyline extended by its end tangents.
Projection project_onto(std::span<const Point3> pts, const std::vector<double>& arc, const Point2& q) {
  Projection best;
  if (pts.size() == 1) {
    best.distance = (q - pts[0].head<2>()).norm();
    return best;
  }
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const Point2 a = pts[i].head<2>(), b = pts[i + 1].head<2>();
    const Point2 ab = b - a;
    const double len2 = ab.squaredNorm();
    const double u = len2 > 0.0 ? std::clamp((q - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    const double d = (q - (a + u * ab)).norm();
    if (d < best.distance) {
      best.distance = d;
      best.t = arc[i] + u * (arc[i + 1] - arc[i]);
    }
  }
  const Point2 end = pts.back().head<2>(), start = pts.front().head<2>();
  const Point2 de = end_direction(pts, true), ds = end_direction(pts, false);
  const double ahead = (q - end).dot(de);
  if (ahead > 0.0) {
    const double d = std::abs(de.x() * (q - end).y() - de.y() * (q - end).x());
    if (d < best.distance) {
      best.distance = d;
      best.t = arc.back() + ahead;
    }
  }
  const double behind = (q - start).dot(ds);
  if (behind < 0.0) {
    const double d = std::abs(ds.x() * (q - start).y() - ds.y() * (q - start).x());
    if (d < best.distance) {
      best.distance = d;
      best.t = behind;
    }
  }
  return best;
}

void smooth_range(std::vector<Point3>& pts, std::size_t from, std::size_t to) {
  if (to <= from || to - from < 3) return;
  std::span<const Point3> portion(pts.data() + from, to - from);
  const Point2 hint = (portion.back() - portion.front()).head<2>();
  const CurveFrame frame = pca_frame(portion, hint);
  std::optional<CurveFit> best;
  try {
    best = fit_curve(portion, CurveKind::kLogarithmic, frame);
    const CurveFit quad = fit_curve(portion, CurveKind::kQuadratic, frame);
    if (quad.rms < best->rms) best = quad;
  } catch (const Error&) {
    return;
  }
  const std::vector<Point3> smoothed = best->resample(portion);
  std::copy(smoothed.begin(), smoothed.end(), pts.begin() + static_cast<std::ptrdiff_t>(from));
}

}  // namespace

std::vector<Point3> reference_points(std::span<const Point3> points, double spacing) {
  std::vector<Point3> out;
  const auto arc = arc_lengths(points);
  std::size_t i = 0;
  while (i < points.size()) {
    std::size_t j = i + 1;
    while (j < points.size() && arc[j] - arc[i] <= spacing) ++j;
    Point3 c = Point3::Zero();
    for (std::size_t k = i; k < j; ++k) c += points[k];
    out.push_back(c / static_cast<double>(j - i));
    i = j;
  }
  return out;
}

LaneTracker::LaneTracker(const LaneConfig& config) : config_(config) { config_.validate(); }

std::vector<Point3> LaneTracker::scan_segment(const PointCloud& roi_cloud, const RigidTransform& pose) const {
  if (roi_cloud.frame != pose.from() || pose.to() != FrameId::kMap) {
    throw invalid_argument("lane pose must map the " + std::string(frame_name(roi_cloud.frame)) +
                           " frame into the map frame");
  }
  const auto clusters = euclidean_cluster(roi_cloud.points, config_.cluster_tolerance_lidar, config_.min_cluster_size);
  std::vector<Point3> centroids;
  for (const auto& members : clusters) {
    Point3 c = Point3::Zero();
    for (auto i : members) c += roi_cloud.points[i];
    centroids.push_back(c / static_cast<double>(members.size()));
  }
  std::sort(centroids.begin(), centroids.end(), [](const Point3& a, const Point3& b) { return a.x() < b.x(); });
  if (centroids.size() >= 3) {
    try {
      const CurveFit fit = fit_curve(centroids, CurveKind::kQuadratic, pca_frame(centroids, Point2::UnitX()));
      centroids = fit.resample(centroids);
    } catch (const Error&) {
    }
  }
  for (auto& c : centroids) c = pose.apply(c);
  return centroids;
}

void LaneTracker::update(const std::vector<PointCloud>& roi_clouds, const RigidTransform& pose) {
  std::vector<std::vector<Point3>> segments;
  for (const auto& roi : roi_clouds) {
    auto seg = scan_segment(roi, pose);
    if (!seg.empty()) segments.push_back(std::move(seg));
  }
  update_segments(segments);
}

void LaneTracker::merge(LaneTrack& track, const std::vector<Point3>& segment) {
  auto& pts = track.lane.points;
  const std::size_t frozen = track.smoothing_index;
  const auto arc = arc_lengths(pts);
  const double frozen_t = frozen > 0 ? arc[frozen - 1] : -std::numeric_limits<double>::infinity();

  struct Entry {
    double t;
    int is_new;
    std::size_t order;
    Point3 p;
  };
  std::vector<Entry> open;
  for (std::size_t i = frozen; i < pts.size(); ++i) open.push_back({arc[i], 0, i, pts[i]});
  double furthest = -std::numeric_limits<double>::infinity();
  std::size_t added = 0;
  for (std::size_t k = 0; k < segment.size(); ++k) {
    const Projection pr = project_onto(pts, arc, segment[k].head<2>());
    if (pr.t <= frozen_t + 1e-9) continue;
    open.push_back({pr.t, 1, k, segment[k]});
    furthest = std::max(furthest, pr.t);
  }
  std::sort(open.begin(), open.end(), [](const Entry& a, const Entry& b) {
    return std::tie(a.t, a.is_new, a.order) < std::tie(b.t, b.is_new, b.order);
  });
  pts.resize(frozen);
  for (const auto& e : open) {
    if (!pts.empty() && (pts.back() - e.p).norm() <= 1e-9) continue;
    pts.push_back(e.p);
    added += static_cast<std::size_t>(e.is_new);
  }
  const double extension = added > 0 ? std::max(0.0, furthest - arc.back()) : 0.0;
  track.smoothing_distance += extension;
  track.clustering_distance += extension;
  track.last_added = added;
  track.missing_scans = 0;
  events_.push_back({track.lane.id, LaneEvent::Kind::kExtend, pts.size(), added, track.smoothing_index, extension});
}

void LaneTracker::apply_rules(LaneTrack& track) {
  auto& pts = track.lane.points;
  const std::size_t n = pts.size();
  if (track.missing_scans >= config_.missing_scan_limit) {
    if (track.smoothing_index < n) {
      smooth_range(pts, track.smoothing_index, n);
      track.smoothing_index = n;
      events_.push_back({track.lane.id, LaneEvent::Kind::kGapClose, n, track.last_added, n,
                         track.smoothing_distance});
    }
    track.missing_scans = 0;
    track.smoothing_distance = 0.0;
  } else if (track.smoothing_distance > config_.smoothing_distance) {
    smooth_range(pts, track.smoothing_index, n);
    const auto back = static_cast<long long>(track.last_added) + config_.look_back;
    const auto next = std::max(0LL, static_cast<long long>(n) - back);
    track.smoothing_index = std::max(static_cast<std::size_t>(next), track.clustered);
    events_.push_back({track.lane.id, LaneEvent::Kind::kSmooth, n, track.last_added, track.smoothing_index,
                       track.smoothing_distance});
    track.smoothing_distance = 0.0;
  }
  if (track.clustering_distance > config_.clustering_distance) {
    if (track.clustered < track.smoothing_index) {
      const std::span<const Point3> portion(pts.data() + track.clustered, track.smoothing_index - track.clustered);
      const auto refs = reference_points(portion, config_.cluster_tolerance_map);
      std::vector<Point3> rebuilt(pts.begin(), pts.begin() + static_cast<std::ptrdiff_t>(track.clustered));
      rebuilt.insert(rebuilt.end(), refs.begin(), refs.end());
      rebuilt.insert(rebuilt.end(), pts.begin() + static_cast<std::ptrdiff_t>(track.smoothing_index), pts.end());
      pts = std::move(rebuilt);
      track.smoothing_index = track.clustered + refs.size();
      track.clustered = track.smoothing_index;
      events_.push_back({track.lane.id, LaneEvent::Kind::kCluster, pts.size(), track.last_added,
                         track.smoothing_index, track.clustering_distance});
    }
    track.clustering_distance = 0.0;
  }
}

void LaneTracker::update_segments(const std::vector<std::vector<Point3>>& segments) {
  struct Candidate {
    double distance;
    std::size_t segment, track;
  };
  std::vector<Candidate> candidates;
  for (std::size_t g = 0; g < segments.size(); ++g) {
    if (segments[g].empty()) continue;
    Point3 c = Point3::Zero();
    for (const auto& p : segments[g]) c += p;
    c /= static_cast<double>(segments[g].size());
    for (std::size_t t = 0; t < tracks_.size(); ++t) {
      const auto& pts = tracks_[t].lane.points;
      const double d = project_onto(pts, arc_lengths(pts), c.head<2>()).distance;
      if (d <= config_.roi_width) candidates.push_back({d, g, t});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(a.distance, a.segment, a.track) < std::tie(b.distance, b.segment, b.track);
  });
  std::vector<bool> segment_used(segments.size(), false), track_used(tracks_.size(), false);
  std::vector<std::size_t> assignment(tracks_.size(), segments.size());
  for (const auto& c : candidates) {
    if (segment_used[c.segment] || track_used[c.track]) continue;
    segment_used[c.segment] = track_used[c.track] = true;
    assignment[c.track] = c.segment;
  }

  for (std::size_t t = 0; t < tracks_.size(); ++t) {
    if (assignment[t] < segments.size()) {
      merge(tracks_[t], segments[assignment[t]]);
    } else {
      ++tracks_[t].missing_scans;
      tracks_[t].last_added = 0;
    }
  }
  for (std::size_t g = 0; g < segments.size(); ++g) {
    if (segment_used[g] || segments[g].size() < 2) continue;
    LaneTrack track;
    track.lane.id = next_id_++;
    for (const auto& p : segments[g]) {
      if (track.lane.points.empty() || (track.lane.points.back() - p).norm() > 1e-9) track.lane.points.push_back(p);
    }
    track.last_added = track.lane.points.size();
    track.smoothing_distance = track.clustering_distance = track.lane.length();
    events_.push_back({track.lane.id, LaneEvent::Kind::kSpawn, track.lane.points.size(), track.last_added, 0,
                       track.smoothing_distance});
    tracks_.push_back(std::move(track));
  }
  for (auto& track : tracks_) apply_rules(track);
}

std::vector<Lane> finalize_lanes(const LaneTracker& tracker) {
  const LaneConfig& cfg = tracker.config();
  std::vector<Lane> out;
  for (const auto& track : tracker.tracks()) {
    Lane lane = track.lane;
    auto& pts = lane.points;
    smooth_range(pts, track.smoothing_index, pts.size());
    const std::span<const Point3> tail(pts.data() + track.clustered, pts.size() - track.clustered);
    const auto refs = reference_points(tail, cfg.cluster_tolerance_map);
    pts.resize(track.clustered);
    pts.insert(pts.end(), refs.begin(), refs.end());
    if (pts.size() < 2 || lane.length() < cfg.min_lane_length) continue;
    lane.id = static_cast<int>(out.size());
    out.push_back(std::move(lane));
  }
  return out;
}

namespace {

// Unit left normal at every waypoint from a local quadratic over +-half_window of arc length.
std::vector<Point2> lane_normals(std::span<const Point3> pts, double half_window) {
  const auto arc = arc_lengths(pts);
  std::vector<Point2> normals(pts.size(), Point2::UnitY());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    std::size_t lo = i, hi = i;
    while (lo > 0 && arc[i] - arc[lo - 1] <= half_window) --lo;
    while (hi + 1 < pts.size() && arc[hi + 1] - arc[i] <= half_window) ++hi;
    const Point2 chord = (pts[std::min(i + 1, pts.size() - 1)] - pts[i > 0 ? i - 1 : 0]).head<2>();
    Point2 tangent = chord.norm() > 0.0 ? Point2(chord.normalized()) : Point2::UnitX();
    if (hi - lo + 1 >= 3) {
      const std::span<const Point3> window(pts.data() + lo, hi - lo + 1);
      const CurveFrame frame = pca_frame(window, tangent);
      try {
        const CurveFit fit = fit_curve(window, CurveKind::kQuadratic, frame);
        const double s = frame.along(pts[i]);
        const double slope = fit.kind == CurveKind::kQuadratic ? 2.0 * fit.a * s + fit.b : fit.b;
        tangent = (frame.axis + slope * frame.normal()).normalized();
      } catch (const Error&) {
      }
    }
    normals[i] = Point2(-tangent.y(), tangent.x());
  }
  return normals;
}

// Signed parameters t where the line p + t*d crosses the segments of `ring` (closed when `closed`).
std::vector<double> line_hits(const Point2& p, const Point2& d, std::span<const Point2> ring, bool closed) {
  std::vector<double> hits;
  const std::size_t n = ring.size();
  const std::size_t edges = closed ? n : (n > 0 ? n - 1 : 0);
  for (std::size_t i = 0; i < edges; ++i) {
    const Point2& a = ring[i];
    const Point2& b = ring[(i + 1) % n];
    const Point2 e = b - a;
    const double den = d.x() * e.y() - d.y() * e.x();
    if (std::abs(den) < 1e-15) continue;
    const Point2 ap = a - p;
    const double t = (ap.x() * e.y() - ap.y() * e.x()) / den;
    const double u = (ap.x() * d.y() - ap.y() * d.x()) / den;
    if (u >= 0.0 && u <= 1.0) hits.push_back(t);
  }
  return hits;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::vector<Lane> complete_lanes(const std::vector<Lane>& lanes, const RoadPolygon& road, const LaneConfig& config,
                                 LaneCompletionReport* report) {
  config.validate();
  road.validate();
  if (lanes.size() < 2 && !(config.default_lane_width > 0.0)) {
    throw invalid_argument("lane completion needs at least 2 lanes or a default lane width");
  }
  LaneCompletionReport local;
  LaneCompletionReport& rep = report ? *report : local;
  rep = {};
  if (lanes.empty()) return lanes;

  std::size_t ref = 0;
  for (std::size_t i = 1; i < lanes.size(); ++i) {
    if (lanes[i].length() > lanes[ref].length()) ref = i;
  }
  const auto& ref_pts = lanes[ref].points;
  if (ref_pts.size() < 2) return lanes;
  const auto ref_normals = lane_normals(ref_pts, config.normal_window);
  const auto ref_arc = arc_lengths(ref_pts);
  const Point2 ref_dir = (ref_pts.back() - ref_pts.front()).head<2>();

  std::vector<double> left, right;
  std::vector<std::vector<double>> offsets(lanes.size());
  double last_station = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ref_pts.size(); ++i) {
    if (ref_arc[i] - last_station < 2.0) continue;
    const Point2 p = ref_pts[i].head<2>();
    if (!point_in_polygon(p, road.vertices)) continue;
    last_station = ref_arc[i];
    const Point2 nrm = ref_normals[i];
    double t_plus = std::numeric_limits<double>::infinity(), t_minus = -t_plus;
    for (double t : line_hits(p, nrm, road.vertices, true)) {
      if (t > 0.0) t_plus = std::min(t_plus, t);
      if (t < 0.0) t_minus = std::max(t_minus, t);
    }
    if (!std::isfinite(t_plus) || !std::isfinite(t_minus)) continue;
    left.push_back(t_plus);
    right.push_back(t_minus);
    offsets[ref].push_back(0.0);
    for (std::size_t j = 0; j < lanes.size(); ++j) {
      if (j == ref || lanes[j].points.size() < 2) continue;
      std::vector<Point2> line;
      for (const auto& q : lanes[j].points) line.push_back(q.head<2>());
      double best = std::numeric_limits<double>::infinity();
      for (double t : line_hits(p, nrm, line, false)) {
        if (std::abs(t) < std::abs(best)) best = t;
      }
      if (std::isfinite(best) && best > t_minus && best < t_plus) offsets[j].push_back(best);
    }
  }
  if (left.empty()) return lanes;

  std::vector<std::pair<double, std::size_t>> present;
  for (std::size_t j = 0; j < lanes.size(); ++j) {
    if (!offsets[j].empty()) present.emplace_back(median(offsets[j]), j);
  }
  std::sort(present.begin(), present.end());
  double width = config.default_lane_width;
  if (present.size() >= 2) {
    std::vector<double> gaps;
    for (std::size_t k = 1; k < present.size(); ++k) gaps.push_back(present[k].first - present[k - 1].first);
    width = median(gaps);
  }
  if (!(width > 0.0)) throw invalid_argument("lane completion could not derive a lane width");

  const double hi = median(left), lo = median(right);
  rep.lane_width = width;
  rep.road_extent = hi - lo;
  rep.expected_lanes = static_cast<int>(std::lround(rep.road_extent / width)) + 1;
  const int missing = rep.expected_lanes - static_cast<int>(present.size());
  if (missing <= 0) return lanes;

  std::vector<std::pair<int, double>> slots;
  const int reach = rep.expected_lanes + 1;
  for (int k = -reach; k <= reach; ++k) {
    const double o = k * width;
    if (!(o > lo && o < hi)) continue;
    bool covered = false;
    for (const auto& [off, j] : present) covered = covered || std::abs(off - o) < 0.5 * width;
    if (!covered) slots.emplace_back(std::abs(k), o);
  }
  std::sort(slots.begin(), slots.end());
  if (static_cast<int>(slots.size()) > missing) slots.resize(static_cast<std::size_t>(missing));

  std::vector<Lane> out = lanes;
  int next_id = 0;
  for (const auto& l : lanes) next_id = std::max(next_id, l.id + 1);
  for (const auto& [rank, slot] : slots) {
    auto source = present.front();
    for (const auto& entry : present) {
      if (std::abs(entry.first - slot) < std::abs(source.first - slot)) source = entry;
    }
    const Lane& src = lanes[source.second];
    double shift = slot - source.first;
    if ((src.points.back() - src.points.front()).head<2>().dot(ref_dir) < 0.0) shift = -shift;
    const auto normals = lane_normals(src.points, config.normal_window);
    Lane gen;
    gen.id = next_id++;
    gen.synthetic = true;
    for (std::size_t i = 0; i < src.points.size(); ++i) {
      Point3 q = src.points[i];
      q.head<2>() += shift * normals[i];
      if (point_in_polygon(q.head<2>(), road.vertices)) {
        gen.points.push_back(q);
      } else {
        ++gen.clipped_points;
      }
    }
    if (gen.points.size() < 2) continue;
    out.push_back(std::move(gen));
    ++rep.generated_lanes;
  }
  return out;
}

}  // namespace hdmap
