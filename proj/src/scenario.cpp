#include "hdmap/scenario.hpp"

#include "hdmap/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace hdmap {

std::string_view archetype_name(Archetype a) {
  switch (a) {
    case Archetype::kStraightRoad:
      return "straightRoad";
    case Archetype::kCurvedRoad:
      return "curvedRoad";
    case Archetype::kMergeLane:
      return "mergeLane";
    case Archetype::kIntersection:
      return "intersection";
    case Archetype::kHighway:
      return "highway";
  }
  return "unknown";
}

Archetype parse_archetype(std::string_view name) {
  for (auto a : {Archetype::kStraightRoad, Archetype::kCurvedRoad, Archetype::kMergeLane, Archetype::kIntersection,
                 Archetype::kHighway}) {
    if (archetype_name(a) == name) return a;
  }
  throw invalid_argument("unknown archetype '" + std::string(name) + "'");
}

void NoiseModel::validate() const {
  if (!(point_noise_sigma >= 0.0)) throw invalid_argument("point_noise_sigma must be >= 0");
  if (!(mask_dropout_rate >= 0.0 && mask_dropout_rate <= 1.0)) {
    throw invalid_argument("mask_dropout_rate must be in [0, 1]");
  }
  if (mask_curb_bleed < 0) throw invalid_argument("mask_curb_bleed must be >= 0");
  if (!(pose_translation_noise >= 0.0) || !(pose_rotation_noise_deg >= 0.0)) {
    throw invalid_argument("pose prior noise must be >= 0");
  }
}

ScenarioSpec ScenarioSpec::preset(Archetype archetype) {
  ScenarioSpec s;
  s.archetype = archetype;
  switch (archetype) {
    case Archetype::kStraightRoad:
      break;
    case Archetype::kCurvedRoad:
      s.curvature = 0.01;
      break;
    case Archetype::kMergeLane:
      s.length = 120.0;
      s.lane_count = 4;
      s.frame_count = 116;
      break;
    case Archetype::kIntersection:
      s.length = 80.0;
      s.frame_count = 76;
      break;
    case Archetype::kHighway:
      s.length = 200.0;
      s.lane_count = 4;
      s.lane_width = 3.75;
      s.frame_count = 196;
      break;
  }
  return s;
}

void ScenarioSpec::validate() const {
  if (!(length >= 40.0)) throw invalid_argument("scenario length must be >= 40 m");
  const int min_lines = archetype == Archetype::kMergeLane ? 2 : 1;
  if (lane_count < min_lines) throw invalid_argument("lane_count too small for the archetype");
  if (lane_count > kMaxLaneLabels) throw invalid_argument("lane_count exceeds the mask label range");
  if (!(lane_width > 0.5)) throw invalid_argument("lane_width must exceed 0.5 m");
  if (!(curb_height > 0.0)) throw invalid_argument("curb_height must be positive");
  if (!std::isfinite(curvature) || std::abs(curvature) * length > std::numbers::pi) {
    throw invalid_argument("curvature must keep the road under half a turn");
  }
  if (archetype != Archetype::kCurvedRoad && curvature != 0.0) {
    throw invalid_argument("curvature is only used by the curvedRoad archetype");
  }
  if (frame_count < 2) throw invalid_argument("frame_count must be >= 2");
  if (suppress_lane >= lane_count) throw invalid_argument("suppress_lane out of range");
  noise.validate();
}

namespace {

constexpr double kSensorHeight = 1.7;
constexpr double kCurbMargin = 0.5;
constexpr double kStartStation = -10.0;
constexpr double kEndMargin = 15.0;
constexpr double kMaxRange = 80.0;
constexpr double kMinRange = 1.0;
constexpr double kMaskHalfWidth = 0.2;
constexpr double kPaintHalfWidth = 0.075;
constexpr double kTaperLength = 20.0;
constexpr int kRings = 16;
constexpr int kAzimuthSteps = 1800;

Eigen::Matrix2d rot2(double a) {
  Eigen::Matrix2d r;
  r << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
  return r;
}

// Reference curve C(s) = anchor + Rot(psi) * G(s - s0), with G a line or a circular arc.
struct RoadAxis {
  Point2 anchor = Point2::Zero();
  double psi = 0.0;
  double s0 = 0.0;
  double kappa = 0.0;

  Point2 point(double s, double d) const {
    const double u = s - s0;
    Point2 local;
    if (kappa == 0.0) {
      local = Point2(u, d);
    } else {
      const double a = kappa * u;
      local = Point2(std::sin(a) / kappa - d * std::sin(a), (1.0 - std::cos(a)) / kappa + d * std::cos(a));
    }
    return anchor + rot2(psi) * local;
  }

  double heading(double s) const { return psi + kappa * (s - s0); }

  // Lateral coordinate alone; avoids the angle computation on arcs.
  double lateral(const Point2& p) const {
    const Point2 q = psi == 0.0 ? Point2(p - anchor) : Point2(rot2(-psi) * (p - anchor));
    if (kappa == 0.0) return q.y();
    const double sgn = kappa > 0.0 ? 1.0 : -1.0;
    return 1.0 / kappa - sgn * (q - Point2(0.0, 1.0 / kappa)).norm();
  }

  Point2 curvilinear(const Point2& p) const {
    const Point2 q = psi == 0.0 ? Point2(p - anchor) : Point2(rot2(-psi) * (p - anchor));
    if (kappa == 0.0) return {q.x() + s0, q.y()};
    const double sgn = kappa > 0.0 ? 1.0 : -1.0;
    const Point2 v = q - Point2(0.0, 1.0 / kappa);
    const double rho = v.norm();
    const double angle = std::atan2(sgn * v.x(), -sgn * v.y());
    return {angle / kappa + s0, 1.0 / kappa - sgn * rho};
  }
};

struct LaneLine {
  double offset = 0.0;
  double start = 0.0;
};

struct Road {
  RoadAxis axis;
  double s_min = -std::numeric_limits<double>::infinity();
  double s_max = std::numeric_limits<double>::infinity();
  double left = 0.0, right = 0.0;  // curb offsets (left > 0 > right)
  double taper_begin = 0.0, taper_end = 0.0, taper_extra = 0.0;
  std::vector<LaneLine> lines;

  double curb_left(double s) const {
    if (taper_extra == 0.0) return left;
    const double f = std::clamp((s - taper_begin) / (taper_end - taper_begin), 0.0, 1.0);
    return left + f * taper_extra;
  }
  double curb_right(double) const { return right; }

  // Lower bound on the planar distance from an interior point to the road edge.
  double inside_margin(const Point2& sd) const {
    double m = std::min(sd.y() - curb_right(sd.x()), (curb_left(sd.x()) - sd.y()) / std::hypot(1.0, taper_slope()));
    if (axis.kappa == 0.0) m = std::min({m, sd.x() - s_min, s_max - sd.x()});
    return m;
  }
  double taper_slope() const { return taper_extra == 0.0 ? 0.0 : taper_extra / (taper_end - taper_begin); }

  // Clearance to the road edge, or negative outside.
  double clearance(const Point2& p) const {
    if (taper_extra == 0.0 && std::isinf(s_min) && std::isinf(s_max)) {
      const double d = axis.lateral(p);
      return std::min(d - right, left - d);
    }
    const Point2 sd = axis.curvilinear(p);
    return contains_sd(sd) ? inside_margin(sd) : -1.0;
  }

  bool contains_sd(const Point2& sd, double margin = 0.0) const {
    return sd.x() >= s_min - margin && sd.x() <= s_max + margin && sd.y() <= curb_left(sd.x()) + margin &&
           sd.y() >= curb_right(sd.x()) - margin;
  }
};

struct Object {
  enum class Kind { kCylinder, kBox, kSphere } kind = Kind::kCylinder;
  Point3 center = Point3::Zero();
  Point3 half = Point3::Zero();  // box half extents; cylinder (r, r, half height); sphere (r, -, -)
  double yaw = 0.0;
  double cos_yaw = 1.0, sin_yaw = 0.0;
  double radius = 0.0;  // bounding sphere

  Object(Kind k, const Point3& c, const Point3& h, double y) : kind(k), center(c), half(h), yaw(y) {
    cos_yaw = std::cos(yaw);
    sin_yaw = std::sin(yaw);
    radius = kind == Kind::kSphere ? half.x() : half.norm();
  }
};

double intersect_object(const Object& o, const Point3& origin, const Point3& dir) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  switch (o.kind) {
    case Object::Kind::kSphere: {
      const Point3 oc = origin - o.center;
      const double b = oc.dot(dir);
      const double c = oc.squaredNorm() - o.half.x() * o.half.x();
      const double disc = b * b - c;
      if (disc < 0.0) return inf;
      const double t = -b - std::sqrt(disc);
      return t > 0.0 ? t : inf;
    }
    case Object::Kind::kCylinder: {
      const Point2 oc = (origin - o.center).head<2>();
      const Point2 d = dir.head<2>();
      const double a = d.squaredNorm();
      if (a < 1e-15) return inf;
      const double b = oc.dot(d);
      const double c = oc.squaredNorm() - o.half.x() * o.half.x();
      const double disc = b * b - a * c;
      if (disc < 0.0) return inf;
      const double t = (-b - std::sqrt(disc)) / a;
      if (t <= 0.0) return inf;
      const double z = origin.z() + t * dir.z();
      return std::abs(z - o.center.z()) <= o.half.z() ? t : inf;
    }
    case Object::Kind::kBox: {
      const Point2 oc = (origin - o.center).head<2>();
      const Point2 lo2(o.cos_yaw * oc.x() + o.sin_yaw * oc.y(), -o.sin_yaw * oc.x() + o.cos_yaw * oc.y());
      const Point2 ld2(o.cos_yaw * dir.x() + o.sin_yaw * dir.y(), -o.sin_yaw * dir.x() + o.cos_yaw * dir.y());
      const Point3 lo(lo2.x(), lo2.y(), origin.z() - o.center.z());
      const Point3 ld(ld2.x(), ld2.y(), dir.z());
      double t0 = -inf, t1 = inf;
      for (int i = 0; i < 3; ++i) {
        if (std::abs(ld[i]) < 1e-15) {
          if (std::abs(lo[i]) > o.half[i]) return inf;
          continue;
        }
        double ta = (-o.half[i] - lo[i]) / ld[i];
        double tb = (o.half[i] - lo[i]) / ld[i];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
      }
      if (t0 > t1 || t0 <= 0.0) return inf;
      return t0;
    }
  }
  return inf;
}

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  Surface surface = Surface::kNone;
  bool labeled = false;  // on the labeled part of the mapped road
  Point2 sd = Point2::Zero();
};

}  // namespace

struct Scene::Data {
  ScenarioSpec spec;
  std::vector<Road> roads;  // roads[0] is the mapped road
  std::vector<Object> objects;
  std::vector<RigidTransform> trajectory;
  double z_road = -kSensorHeight;

  bool on_any_road(const Point2& p) const {
    for (const auto& r : roads) {
      if (r.contains_sd(r.axis.curvilinear(p))) return true;
    }
    return false;
  }

  // Labeled part of the mapped road.
  bool on_labeled_road(const Point2& p, Point2* sd = nullptr) const {
    const Road& r = roads[0];
    const Point2 c = r.axis.curvilinear(p);
    if (sd) *sd = c;
    return r.contains_sd(c) && c.x() >= 0.0 && c.x() <= spec.length;
  }

  Hit cast_ground(const Point3& o, const Point3& dir) const {
    Hit hit;
    if (dir.z() >= -1e-12) return hit;
    const double z_side = z_road + spec.curb_height;
    const double t_s = (z_side - o.z()) / dir.z();
    const double t_r = (z_road - o.z()) / dir.z();
    auto at = [&](double t) { return Point2(o.x() + t * dir.x(), o.y() + t * dir.y()); };
    const double t_begin = std::max(t_s, 0.0);
    const double planar = dir.head<2>().norm();
    if (t_begin * planar > kMaxRange + 20.0) return hit;
    // Advance by the clearance to the nearest road edge; bisect on the curb face.
    auto clearance = [&](double t) {
      double m = -1.0;
      for (const auto& r : roads) m = std::max(m, r.clearance(at(t)));
      return m;
    };
    double t = t_begin, prev = t_begin;
    while (true) {
      const double m = clearance(t);
      if (m < 0.0 && t == t_begin && t_s > 0.0) return {t_s, Surface::kSidewalk};
      if (m < 0.0) {
        double lo = prev, hi = t;
        for (int k = 0; k < 40; ++k) {
          const double mid = 0.5 * (lo + hi);
          (on_any_road(at(mid)) ? lo : hi) = mid;
        }
        return {hi, Surface::kCurb};
      }
      if (t >= t_r) break;
      prev = t;
      t = std::min(t_r, t + std::max(0.9 * m, 0.05) / planar);
    }
    return finish_road(at(t_r), t_r);
  }

  Hit finish_road(const Point2& p, double t) const {
    Hit hit{t, Surface::kRoad};
    hit.labeled = on_labeled_road(p, &hit.sd);
    if (hit.labeled) {
      for (const auto& line : roads[0].lines) {
        if (hit.sd.x() >= line.start && std::abs(hit.sd.y() - line.offset) <= kPaintHalfWidth) {
          hit.surface = Surface::kMarking;
        }
      }
    }
    return hit;
  }

  Hit cast(const Point3& o, const Point3& dir) const {
    Hit best = cast_ground(o, dir);
    for (const auto& obj : objects) {
      const Point3 oc = obj.center - o;
      const double tca = oc.dot(dir);
      if (tca + obj.radius < 0.0 || tca - obj.radius > best.t) continue;
      if (oc.squaredNorm() - tca * tca > obj.radius * obj.radius) continue;
      const double t = intersect_object(obj, o, dir);
      if (t < best.t) best = {t, Surface::kObject};
    }
    return best;
  }
};

namespace {

void add_clutter(Scene::Data& d, std::mt19937_64& rng) {
  const Road& road = d.roads[0];
  std::uniform_real_distribution<double> jitter(-2.0, 2.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double z_side = d.z_road + d.spec.curb_height;
  const double s_lo = kStartStation - 40.0, s_hi = d.spec.length + 60.0;

  auto clear_of_roads = [&](const Point2& p, double margin) {
    for (const auto& r : d.roads) {
      if (r.contains_sd(r.axis.curvilinear(p), margin)) return false;
    }
    return true;
  };
  auto place = [&](double s, int side, double gap) {
    const double edge = side > 0 ? road.curb_left(s) : road.curb_right(s);
    return road.axis.point(s, edge + side * gap);
  };

  for (int side : {-1, 1}) {
    for (double s = s_lo; s < s_hi; s += 12.0) {
      const double sj = s + jitter(rng);
      const Point2 p = place(sj, side, 1.0 + 0.3 * unit(rng));
      if (!clear_of_roads(p, 0.5)) continue;
      d.objects.push_back({Object::Kind::kCylinder, Point3(p.x(), p.y(), z_side + 2.5), Point3(0.12, 0.12, 2.5), 0.0});
    }
    for (double s = s_lo + 7.0; s < s_hi; s += 15.0) {
      const double sj = s + jitter(rng);
      const Point2 p = place(sj, side, 3.5 + unit(rng));
      if (!clear_of_roads(p, 2.0)) continue;
      const double trunk = 1.2 + 0.4 * unit(rng);
      d.objects.push_back({Object::Kind::kCylinder, Point3(p.x(), p.y(), z_side + trunk), Point3(0.25, 0.25, trunk),
                           0.0});
      const double crown = 1.2 + 0.6 * unit(rng);
      d.objects.push_back(
          {Object::Kind::kSphere, Point3(p.x(), p.y(), z_side + 2.0 * trunk + 0.7 * crown), Point3(crown, 0, 0), 0.0});
    }
    for (double s = s_lo; s < s_hi; s += 14.0) {
      const double len = 6.0 + 6.0 * unit(rng);
      const double sc = s + 0.5 * len;
      const Point2 p = place(sc, side, 9.0 + 2.0 * unit(rng));
      if (!clear_of_roads(p, 0.5 * len + 1.0)) continue;
      const double height = 3.0 + 5.0 * unit(rng);
      d.objects.push_back({Object::Kind::kBox, Point3(p.x(), p.y(), z_side + 0.5 * height),
                           Point3(0.5 * len, 0.3, 0.5 * height), road.axis.heading(sc)});
    }
    for (double s = s_lo + 11.0; s < s_hi; s += 23.0) {
      const double sj = s + jitter(rng);
      const Point2 p = place(sj, side, 5.5 + unit(rng));
      if (!clear_of_roads(p, 2.0)) continue;
      d.objects.push_back({Object::Kind::kBox, Point3(p.x(), p.y(), z_side + 0.9), Point3(1.0, 0.7, 0.9),
                           road.axis.heading(sj) + 0.6 * (unit(rng) - 0.5)});
    }
  }
}

}  // namespace

Scene::Scene(const ScenarioSpec& spec, int recording) {
  spec.validate();
  auto d = std::make_shared<Data>();
  d->spec = spec;
  const bool merge = spec.archetype == Archetype::kMergeLane;
  const int base = merge ? spec.lane_count - 1 : spec.lane_count;
  const double w = spec.lane_width;

  Road road;
  for (int j = 0; j < base; ++j) road.lines.push_back({(j - 0.5 * (base - 1)) * w, 0.0});
  road.right = road.lines.front().offset - kCurbMargin;
  road.left = road.lines.back().offset + kCurbMargin;
  double vehicle = base % 2 == 1 ? -0.5 * w : 0.0;
  if (merge) {
    const double s_merge = 0.5 * spec.length;
    road.lines.push_back({road.lines.back().offset + w, s_merge});
    road.taper_begin = s_merge - kTaperLength;
    road.taper_end = s_merge;
    road.taper_extra = w;
    vehicle = base % 2 == 1 ? 0.5 * w : 0.0;
  }
  if (base == 1) vehicle = -0.5 * w;
  road.axis.kappa = spec.curvature;
  road.axis.s0 = kStartStation;
  road.axis.anchor = Point2(0.0, -vehicle);
  d->roads.push_back(road);

  if (spec.archetype == Archetype::kIntersection) {
    Road cross;
    cross.right = road.right;
    cross.left = road.left;
    cross.axis.anchor = road.axis.point(0.5 * spec.length, 0.0);
    cross.axis.psi = road.axis.heading(0.5 * spec.length) + 0.5 * std::numbers::pi;
    cross.s_min = -0.5 * spec.length;
    cross.s_max = 0.5 * spec.length;
    d->roads.push_back(cross);
  }

  auto clutter_rng = substream(spec.seed, recording, -1, 0);
  add_clutter(*d, clutter_rng);

  const double s_end = spec.length - kEndMargin;
  for (int k = 0; k < spec.frame_count; ++k) {
    if (k == 0) {
      d->trajectory.push_back(RigidTransform::identity(FrameId::kLidar, FrameId::kMap));
      continue;
    }
    const double s = kStartStation + (s_end - kStartStation) * k / (spec.frame_count - 1);
    const Point2 p = road.axis.point(s, vehicle);
    const Eigen::Quaterniond q(Eigen::AngleAxisd(road.axis.heading(s), Eigen::Vector3d::UnitZ()));
    d->trajectory.emplace_back(q, Eigen::Vector3d(p.x(), p.y(), 0.0), FrameId::kLidar, FrameId::kMap);
  }
  data_ = std::move(d);
}

const std::vector<RigidTransform>& Scene::trajectory() const { return data_->trajectory; }

double Scene::road_height() const { return data_->z_road; }

Surface Scene::surface_at(const Point2& xy) const {
  const Point3 o(xy.x(), xy.y(), 10.0);
  return data_->cast_ground(o, Point3(0.0, 0.0, -1.0)).surface;
}

GroundTruth Scene::ground_truth() const {
  const Data& d = *data_;
  const Road& road = d.roads[0];
  GroundTruth gt;
  gt.trajectory = d.trajectory;

  std::vector<double> stations;
  for (double s = 0.0; s < d.spec.length; s += 1.0) stations.push_back(s);
  stations.push_back(d.spec.length);
  if (road.taper_extra != 0.0) {
    stations.push_back(road.taper_begin);
    stations.push_back(road.taper_end);
  }
  std::sort(stations.begin(), stations.end());
  stations.erase(std::unique(stations.begin(), stations.end(),
                             [](double a, double b) { return std::abs(a - b) < 1e-9; }),
                 stations.end());
  for (double s : stations) gt.road.vertices.push_back(road.axis.point(s, road.curb_right(s)));
  for (auto it = stations.rbegin(); it != stations.rend(); ++it) {
    gt.road.vertices.push_back(road.axis.point(*it, road.curb_left(*it)));
  }
  make_counterclockwise(gt.road.vertices);

  for (std::size_t j = 0; j < road.lines.size(); ++j) {
    Lane lane;
    lane.id = static_cast<int>(j);
    const double begin = std::max(0.0, road.lines[j].start);
    for (double s = begin; s < d.spec.length; s += 1.0) {
      const Point2 p = road.axis.point(s, road.lines[j].offset);
      lane.points.emplace_back(p.x(), p.y(), d.z_road);
    }
    const Point2 p = road.axis.point(d.spec.length, road.lines[j].offset);
    lane.points.emplace_back(p.x(), p.y(), d.z_road);
    gt.lanes.push_back(std::move(lane));
  }
  return gt;
}

PointCloud Scene::scan(const RigidTransform& pose, const NoiseModel& noise, std::mt19937_64& rng,
                       std::vector<Surface>* surfaces) const {
  if (pose.from() != FrameId::kLidar || pose.to() != FrameId::kMap) {
    throw invalid_argument("scan pose must map the lidar frame into the map frame");
  }
  const Data& d = *data_;
  std::normal_distribution<double> range_noise(0.0, 1.0);
  const Eigen::Matrix3d r = pose.rotation_matrix();
  const Point3 origin = pose.translation();
  PointCloud cloud;
  cloud.frame = FrameId::kLidar;
  cloud.intensity.emplace();
  if (surfaces) surfaces->clear();
  for (int ring = 0; ring < kRings; ++ring) {
    const double elev = (-15.0 + 2.0 * ring) * std::numbers::pi / 180.0;
    for (int a = 0; a < kAzimuthSteps; ++a) {
      const double az = a * (2.0 * std::numbers::pi / kAzimuthSteps);
      const Point3 dir_l(std::cos(elev) * std::cos(az), std::cos(elev) * std::sin(az), std::sin(elev));
      const Hit hit = d.cast(origin, r * dir_l);
      if (!(hit.t >= kMinRange && hit.t <= kMaxRange)) continue;
      double range = hit.t;
      if (noise.point_noise_sigma > 0.0) range += noise.point_noise_sigma * range_noise(rng);
      cloud.points.push_back(dir_l * range);
      float intensity = 0.5f;
      switch (hit.surface) {
        case Surface::kRoad:
          intensity = 0.25f;
          break;
        case Surface::kMarking:
          intensity = 0.7f;
          break;
        case Surface::kCurb:
          intensity = 0.3f;
          break;
        case Surface::kSidewalk:
          intensity = 0.2f;
          break;
        default:
          break;
      }
      cloud.intensity->push_back(intensity);
      if (surfaces) surfaces->push_back(hit.surface);
    }
  }
  return cloud;
}

MaskImage Scene::render_mask(const RigidTransform& pose, const CameraModel& cam, const Extrinsics& ext,
                             MaskKind kind, const NoiseModel& noise, std::mt19937_64& rng) const {
  cam.validate();
  ext.validate();
  const Data& d = *data_;
  const RigidTransform cam_to_map = compose(invert(ext.lidar_to_camera), pose);
  const Eigen::Matrix3d r = cam_to_map.rotation_matrix();
  const Point3 origin = cam_to_map.translation();
  auto ray = [&](double u, double v) {
    return Point3(r * Point3((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0));
  };
  auto road_hit = [&](double u, double v) {
    const Point3 dir = ray(u, v);
    const Hit hit = d.cast_ground(origin, dir);
    return hit.labeled;
  };

  MaskImage mask(cam.width, cam.height);
  if (kind == MaskKind::kRoad) {
    const int cw = cam.width + 1;
    std::vector<std::uint8_t> corners(static_cast<std::size_t>(cw) * (cam.height + 1), 0);
    for (int v = 0; v <= cam.height; ++v) {
      for (int u = 0; u <= cam.width; ++u) corners[static_cast<std::size_t>(v) * cw + u] = road_hit(u - 0.5, v - 0.5);
    }
    for (int v = 0; v < cam.height; ++v) {
      for (int u = 0; u < cam.width; ++u) {
        auto c = [&](int du, int dv) { return corners[static_cast<std::size_t>(v + dv) * cw + (u + du)] != 0; };
        if (c(0, 0) && c(1, 0) && c(0, 1) && c(1, 1) && road_hit(u, v)) mask.at(u, v) = 1;
      }
    }
    const int bleed = noise.mask_curb_bleed;
    if (bleed > 0) {
      MaskImage rows(cam.width, cam.height);
      for (int v = 0; v < cam.height; ++v) {
        for (int u = 0; u < cam.width; ++u) {
          std::uint8_t m = 0;
          for (int k = std::max(0, u - bleed); k <= std::min(cam.width - 1, u + bleed); ++k) m |= mask.at(k, v);
          rows.at(u, v) = m;
        }
      }
      for (int v = 0; v < cam.height; ++v) {
        for (int u = 0; u < cam.width; ++u) {
          std::uint8_t m = 0;
          for (int k = std::max(0, v - bleed); k <= std::min(cam.height - 1, v + bleed); ++k) m |= rows.at(u, k);
          mask.at(u, v) = m;
        }
      }
    }
  } else {
    const Road& road = d.roads[0];
    for (int v = 0; v < cam.height; ++v) {
      for (int u = 0; u < cam.width; ++u) {
        const Point3 dir = ray(u, v);
        const Hit hit = d.cast_ground(origin, dir);
        if (!hit.labeled) continue;
        const Point2& sd = hit.sd;
        for (std::size_t j = 0; j < road.lines.size() && j < static_cast<std::size_t>(kMaxLaneLabels); ++j) {
          if (static_cast<int>(j) == d.spec.suppress_lane) continue;
          if (sd.x() >= road.lines[j].start && std::abs(sd.y() - road.lines[j].offset) <= kMaskHalfWidth) {
            mask.at(u, v) = static_cast<std::uint8_t>(j + 1);
          }
        }
      }
    }
  }

  if (noise.mask_dropout_rate > 0.0) {
    std::bernoulli_distribution drop(noise.mask_dropout_rate);
    for (auto& px : mask.pixels) {
      if (px != 0 && drop(rng)) px = 0;
    }
  }
  return mask;
}

CameraModel simulated_camera() { return CameraModel{}; }

Extrinsics simulated_extrinsics() {
  // Camera 0.5 m ahead of and 0.4 m below the lidar, looking forward.
  Eigen::Matrix3d r;
  r << 0, -1, 0, 0, 0, -1, 1, 0, 0;
  const Eigen::Vector3d mount(0.5, 0.0, -0.4);
  Extrinsics ext;
  ext.lidar_to_camera = RigidTransform::from_matrix(r, -r * mount, FrameId::kLidar, FrameId::kCamera);
  return ext;
}

std::mt19937_64 substream(std::uint64_t seed, int recording, int frame, int stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(recording + 1), static_cast<std::uint32_t>(frame + 1),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

namespace {

RigidTransform perturb(const RigidTransform& pose, const NoiseModel& noise, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto direction = [&] {
    Eigen::Vector3d v(g(rng), g(rng), g(rng));
    while (v.norm() < 1e-12) v = Eigen::Vector3d(g(rng), g(rng), g(rng));
    return Eigen::Vector3d(v.normalized());
  };
  const Eigen::Vector3d t = direction() * (noise.pose_translation_noise * u(rng));
  const Eigen::Vector3d axis = direction();
  const double angle = noise.pose_rotation_noise_deg * std::numbers::pi / 180.0 * u(rng);
  const RigidTransform delta(Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis)), t, FrameId::kLidar,
                             FrameId::kLidar);
  return compose(delta, pose);
}

}  // namespace

std::vector<Recording> gen_scenario(const ScenarioSpec& spec) {
  spec.validate();
  const int count = spec.archetype == Archetype::kIntersection ? 2 : 1;
  std::vector<Recording> out;
  for (int rec = 0; rec < count; ++rec) {
    const Scene scene(spec, rec);
    Recording recording;
    if (count > 1) recording.name = "recording_" + std::to_string(rec);
    DatasetBundle& bundle = recording.bundle;
    bundle.camera = simulated_camera();
    bundle.extrinsics = simulated_extrinsics();
    bundle.ground_truth = scene.ground_truth();
    const auto& trajectory = scene.trajectory();
    for (int k = 0; k < spec.frame_count; ++k) {
      const RigidTransform& pose = trajectory[static_cast<std::size_t>(k)];
      FrameData frame;
      auto scan_rng = substream(spec.seed, rec, k, 0);
      auto mask_rng = substream(spec.seed, rec, k, 1);
      auto pose_rng = substream(spec.seed, rec, k, 2);
      frame.scan = scene.scan(pose, spec.noise, scan_rng);
      frame.road_mask = scene.render_mask(pose, bundle.camera, bundle.extrinsics, MaskKind::kRoad, spec.noise, mask_rng);
      frame.lane_mask =
          scene.render_mask(pose, bundle.camera, bundle.extrinsics, MaskKind::kLanes, spec.noise, mask_rng);
      frame.pose_prior = k == 0 ? pose : perturb(pose, spec.noise, pose_rng);
      bundle.frames.push_back(std::move(frame));
    }
    out.push_back(std::move(recording));
  }
  return out;
}

}  // namespace hdmap
