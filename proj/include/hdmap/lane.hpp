#pragma once

#include "hdmap/geometry.hpp"
#include "hdmap/polygon.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace hdmap {

struct Lane {
  int id = 0;
  std::vector<Point3> points;  ///< map frame, ordered along the lane
  bool synthetic = false;      ///< generated by lane completion
  std::size_t clipped_points = 0;

  double length() const;
};

struct LaneConfig {
  double smoothing_distance = 31.0;   ///< L1
  double clustering_distance = 31.0;  ///< L2
  int look_back = 5;                  ///< l
  int missing_scan_limit = 5;         ///< S
  double roi_width = 1.0;
  double cluster_tolerance_lidar = 0.5;
  double cluster_tolerance_map = 1.0;
  int min_cluster_size = 5;
  double min_lane_length = 5.0;     ///< shorter lanes are dropped when finalizing
  double default_lane_width = 0.0;  ///< used by completion when fewer than 2 lanes exist; 0 = unset
  double normal_window = 5.0;       ///< half window (m) of the local fit used for lane normals

  void validate() const;
};

/// Splits lane points into lateral bands of `roi_width` seeded from the label
/// channel: each label contributes a seed curve y(x), seeds closer than
/// `roi_width` are merged, and every point goes to the nearest seed within
/// roi_width / 2. Groups are ordered by their lateral offset at x = 0.
std::vector<PointCloud> split_rois(const PointCloud& lane_cloud, double roi_width);

/// Connected components of the graph joining points closer than `tolerance`.
/// Components with fewer than `min_size` points are dropped. Each cluster lists
/// member indices in ascending order; clusters are ordered by lowest member.
std::vector<std::vector<std::size_t>> euclidean_cluster(std::span<const Point3> points, double tolerance,
                                                        int min_size);

enum class CurveKind { kLinear, kQuadratic, kLogarithmic };

/// Local 2D frame: s runs along `axis`, the lateral coordinate along its left normal.
struct CurveFrame {
  Point2 origin = Point2::Zero();
  Point2 axis = Point2::UnitX();

  Point2 normal() const { return {-axis.y(), axis.x()}; }
  double along(const Point3& p) const { return (p.head<2>() - origin).dot(axis); }
  double lateral(const Point3& p) const { return (p.head<2>() - origin).dot(normal()); }
};

/// Principal-axis frame of the points, centered on their mean. The axis is
/// oriented to have a non-negative dot product with `direction_hint`.
CurveFrame pca_frame(std::span<const Point3> points, const Point2& direction_hint = Point2::UnitX());

struct CurveFit {
  CurveKind kind = CurveKind::kQuadratic;
  CurveFrame frame;
  /// Quadratic: y = a s² + b s + c. Logarithmic: y = a ln(s − s_min + 1) + b (c = 0).
  /// Linear: y = b s + c (a = 0).
  double a = 0.0, b = 0.0, c = 0.0;
  double s_min = 0.0;
  double z_slope = 0.0, z_offset = 0.0;
  double rms = 0.0;
  bool reduced = false;  ///< requested order was rank deficient; a line was fitted

  double lateral_at(double s) const;
  double z_at(double s) const;
  Point3 evaluate(double s) const;
  /// Replaces every point by the curve value at its own s.
  std::vector<Point3> resample(std::span<const Point3> points) const;
};

/// Least-squares fit in `frame` (principal-axis frame when absent). z is fitted
/// linearly in s. Throws when fewer than two distinct s values exist.
CurveFit fit_curve(std::span<const Point3> points, CurveKind kind,
                   const std::optional<CurveFrame>& frame = std::nullopt);

struct LaneEvent {
  enum class Kind { kSpawn, kExtend, kSmooth, kGapClose, kCluster };
  int lane_id = 0;
  Kind kind = Kind::kExtend;
  std::size_t n = 0;  ///< lane size after the event
  std::size_t m = 0;  ///< points added by the last update
  std::size_t N = 0;  ///< smoothing index after the event
  double distance = 0.0;
};

struct LaneTrack {
  Lane lane;
  std::size_t smoothing_index = 0;  ///< N: points before it are frozen
  std::size_t last_added = 0;       ///< m
  std::size_t clustered = 0;        ///< points before it are reference points
  double smoothing_distance = 0.0;
  double clustering_distance = 0.0;
  int missing_scans = 0;
};

/// Per-lane waypoint state machine.
class LaneTracker {
 public:
  explicit LaneTracker(const LaneConfig& config);

  /// One scan: per-ROI lane clouds in the lidar frame and the registered pose.
  void update(const std::vector<PointCloud>& roi_clouds, const RigidTransform& pose);

  /// One scan given as already-smoothed map-frame segments (one per ROI).
  void update_segments(const std::vector<std::vector<Point3>>& segments);

  const std::vector<LaneTrack>& tracks() const { return tracks_; }
  const std::vector<LaneEvent>& events() const { return events_; }
  const LaneConfig& config() const { return config_; }

  /// Map-frame segment for one ROI: clusters, centroids, quadratic fit in the
  /// lidar frame, transform into the map.
  std::vector<Point3> scan_segment(const PointCloud& roi_cloud, const RigidTransform& pose) const;

 private:
  void merge(LaneTrack& track, const std::vector<Point3>& segment);
  void apply_rules(LaneTrack& track);

  LaneConfig config_;
  std::vector<LaneTrack> tracks_;
  std::vector<LaneEvent> events_;
  int next_id_ = 0;
};

/// Smooths the open portions, reduces to reference points and drops lanes
/// shorter than min_lane_length. Lanes are renumbered from 0.
std::vector<Lane> finalize_lanes(const LaneTracker& tracker);

/// Replaces points by centroids of consecutive runs spanning at most `spacing` of arc length.
std::vector<Point3> reference_points(std::span<const Point3> points, double spacing);

struct LaneCompletionReport {
  double lane_width = 0.0;
  double road_extent = 0.0;
  int expected_lanes = 0;
  int generated_lanes = 0;
};

/// Adds lanes missing between the curbs by offsetting the nearest detected
/// lane along its normals. Generated points outside the road are removed.
std::vector<Lane> complete_lanes(const std::vector<Lane>& lanes, const RoadPolygon& road, const LaneConfig& config,
                                 LaneCompletionReport* report = nullptr);

}  // namespace hdmap
