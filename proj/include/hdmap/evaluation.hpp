#pragma once

#include "hdmap/lane.hpp"
#include "hdmap/polygon.hpp"

#include <vector>

namespace hdmap {

struct RoadReport {
  double area_pred = 0.0;
  double area_gt = 0.0;
  double area_error_abs = 0.0;      ///< |A_pred − A_gt|
  double area_error_symdiff = 0.0;  ///< area of the symmetric difference
  double delta = 0.0;               ///< curb-filter excluded fraction, copied through
};

/// Throws when either polygon is degenerate (fewer than 3 vertices, zero area
/// or self-intersecting). Orientation is not required.
RoadReport road_metrics(const RoadPolygon& pred, const RoadPolygon& gt, double delta);

/// Closest point to `p` on the polyline (segment projection).
Point3 closest_on_polyline(const Point3& p, const std::vector<Point3>& polyline);

struct LaneMetrics {
  std::vector<Point3> residuals;  ///< closest ground-truth point minus predicted waypoint
  double translation_error = 0.0;  ///< mean residual norm
  double sigma_x = 0.0;
  double sigma_y = 0.0;
};

LaneMetrics lane_metrics(const Lane& pred, const Lane& gt);

struct LaneMatch {
  int pred_id = 0;
  int gt_id = 0;
  double mean_offset = 0.0;
  LaneMetrics metrics;
};

struct LaneReport {
  std::vector<LaneMatch> matches;  ///< ordered by predicted lane
  std::vector<int> unmatched_pred;
  std::vector<int> unmatched_gt;
  double mean_translation_error = 0.0;
  double sigma_x = 0.0;  ///< over every matched residual
  double sigma_y = 0.0;
};

/// One-to-one matching by smallest mean offset, within `gate` meters.
LaneReport evaluate_lanes(const std::vector<Lane>& pred, const std::vector<Lane>& gt, double gate = 2.0);

}  // namespace hdmap
