#pragma once

#include "hdmap/geometry.hpp"

#include <span>
#include <vector>

namespace hdmap {

/// Ordered simple polygon in the map frame (x, y). The ring is implicitly
/// closed: the last vertex connects back to the first.
struct RoadPolygon {
  std::vector<Point2> vertices;

  /// Throws unless the polygon has at least 3 vertices, is simple and
  /// counterclockwise.
  void validate() const;
};

double signed_area(std::span<const Point2> ring);

/// Shoelace area, absolute value.
double polygon_area(const RoadPolygon& poly);

/// Orientation of c relative to the directed line a->b: > 0 left, < 0 right.
double orient(const Point2& a, const Point2& b, const Point2& c);

/// True when the closed segments [a,b] and [c,d] share at least one point.
bool segments_intersect(const Point2& a, const Point2& b, const Point2& c, const Point2& d);

double point_segment_distance(const Point2& p, const Point2& a, const Point2& b);

/// Inside or within `tolerance` of the boundary.
bool point_in_polygon(const Point2& p, std::span<const Point2> ring, double tolerance = 1e-9);

/// No two non-adjacent edges touch and adjacent edges only share their vertex.
bool is_simple(std::span<const Point2> ring);

/// Counterclockwise convex hull without collinear boundary points.
std::vector<Point2> convex_hull(std::span<const Point2> points);

/// Area of the intersection of two simple polygons (either orientation).
double intersection_area(std::span<const Point2> a, std::span<const Point2> b);

/// Area of (A ∪ B) \ (A ∩ B).
double symmetric_difference_area(std::span<const Point2> a, std::span<const Point2> b);

/// Reverses the ring when it is clockwise.
void make_counterclockwise(std::vector<Point2>& ring);

}  // namespace hdmap
