#pragma once

#include "hdmap/geometry.hpp"
#include "hdmap/polygon.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

namespace hdmap {

struct ElevationHistogram {
  int bin_count = 0;
  double z_min = 0.0;
  double z_max = 0.0;
  std::vector<std::int64_t> counts;

  double bin_width() const { return (z_max - z_min) / bin_count; }
  /// Lower edge of bin `i` (i in [0, bin_count]).
  double boundary(int i) const { return z_min + i * bin_width(); }
  int bin_of(double z) const;
};

/// Histogram over [min, max] of `values`; throws when fewer than two distinct values exist.
ElevationHistogram make_histogram(std::span<const double> values, int bin_count);

/// Between-class variance ω₀ω₁(μ₀−μ₁)² for splitting before bin `boundary`,
/// evaluated with bin centers as class values.
double between_class_variance(const ElevationHistogram& hist, int boundary);

/// Index of the Otsu boundary (1..bin_count-1). Among exactly tied maxima the
/// lowest tied run wins, and within it the middle boundary (lower middle for
/// even runs).
int otsu_boundary(const ElevationHistogram& hist);

/// Otsu threshold on the bin boundaries of a [min, max] histogram.
double otsu_threshold(std::span<const double> values, int bin_count = 256);

struct CurbFilterConfig {
  int bin_count = 256;
  int min_points = 50;
  double sigma_band = 1.0;  ///< k in [μ1 − kσ1, μ1 + kσ1]
  /// Class-mean gap below which the histogram is treated as unimodal (no curb).
  double min_mode_separation = 0.05;
  /// false: the class with more points is the road. true: the lower-mean class.
  bool road_is_lower_class = false;

  void validate() const;
};

struct CurbFilterReport {
  double otsu_threshold = 0.0;
  double mu1 = 0.0;
  double sigma1 = 0.0;
  double mu2 = 0.0;
  double sigma2 = 0.0;
  double delta = 0.0;  ///< excluded / total
  std::size_t total = 0;
  std::size_t kept = 0;
  bool split_applied = false;  ///< false on the degenerate / unimodal path
};

/// Otsu split on z, σ-band pruning around the road class.
std::pair<PointCloud, CurbFilterReport> curb_filter(const PointCloud& road_cloud, const CurbFilterConfig& config);

struct ConcaveHullConfig {
  int k = 8;
  int max_k_factor = 3;  ///< retries go up to max_k_factor * k before the convex fallback

  void validate() const;
};

struct ConcaveHullResult {
  RoadPolygon polygon;
  int k_used = 0;
  bool convex_fallback = false;
};

/// k-nearest-neighbour gift wrapping (Moreira & Santos). Returns a
/// counterclockwise simple polygon whose vertices are input points and which
/// contains every input point.
ConcaveHullResult concave_hull_ex(std::span<const Point2> points, const ConcaveHullConfig& config);
RoadPolygon concave_hull(std::span<const Point2> points, int k);

/// Road points accumulated in the map frame, bucketed on a 2D grid. Sums are
/// kept in fixed point so the centroids do not depend on update order.
class RoadAccumulator {
 public:
  explicit RoadAccumulator(double cell = 0.2);

  /// Transforms a filtered lidar-frame road cloud into the map and adds it.
  void update(const PointCloud& filtered_scan, const RigidTransform& pose);

  /// One centroid per occupied cell, ordered by cell index.
  std::vector<Point2> points() const;
  std::size_t cell_count() const { return cells_.size(); }
  double cell_size() const { return cell_; }

 private:
  struct Sum {
    std::int64_t x = 0;
    std::int64_t y = 0;
    std::int64_t n = 0;
  };
  double cell_;
  std::map<std::pair<int, int>, Sum> cells_;
};

/// Concave hull over the accumulated road points.
RoadPolygon finalize_road(const RoadAccumulator& state, const ConcaveHullConfig& config);

}  // namespace hdmap
