#pragma once

#include "hdmap/geometry.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace hdmap {

/// Pinhole intrinsics. No distortion model.
struct CameraModel {
  double fx = 500.0;
  double fy = 500.0;
  double cx = 320.0;
  double cy = 240.0;
  int width = 640;
  int height = 480;

  void validate() const;

  /// Pixel coordinates of a camera-frame point, or nullopt when it is closer
  /// than `min_depth` along the optical axis.
  std::optional<Point2> project(const Point3& p_camera, double min_depth) const;
};

struct Extrinsics {
  RigidTransform lidar_to_camera = RigidTransform::identity(FrameId::kLidar, FrameId::kCamera);

  void validate() const;
};

/// Row-major 8-bit label image: 0 background, 1 road, or 1..K lane ids.
struct MaskImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  MaskImage() = default;
  MaskImage(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

  std::uint8_t at(int u, int v) const { return pixels[static_cast<std::size_t>(v) * width + u]; }
  std::uint8_t& at(int u, int v) { return pixels[static_cast<std::size_t>(v) * width + u]; }
};

inline constexpr int kMaxLaneLabels = 8;

struct ProjectionConfig {
  double range_limit = 20.0;  ///< lane crop distance L, meters
  double min_depth = 0.5;
  /// Optional range crop for the road projection; 0 disables it.
  double road_range_limit = 0.0;

  void validate() const;
};

/// Keeps points in front of the camera (depth >= min_depth) whose projection
/// falls inside the image.
PointCloud crop_to_fov(const PointCloud& cloud, const CameraModel& cam, const Extrinsics& ext,
                       double min_depth = 0.5);

/// Keeps points within Euclidean distance `limit` of the frame origin.
PointCloud crop_to_range(const PointCloud& cloud, double limit);

/// Nearest pixel index for a continuous coordinate, rounding .5 down.
int nearest_pixel(double coordinate);

/// Copies the cloud and sets each point's label to the mask value under its
/// projection. Points that do not project (behind the camera) get label 0.
PointCloud project_mask(const PointCloud& cloud, const MaskImage& mask, const CameraModel& cam,
                        const Extrinsics& ext, double min_depth = 0.5);

/// Sub-cloud of points whose label equals `label`, order preserved.
PointCloud extract_label(const PointCloud& cloud, std::uint8_t label);

/// Sub-cloud of points with a nonzero label, order preserved.
PointCloud extract_nonzero(const PointCloud& cloud);

}  // namespace hdmap
