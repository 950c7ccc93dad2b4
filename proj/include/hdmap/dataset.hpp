#pragma once

#include "hdmap/geometry.hpp"
#include "hdmap/lane.hpp"
#include "hdmap/polygon.hpp"
#include "hdmap/projection.hpp"

#include <optional>
#include <vector>

namespace hdmap {

struct GroundTruth {
  RoadPolygon road;
  std::vector<Lane> lanes;
  std::vector<RigidTransform> trajectory;  ///< exact lidar-to-map pose per frame
};

struct FrameData {
  PointCloud scan;  ///< lidar frame, with intensity
  MaskImage road_mask;
  MaskImage lane_mask;
  RigidTransform pose_prior = RigidTransform::identity(FrameId::kLidar, FrameId::kMap);
};

struct DatasetBundle {
  CameraModel camera;
  Extrinsics extrinsics;
  std::vector<FrameData> frames;
  std::optional<GroundTruth> ground_truth;

  /// Throws when masks disagree with the camera or clouds are malformed.
  void validate() const;
};

}  // namespace hdmap
