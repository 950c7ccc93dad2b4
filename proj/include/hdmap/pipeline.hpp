#pragma once

#include "hdmap/dataset.hpp"
#include "hdmap/lane.hpp"
#include "hdmap/ndt.hpp"
#include "hdmap/projection.hpp"
#include "hdmap/road.hpp"

#include <string>
#include <utility>
#include <vector>

namespace hdmap {

struct PipelineConfig {
  NdtConfig ndt;
  ProjectionConfig projection;
  CurbFilterConfig curb;
  ConcaveHullConfig hull{120, 3};  ///< ring-sampled road points need a wide neighbourhood
  LaneConfig lane;
  double scan_voxel = 0.5;  ///< registration input downsampling
  double registration_range = 25.0;  ///< registration input range crop, 0 = off
  double map_voxel = 0.25;  ///< accumulated map downsampling
  double road_cell = 0.2;
  int grid_rebuild_interval = 1;  ///< rebuild the NDT target every k frames
  bool lane_completion = true;

  void validate() const;

  /// Sets one option from its textual key and value; unknown keys throw.
  void set(const std::string& key, const std::string& value);

  /// Every option as key/value text, in a stable order.
  std::vector<std::pair<std::string, std::string>> entries() const;
};

struct FrameReport {
  int frame = 0;
  RegistrationResult registration;
  CurbFilterReport curb;
  bool curb_applied = false;
  std::size_t road_points = 0;
  std::size_t lane_points = 0;
};

struct PipelineResult {
  PointCloud map_cloud;
  RoadPolygon road;
  std::vector<Lane> lanes;
  std::vector<RigidTransform> poses;
  std::vector<FrameReport> frames;
  double curb_delta = 0.0;  ///< excluded / total over all filtered frames
  std::size_t curb_total = 0;
  std::size_t curb_kept = 0;
  bool completion_applied = false;
  LaneCompletionReport completion;
};

/// Registration, road and lane mapping over every frame in index order.
PipelineResult run_pipeline(const DatasetBundle& bundle, const PipelineConfig& config);

}  // namespace hdmap
