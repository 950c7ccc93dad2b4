#pragma once

#include "hdmap/dataset.hpp"

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace hdmap {

enum class Archetype { kStraightRoad, kCurvedRoad, kMergeLane, kIntersection, kHighway };

std::string_view archetype_name(Archetype a);
Archetype parse_archetype(std::string_view name);

struct NoiseModel {
  double point_noise_sigma = 0.02;  ///< lidar range noise, meters
  double mask_dropout_rate = 0.0;
  int mask_curb_bleed = 0;  ///< road mask dilation, pixels
  double pose_translation_noise = 0.0;  ///< meters
  double pose_rotation_noise_deg = 0.0;

  void validate() const;
};

struct ScenarioSpec {
  Archetype archetype = Archetype::kStraightRoad;
  double length = 100.0;
  int lane_count = 3;  ///< lane lines, including a merging line
  double lane_width = 3.5;
  double curb_height = 0.15;
  double curvature = 0.0;
  int frame_count = 96;
  std::uint64_t seed = 1;
  int suppress_lane = -1;  ///< lane line left out of every lane mask; -1 = none
  NoiseModel noise;

  /// Defaults of the given archetype.
  static ScenarioSpec preset(Archetype archetype);
  void validate() const;
};

enum class MaskKind { kRoad, kLanes };

enum class Surface : std::uint8_t { kNone, kRoad, kMarking, kCurb, kSidewalk, kObject };

/// Static world of one recording: road surface with curbs, lane lines and
/// roadside clutter, with the map frame at the first sensor pose.
class Scene {
 public:
  Scene(const ScenarioSpec& spec, int recording);

  GroundTruth ground_truth() const;
  const std::vector<RigidTransform>& trajectory() const;

  /// Simulated sweep in the lidar frame. `surfaces`, when given, receives the
  /// surface hit by each returned point.
  PointCloud scan(const RigidTransform& pose, const NoiseModel& noise, std::mt19937_64& rng,
                  std::vector<Surface>* surfaces = nullptr) const;

  MaskImage render_mask(const RigidTransform& pose, const CameraModel& cam, const Extrinsics& ext, MaskKind kind,
                        const NoiseModel& noise, std::mt19937_64& rng) const;

  /// Surface under a map-frame (x, y) location and its ground height.
  Surface surface_at(const Point2& xy) const;
  double road_height() const;

  struct Data;

 private:
  std::shared_ptr<const Data> data_;
};

struct Recording {
  std::string name;
  DatasetBundle bundle;  ///< ground_truth is always set
};

/// Camera and mounting used by the simulator.
CameraModel simulated_camera();
Extrinsics simulated_extrinsics();

/// One recording per map (two for the intersection archetype). Fully
/// determined by the ScenarioSpec, seed included.
std::vector<Recording> gen_scenario(const ScenarioSpec& spec);

/// Per-frame random stream derived from (seed, recording, frame, stream).
std::mt19937_64 substream(std::uint64_t seed, int recording, int frame, int stream);

}  // namespace hdmap
