#include "hdmap/error.hpp"
#include "hdmap/evaluation.hpp"
#include "hdmap/pipeline.hpp"
#include "hdmap/scenario.hpp"

#include <doctest.h>

#include <string>

using namespace hdmap;

namespace {

DatasetBundle straight(int frames, bool noisy) {
  ScenarioSpec spec = ScenarioSpec::preset(Archetype::kStraightRoad);
  spec.frame_count = frames;
  if (!noisy) {
    spec.noise = NoiseModel{};
    spec.noise.point_noise_sigma = 0.0;
    spec.noise.mask_dropout_rate = 0.0;
    spec.noise.mask_curb_bleed = 0;
  } else {
    spec.noise.pose_translation_noise = 0.2;
    spec.noise.pose_rotation_noise_deg = 2.0;
  }
  return gen_scenario(spec)[0].bundle;
}

}  // namespace

TEST_CASE("clean straight road is mapped") {
  const auto bundle = straight(20, false);
  const auto result = run_pipeline(bundle, PipelineConfig{});
  const auto road = road_metrics(result.road, bundle.ground_truth->road, result.curb_delta);
  CHECK(road.area_error_symdiff / road.area_gt <= 0.05);
  CHECK(result.frames.size() == 20);
  CHECK(result.poses.size() == 20);
  for (std::size_t k = 0; k < 20; ++k) {
    CHECK((result.poses[k].translation() - bundle.ground_truth->trajectory[k].translation()).norm() < 0.1);
  }
  const auto lanes = evaluate_lanes(result.lanes, bundle.ground_truth->lanes);
  CHECK(lanes.matches.size() == bundle.ground_truth->lanes.size());
  CHECK(lanes.mean_translation_error < 0.2);
}

TEST_CASE("frames without lane labels still yield a road") {
  auto bundle = straight(12, false);
  for (auto& f : bundle.frames) f.lane_mask = MaskImage(bundle.camera.width, bundle.camera.height);
  PipelineResult result;
  REQUIRE_NOTHROW(result = run_pipeline(bundle, PipelineConfig{}));
  CHECK(result.lanes.empty());
  CHECK(result.road.vertices.size() >= 3);
  CHECK_NOTHROW(result.road.validate());
}

TEST_CASE("pipeline is deterministic") {
  const auto bundle = straight(10, true);
  const auto a = run_pipeline(bundle, PipelineConfig{});
  const auto b = run_pipeline(bundle, PipelineConfig{});
  CHECK(a.road.vertices == b.road.vertices);
  REQUIRE(a.lanes.size() == b.lanes.size());
  for (std::size_t i = 0; i < a.lanes.size(); ++i) CHECK(a.lanes[i].points == b.lanes[i].points);
  CHECK(a.map_cloud.points == b.map_cloud.points);
  CHECK(a.curb_delta == b.curb_delta);
}

TEST_CASE("errors name the failing frame") {
  auto bundle = straight(4, false);
  bundle.frames[2].road_mask = MaskImage(8, 8);
  try {
    run_pipeline(bundle, PipelineConfig{});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).rfind("frame 2", 0) == 0);
  }
  CHECK_THROWS_AS(run_pipeline(DatasetBundle{}, PipelineConfig{}), Error);
}

TEST_CASE("config keys") {
  PipelineConfig c;
  c.set("lane.L1", "40");
  CHECK(c.lane.smoothing_distance == 40.0);
  c.set("pipeline.lane_completion", "false");
  CHECK_FALSE(c.lane_completion);
  CHECK_THROWS_AS(c.set("lane.L9", "1"), Error);
  CHECK_THROWS_AS(c.set("lane.L1", "forty"), Error);
  CHECK_THROWS_AS(c.set("lane.L1", "nan"), Error);
  c.scan_voxel = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
}
