#include "hdmap/pipeline.hpp"

#include "hdmap/error.hpp"

#include <charconv>
#include <cmath>
#include <variant>

namespace hdmap {

namespace {

using Field = std::variant<double*, int*, bool*>;

struct Option {
  const char* key;
  Field field;
};

std::vector<Option> options(PipelineConfig& c) {
  return {
      {"ndt.cell_size", &c.ndt.cell_size},
      {"ndt.min_points_per_cell", &c.ndt.min_points_per_cell},
      {"ndt.eigen_floor_ratio", &c.ndt.eigen_floor_ratio},
      {"ndt.max_iterations", &c.ndt.max_iterations},
      {"ndt.convergence_epsilon", &c.ndt.convergence_epsilon},
      {"ndt.outlier_uniform_weight", &c.ndt.outlier_uniform_weight},
      {"ndt.max_step", &c.ndt.max_step},
      {"ndt.max_step_halvings", &c.ndt.max_step_halvings},
      {"projection.range_limit", &c.projection.range_limit},
      {"projection.min_depth", &c.projection.min_depth},
      {"projection.road_range_limit", &c.projection.road_range_limit},
      {"curb.bin_count", &c.curb.bin_count},
      {"curb.min_points", &c.curb.min_points},
      {"curb.sigma_band", &c.curb.sigma_band},
      {"curb.min_mode_separation", &c.curb.min_mode_separation},
      {"curb.road_is_lower_class", &c.curb.road_is_lower_class},
      {"hull.k", &c.hull.k},
      {"hull.max_k_factor", &c.hull.max_k_factor},
      {"lane.L1", &c.lane.smoothing_distance},
      {"lane.L2", &c.lane.clustering_distance},
      {"lane.l", &c.lane.look_back},
      {"lane.S", &c.lane.missing_scan_limit},
      {"lane.roi_width", &c.lane.roi_width},
      {"lane.cluster_tolerance_lidar", &c.lane.cluster_tolerance_lidar},
      {"lane.cluster_tolerance_map", &c.lane.cluster_tolerance_map},
      {"lane.min_cluster_size", &c.lane.min_cluster_size},
      {"lane.min_lane_length", &c.lane.min_lane_length},
      {"lane.default_lane_width", &c.lane.default_lane_width},
      {"lane.normal_window", &c.lane.normal_window},
      {"pipeline.scan_voxel", &c.scan_voxel},
      {"pipeline.registration_range", &c.registration_range},
      {"pipeline.map_voxel", &c.map_voxel},
      {"pipeline.road_cell", &c.road_cell},
      {"pipeline.grid_rebuild_interval", &c.grid_rebuild_interval},
      {"pipeline.lane_completion", &c.lane_completion},
  };
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw parse_error("invalid value '" + text + "' for " + key);
  return value;
}

Error with_frame(const Error& e, int frame) {
  return Error(e.code(), "frame " + std::to_string(frame) + ": " + e.what());
}

}  // namespace

void PipelineConfig::validate() const {
  ndt.validate();
  projection.validate();
  curb.validate();
  hull.validate();
  lane.validate();
  if (!(scan_voxel > 0.0) || !(map_voxel > 0.0) || !(road_cell > 0.0)) {
    throw invalid_argument("voxel sizes must be positive");
  }
  if (!(registration_range >= 0.0)) throw invalid_argument("pipeline.registration_range must be >= 0");
  if (grid_rebuild_interval < 1) throw invalid_argument("pipeline.grid_rebuild_interval must be >= 1");
}

void PipelineConfig::set(const std::string& key, const std::string& value) {
  for (auto& opt : options(*this)) {
    if (key != opt.key) continue;
    if (auto* d = std::get_if<double*>(&opt.field)) {
      const double v = parse_number<double>(key, value);
      if (!std::isfinite(v)) throw parse_error("non-finite value for " + key);
      **d = v;
    } else if (auto* i = std::get_if<int*>(&opt.field)) {
      **i = parse_number<int>(key, value);
    } else {
      bool* b = std::get<bool*>(opt.field);
      if (value == "true" || value == "1") {
        *b = true;
      } else if (value == "false" || value == "0") {
        *b = false;
      } else {
        throw parse_error("invalid boolean '" + value + "' for " + key);
      }
    }
    return;
  }
  throw parse_error("unknown config key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> PipelineConfig::entries() const {
  std::vector<std::pair<std::string, std::string>> out;
  PipelineConfig copy = *this;
  for (const auto& opt : options(copy)) {
    char buf[64];
    std::string text;
    if (auto* d = std::get_if<double*>(&opt.field)) {
      auto res = std::to_chars(buf, buf + sizeof buf, **d);
      text.assign(buf, res.ptr);
    } else if (auto* i = std::get_if<int*>(&opt.field)) {
      text = std::to_string(**i);
    } else {
      text = *std::get<bool*>(opt.field) ? "true" : "false";
    }
    out.emplace_back(opt.key, text);
  }
  return out;
}

PipelineResult run_pipeline(const DatasetBundle& bundle, const PipelineConfig& config) {
  config.validate();
  bundle.validate();
  if (bundle.frames.empty()) throw invalid_argument("dataset has no frames");

  PipelineResult result;
  result.map_cloud.frame = FrameId::kMap;
  RoadAccumulator road(config.road_cell);
  LaneTracker tracker(config.lane);
  std::optional<NdtGrid> grid;

  for (std::size_t k = 0; k < bundle.frames.size(); ++k) {
    const int index = static_cast<int>(k);
    try {
      const FrameData& frame = bundle.frames[k];
      FrameReport rep;
      rep.frame = index;

      const PointCloud fov = crop_to_fov(frame.scan, bundle.camera, bundle.extrinsics, config.projection.min_depth);
      const PointCloud road_src = config.projection.road_range_limit > 0.0
                                      ? crop_to_range(fov, config.projection.road_range_limit)
                                      : fov;
      const PointCloud road_points = extract_label(
          project_mask(road_src, frame.road_mask, bundle.camera, bundle.extrinsics, config.projection.min_depth), 1);
      rep.road_points = road_points.size();

      if (result.map_cloud.empty()) {
        rep.registration.transform = frame.pose_prior;
        rep.registration.converged = true;
      } else {
        if (!grid || k % static_cast<std::size_t>(config.grid_rebuild_interval) == 0) {
          grid = build_ndt_grid(result.map_cloud, config.ndt);
        }
        const PointCloud source =
            config.registration_range > 0.0 ? crop_to_range(frame.scan, config.registration_range) : frame.scan;
        rep.registration = ndt_align(*grid, voxel_downsample(source, config.scan_voxel), frame.pose_prior, config.ndt);
      }
      const RigidTransform& pose = rep.registration.transform;
      result.map_cloud = accumulate_scan(result.map_cloud, frame.scan, rep.registration, config.map_voxel);
      result.poses.push_back(pose);

      if (static_cast<int>(road_points.size()) >= config.curb.min_points) {
        auto [filtered, curb] = curb_filter(road_points, config.curb);
        rep.curb = curb;
        rep.curb_applied = true;
        result.curb_total += curb.total;
        result.curb_kept += curb.kept;
        road.update(filtered, pose);
      }

      const PointCloud lane_src = crop_to_range(fov, config.projection.range_limit);
      const PointCloud lane_points = extract_nonzero(
          project_mask(lane_src, frame.lane_mask, bundle.camera, bundle.extrinsics, config.projection.min_depth));
      rep.lane_points = lane_points.size();
      tracker.update(split_rois(lane_points, config.lane.roi_width), pose);
      result.frames.push_back(rep);
    } catch (const Error& e) {
      throw with_frame(e, index);
    }
  }

  if (result.curb_total > 0) {
    result.curb_delta = 1.0 - static_cast<double>(result.curb_kept) / static_cast<double>(result.curb_total);
  }
  if (road.cell_count() < 3) throw invalid_argument("too few road points to extract a road polygon");
  result.road = finalize_road(road, config.hull);
  result.lanes = finalize_lanes(tracker);
  if (config.lane_completion && (result.lanes.size() >= 2 || config.lane.default_lane_width > 0.0)) {
    result.lanes = complete_lanes(result.lanes, result.road, config.lane, &result.completion);
    result.completion_applied = true;
  }
  return result;
}

}  // namespace hdmap
