#pragma once

#include "hdmap/dataset.hpp"
#include "hdmap/evaluation.hpp"
#include "hdmap/pipeline.hpp"
#include "hdmap/scenario.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace hdmap::io {

namespace fs = std::filesystem;

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Writes to a temporary sibling and renames it over `path`.
void atomic_write(const fs::path& path, std::string_view content);
std::string read_file(const fs::path& path);

/// `key=value` lines; blank lines and lines starting with '#' are skipped.
/// Duplicate keys and malformed lines are errors naming the file and line.
KeyValues read_key_values(const fs::path& path);
std::string format_key_values(const KeyValues& values);

/// Fixed six-decimal rendering used by every CSV export.
std::string format_fixed(double value, int decimals = 6);

struct CsvRow {
  int line = 0;
  std::vector<double> values;
};

/// Numeric CSV with an exact header line.
std::vector<CsvRow> read_csv(const fs::path& path, const std::vector<std::string>& header);

CameraModel read_intrinsics(const fs::path& path);
std::string format_intrinsics(const CameraModel& cam);
Extrinsics read_extrinsics(const fs::path& path);
std::string format_extrinsics(const Extrinsics& ext);

PointCloud read_scan(const fs::path& path);
std::string format_scan(const PointCloud& cloud);

/// Binary PGM (P5, maxval 255).
MaskImage read_pgm(const fs::path& path);
std::string format_pgm(const MaskImage& mask);

RoadPolygon read_road_polygon(const fs::path& path);
std::string format_road_polygon(const RoadPolygon& poly);

/// Ground-truth lanes from `lane_K.csv` files (header `x,y,z`), ordered by K.
std::vector<Lane> read_ground_truth_lanes(const fs::path& dir);

/// Predicted lanes from `lanes.csv` (header `lane_id,seq,x,y,z,synthetic`).
std::vector<Lane> read_lanes(const fs::path& dir);
std::string format_lane(const Lane& lane);
std::string format_lanes(const std::vector<Lane>& lanes);

DatasetBundle load_dataset(const fs::path& root);
void write_dataset(const fs::path& root, const DatasetBundle& bundle);

ScenarioSpec read_scenario_spec(const fs::path& path);
PipelineConfig read_config(const fs::path& path);

/// road_polygon.csv, lane_K.csv, lanes.csv, map_cloud.csv, report.txt and map.svg.
void write_result(const fs::path& out, const PipelineResult& result);

struct PlotLayers {
  std::optional<RoadPolygon> road;
  std::vector<Lane> lanes;
  std::optional<RoadPolygon> gt_road;
  std::vector<Lane> gt_lanes;
};

std::string render_svg(const PlotLayers& layers);

/// Accepts a dataset root (with a `gt/` directory) or a directory holding
/// `road.csv` and `lane_K.csv` directly.
fs::path ground_truth_dir(const fs::path& dir);

/// Scores a build-map output directory against ground truth.
KeyValues evaluate_directories(const fs::path& pred, const fs::path& gt);

}  // namespace hdmap::io
