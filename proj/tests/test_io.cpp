#include "hdmap/error.hpp"
#include "hdmap/io.hpp"
#include "hdmap/scenario.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

using namespace hdmap;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("hdmap_io_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

void write_text(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

template <typename F>
std::string error_of(F&& f, ErrorCode expected) {
  try {
    f();
  } catch (const Error& e) {
    CHECK(e.code() == expected);
    return e.what();
  }
  FAIL("no error thrown");
  return {};
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

}  // namespace

TEST_CASE("scan round trip") {
  TempDir dir;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-80.0, 80.0), w(0.0, 1.0);
  PointCloud cloud;
  cloud.intensity.emplace();
  for (int i = 0; i < 500; ++i) {
    cloud.points.emplace_back(u(rng), u(rng), u(rng));
    cloud.intensity->push_back(static_cast<float>(w(rng)));
  }
  const std::string text = io::format_scan(cloud);
  io::atomic_write(dir.path / "s.csv", text);
  const PointCloud back = io::read_scan(dir.path / "s.csv");
  REQUIRE(back.size() == cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    CHECK((back.points[i] - cloud.points[i]).cwiseAbs().maxCoeff() <= 5e-7 + 1e-9);
  }
  CHECK(io::format_scan(back) == text);
}

TEST_CASE("calibration and pose round trip") {
  TempDir dir;
  const CameraModel cam = simulated_camera();
  io::atomic_write(dir.path / "i.txt", io::format_intrinsics(cam));
  const CameraModel cam2 = io::read_intrinsics(dir.path / "i.txt");
  CHECK(cam2.fx == doctest::Approx(cam.fx));
  CHECK(cam2.width == cam.width);

  const Extrinsics ext = simulated_extrinsics();
  io::atomic_write(dir.path / "e.txt", io::format_extrinsics(ext));
  const Extrinsics ext2 = io::read_extrinsics(dir.path / "e.txt");
  CHECK((ext2.lidar_to_camera.translation() - ext.lidar_to_camera.translation()).norm() <= 1e-9);
  CHECK(ext2.lidar_to_camera.rotation().angularDistance(ext.lidar_to_camera.rotation()) <= 1e-8);
  CHECK(io::format_extrinsics(ext2) == io::format_extrinsics(ext));
}

TEST_CASE("dataset round trip") {
  TempDir dir;
  ScenarioSpec spec = ScenarioSpec::preset(Archetype::kStraightRoad);
  spec.frame_count = 2;
  spec.noise.pose_translation_noise = 0.2;
  spec.noise.pose_rotation_noise_deg = 2.0;
  const auto bundle = gen_scenario(spec)[0].bundle;
  io::write_dataset(dir.path / "ds", bundle);
  const auto back = io::load_dataset(dir.path / "ds");
  REQUIRE(back.frames.size() == 2);
  REQUIRE(back.ground_truth);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(back.frames[k].road_mask.pixels == bundle.frames[k].road_mask.pixels);
    CHECK(back.frames[k].lane_mask.pixels == bundle.frames[k].lane_mask.pixels);
    CHECK((back.frames[k].pose_prior.translation() - bundle.frames[k].pose_prior.translation()).norm() <= 1e-9);
    CHECK(back.frames[k].scan.size() == bundle.frames[k].scan.size());
  }
  CHECK(back.ground_truth->lanes.size() == bundle.ground_truth->lanes.size());
  CHECK(back.ground_truth->road.vertices.size() == bundle.ground_truth->road.vertices.size());
  CHECK(back.ground_truth->trajectory.size() == 2);

  // Rewriting the loaded dataset reproduces every file byte for byte.
  io::write_dataset(dir.path / "ds2", back);
  for (const auto& entry : fs::recursive_directory_iterator(dir.path / "ds")) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), dir.path / "ds");
    CHECK_MESSAGE(io::read_file(entry.path()) == io::read_file(dir.path / "ds2" / rel), rel.string());
  }
}

TEST_CASE("malformed inputs name the problem") {
  TempDir dir;
  SUBCASE("short scan row") {
    write_text(dir.path / "bad.csv", "x,y,z,intensity\n1,2,3,0.5\n1,2,3\n");
    const auto msg = error_of([&] { io::read_scan(dir.path / "bad.csv"); }, ErrorCode::kParse);
    CHECK(contains(msg, "bad.csv:3"));
    CHECK(contains(msg, "columns"));
  }
  SUBCASE("bad header") {
    write_text(dir.path / "bad.csv", "x,y,intensity\n");
    CHECK(contains(error_of([&] { io::read_scan(dir.path / "bad.csv"); }, ErrorCode::kParse), "header"));
  }
  SUBCASE("not a number") {
    write_text(dir.path / "bad.csv", "x,y,z,intensity\n1,abc,3,0\n");
    CHECK(contains(error_of([&] { io::read_scan(dir.path / "bad.csv"); }, ErrorCode::kParse), "abc"));
  }
  SUBCASE("mask size disagrees with intrinsics") {
    ScenarioSpec spec = ScenarioSpec::preset(Archetype::kStraightRoad);
    spec.frame_count = 2;
    io::write_dataset(dir.path / "ds", gen_scenario(spec)[0].bundle);
    io::atomic_write(dir.path / "ds" / "frames" / "000001.road.pgm", io::format_pgm(MaskImage(10, 10)));
    const auto msg = error_of([&] { io::load_dataset(dir.path / "ds"); }, ErrorCode::kParse);
    CHECK(contains(msg, "000001"));
    CHECK(contains(msg, "10x10"));
  }
  SUBCASE("truncated pgm") {
    write_text(dir.path / "m.pgm", "P5\n4 4\n255\nabc");
    CHECK(contains(error_of([&] { io::read_pgm(dir.path / "m.pgm"); }, ErrorCode::kParse), "truncated"));
  }
  SUBCASE("missing dataset") {
    error_of([&] { io::load_dataset(dir.path / "nope"); }, ErrorCode::kIo);
  }
}

TEST_CASE("lane export") {
  Lane lane;
  lane.id = 3;
  lane.points = {{0, 0, 0}, {1, 0.5, 0}, {2, 1, 0.25}};
  const std::string text = io::format_lanes({lane});
  CHECK(text ==
        "lane_id,seq,x,y,z,synthetic\n"
        "3,0,0.000000,0.000000,0.000000,0\n"
        "3,1,1.000000,0.500000,0.000000,0\n"
        "3,2,2.000000,1.000000,0.250000,0\n");
  CHECK(io::format_lanes({}) == "lane_id,seq,x,y,z,synthetic\n");
  CHECK(io::format_fixed(-0.0000001) == "0.000000");

  TempDir dir;
  io::atomic_write(dir.path / "lanes.csv", text);
  const auto back = io::read_lanes(dir.path);
  REQUIRE(back.size() == 1);
  CHECK(back[0].id == 3);
  CHECK(back[0].points == lane.points);

  io::atomic_write(dir.path / "lanes.csv", "lane_id,seq,x,y,z,synthetic\n0,0,0,0,0,0\n0,2,1,1,1,0\n");
  CHECK(contains(error_of([&] { io::read_lanes(dir.path); }, ErrorCode::kParse), "sequence"));
}

TEST_CASE("key=value files") {
  TempDir dir;
  SUBCASE("config keys") {
    write_text(dir.path / "c.txt", "# comment\n\nndt.cell_size = 1.5\nhull.k=25\n");
    const auto cfg = io::read_config(dir.path / "c.txt");
    CHECK(cfg.ndt.cell_size == 1.5);
  }
  SUBCASE("unknown key") {
    write_text(dir.path / "c.txt", "ndt.cel_size=1.5\n");
    CHECK(contains(error_of([&] { io::read_config(dir.path / "c.txt"); }, ErrorCode::kParse), "ndt.cel_size"));
  }
  SUBCASE("duplicate key") {
    write_text(dir.path / "c.txt", "a=1\nb=2\na=3\n");
    const auto msg = error_of([&] { io::read_key_values(dir.path / "c.txt"); }, ErrorCode::kParse);
    CHECK(contains(msg, "c.txt:3"));
    CHECK(contains(msg, "duplicate"));
  }
  SUBCASE("missing equals") {
    write_text(dir.path / "c.txt", "just words\n");
    CHECK(contains(error_of([&] { io::read_key_values(dir.path / "c.txt"); }, ErrorCode::kParse), "c.txt:1"));
  }
  SUBCASE("scenario file") {
    write_text(dir.path / "s.txt", "archetype=curvedRoad\nseed=77\nframe_count=5\n");
    const auto spec = io::read_scenario_spec(dir.path / "s.txt");
    CHECK(spec.archetype == Archetype::kCurvedRoad);
    CHECK(spec.seed == 77u);
    CHECK(spec.frame_count == 5);
    write_text(dir.path / "s.txt", "archetype=curvedRoad\ncolour=red\n");
    CHECK(contains(error_of([&] { io::read_scenario_spec(dir.path / "s.txt"); }, ErrorCode::kParse), "colour"));
    write_text(dir.path / "s.txt", "archetype=straightRoad\nframe_count=1\n");
    error_of([&] { io::read_scenario_spec(dir.path / "s.txt"); }, ErrorCode::kParse);
  }
}

TEST_CASE("atomic write replaces without leftovers") {
  TempDir dir;
  const auto p = dir.path / "sub" / "f.txt";
  io::atomic_write(p, "one");
  io::atomic_write(p, "two");
  CHECK(io::read_file(p) == "two");
  int files = 0;
  for (const auto& e : fs::directory_iterator(p.parent_path())) files += e.is_regular_file();
  CHECK(files == 1);
}

TEST_CASE("evaluate directories") {
  TempDir dir;
  write_text(dir.path / "gt" / "road.csv", "x,y\n0,0\n10,0\n10,10\n0,10\n");
  write_text(dir.path / "gt" / "lane_0.csv", "x,y,z\n0,5,0\n10,5,0\n");
  write_text(dir.path / "pred" / "road_polygon.csv", "x,y\n1,0\n11,0\n11,10\n1,10\n");
  write_text(dir.path / "pred" / "lanes.csv", "lane_id,seq,x,y,z,synthetic\n0,0,1,5.5,0,0\n0,1,9,5.5,0,0\n");
  write_text(dir.path / "pred" / "report.txt", "curb_delta=0.2\n");
  for (const auto& gt : {dir.path, dir.path / "gt"}) {
    const auto kv = io::evaluate_directories(dir.path / "pred", gt);
    auto get = [&](const std::string& k) {
      for (const auto& [key, v] : kv)
        if (key == k) return v;
      FAIL("missing " << k);
      return std::string();
    };
    CHECK(get("road_area_error_symdiff") == "20.000000");
    CHECK(get("road_area_error_symdiff_ratio") == "0.200000");
    CHECK(get("curb_delta") == "0.200000");
    CHECK(get("lane_matched") == "1");
    CHECK(get("lane_translation_error_mean") == "0.500000");
    CHECK(get("lane_unmatched_gt") == "");
  }
  error_of([&] { io::evaluate_directories(dir.path / "pred", dir.path / "pred"); }, ErrorCode::kIo);
}

TEST_CASE("svg rendering") {
  io::PlotLayers layers;
  layers.road = RoadPolygon{{{0, 0}, {10, 0}, {10, 4}, {0, 4}}};
  Lane l;
  l.points = {{0, 2, 0}, {10, 2, 0}};
  layers.lanes = {l};
  const std::string svg = io::render_svg(layers);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(contains(svg, "<polygon"));
  CHECK(contains(svg, "<polyline"));
  CHECK(contains(svg, "</svg>"));
  CHECK(contains(io::render_svg({}), "</svg>"));
}
