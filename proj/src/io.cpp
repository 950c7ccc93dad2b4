#include "hdmap/io.hpp"

#include "hdmap/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include <unistd.h>

namespace hdmap {

void DatasetBundle::validate() const {
  camera.validate();
  extrinsics.validate();
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const auto& f = frames[k];
    const std::string where = "frame " + std::to_string(k) + ": ";
    if (f.scan.frame != FrameId::kLidar) throw invalid_argument(where + "scan must be in the lidar frame");
    f.scan.validate();
    for (const MaskImage* m : {&f.road_mask, &f.lane_mask}) {
      if (m->width != camera.width || m->height != camera.height) {
        throw invalid_argument(where + "mask size does not match the camera");
      }
    }
    if (f.pose_prior.from() != FrameId::kLidar || f.pose_prior.to() != FrameId::kMap) {
      throw invalid_argument(where + "pose prior must map lidar to map");
    }
  }
}

namespace io {

namespace {

std::string location(const fs::path& path, int line) { return path.string() + ":" + std::to_string(line) + ": "; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view text, double& out) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size() && !text.empty() && std::isfinite(out);
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

// Typed view over a key=value file that rejects unknown and missing keys.
class KeyReader {
 public:
  KeyReader(const fs::path& path) : path_(path) {
    for (auto& [k, v] : read_key_values(path)) {
      values_[k] = v;
    }
  }

  double number(const std::string& key) {
    const std::string& text = require(key);
    double v = 0.0;
    if (!parse_double(text, v)) throw parse_error(path_.string() + ": invalid number '" + text + "' for " + key);
    return v;
  }

  int integer(const std::string& key) {
    const std::string& text = require(key);
    int v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
      throw parse_error(path_.string() + ": invalid integer '" + text + "' for " + key);
    }
    return v;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  const std::string& require(const std::string& key) {
    auto it = values_.find(key);
    if (it == values_.end()) throw parse_error(path_.string() + ": missing key '" + key + "'");
    used_.insert(key);
    return it->second;
  }

  void finish() const {
    for (const auto& [k, v] : values_) {
      if (!used_.count(k)) throw parse_error(path_.string() + ": unknown key '" + k + "'");
    }
  }

 private:
  fs::path path_;
  std::map<std::string, std::string> values_;
  std::set<std::string> used_;
};

std::string format_pose_row(int frame, const RigidTransform& t) {
  const auto& q = t.rotation();
  const auto& p = t.translation();
  std::string row = std::to_string(frame);
  for (double v : {p.x(), p.y(), p.z(), q.x(), q.y(), q.z(), q.w()}) row += "," + format_fixed(v, 9);
  return row + "\n";
}

std::vector<RigidTransform> read_poses(const fs::path& path) {
  std::vector<RigidTransform> out;
  for (const auto& row : read_csv(path, {"frame", "tx", "ty", "tz", "qx", "qy", "qz", "qw"})) {
    const auto& v = row.values;
    if (v[0] != static_cast<double>(out.size())) {
      throw parse_error(location(path, row.line) + "frame indices must be contiguous from 0");
    }
    try {
      out.emplace_back(Eigen::Quaterniond(v[7], v[4], v[5], v[6]), Eigen::Vector3d(v[1], v[2], v[3]), FrameId::kLidar,
                       FrameId::kMap);
    } catch (const Error& e) {
      throw parse_error(location(path, row.line) + e.what());
    }
  }
  return out;
}

std::string frame_stem(std::size_t k) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06zu", k);
  return buf;
}

fs::path checked(const fs::path& path) {
  if (!fs::exists(path)) throw io_error("missing file " + path.string());
  return path;
}

// Lane files named lane_<K>.csv in `dir`, ordered by K.
std::vector<std::pair<int, fs::path>> lane_files(const fs::path& dir) {
  std::vector<std::pair<int, fs::path>> out;
  if (!fs::is_directory(dir)) return out;
  static const std::regex pattern(R"(lane_(\d+)\.csv)");
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern)) out.emplace_back(std::stoi(m[1].str()), entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

void atomic_write(const fs::path& path, std::string_view content) {
  const fs::path parent = path.has_parent_path() ? path.parent_path() : fs::path(".");
  std::error_code ec;
  fs::create_directories(parent, ec);
  const fs::path tmp = parent / ("." + path.filename().string() + ".tmp" + std::to_string(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      fs::remove(tmp, ec);
      throw io_error("failed writing " + path.string());
    }
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw io_error("cannot replace " + path.string());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

KeyValues read_key_values(const fs::path& path) {
  const std::string text = read_file(path);
  KeyValues out;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string_view s = trim(raw);
    if (s.empty() || s.front() == '#') continue;
    const std::size_t eq = s.find('=');
    if (eq == std::string_view::npos) throw parse_error(location(path, line) + "expected key=value");
    const std::string key(trim(s.substr(0, eq)));
    const std::string value(trim(s.substr(eq + 1)));
    if (key.empty()) throw parse_error(location(path, line) + "empty key");
    if (!seen.insert(key).second) throw parse_error(location(path, line) + "duplicate key '" + key + "'");
    out.emplace_back(key, value);
  }
  return out;
}

std::string format_key_values(const KeyValues& values) {
  std::string out;
  for (const auto& [k, v] : values) out += k + "=" + v + "\n";
  return out;
}

std::string format_fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  if (std::string_view(buf).find_first_not_of("-0.") == std::string_view::npos && buf[0] == '-') {
    return std::string(buf + 1);
  }
  return buf;
}

std::vector<CsvRow> read_csv(const fs::path& path, const std::vector<std::string>& header) {
  const std::string text = read_file(path);
  std::vector<CsvRow> rows;
  std::size_t pos = 0;
  int line = 0;
  bool saw_header = false;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string_view raw(text.data() + pos, end - pos);
    pos = end + 1;
    ++line;
    const std::string_view s = trim(raw);
    if (s.empty()) continue;
    const auto fields = split(s, ',');
    if (!saw_header) {
      bool ok = fields.size() == header.size();
      for (std::size_t i = 0; ok && i < fields.size(); ++i) ok = fields[i] == header[i];
      if (!ok) {
        std::string expected;
        for (const auto& h : header) expected += (expected.empty() ? "" : ",") + h;
        throw parse_error(location(path, line) + "expected header '" + expected + "'");
      }
      saw_header = true;
      continue;
    }
    if (fields.size() != header.size()) {
      throw parse_error(location(path, line) + "expected " + std::to_string(header.size()) + " columns, got " +
                        std::to_string(fields.size()));
    }
    CsvRow row;
    row.line = line;
    row.values.resize(fields.size());
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (!parse_double(fields[i], row.values[i])) {
        throw parse_error(location(path, line) + "invalid number '" + std::string(fields[i]) + "' in column " +
                          header[i]);
      }
    }
    rows.push_back(std::move(row));
  }
  if (!saw_header) throw parse_error(path.string() + ": missing header");
  return rows;
}

CameraModel read_intrinsics(const fs::path& path) {
  KeyReader r(checked(path));
  CameraModel cam;
  cam.fx = r.number("fx");
  cam.fy = r.number("fy");
  cam.cx = r.number("cx");
  cam.cy = r.number("cy");
  cam.width = r.integer("width");
  cam.height = r.integer("height");
  r.finish();
  try {
    cam.validate();
  } catch (const Error& e) {
    throw parse_error(path.string() + ": " + e.what());
  }
  return cam;
}

std::string format_intrinsics(const CameraModel& cam) {
  return format_key_values({{"fx", format_fixed(cam.fx)},
                            {"fy", format_fixed(cam.fy)},
                            {"cx", format_fixed(cam.cx)},
                            {"cy", format_fixed(cam.cy)},
                            {"width", std::to_string(cam.width)},
                            {"height", std::to_string(cam.height)}});
}

Extrinsics read_extrinsics(const fs::path& path) {
  KeyReader r(checked(path));
  const Eigen::Vector3d t(r.number("tx"), r.number("ty"), r.number("tz"));
  const Eigen::Quaterniond q(r.number("qw"), r.number("qx"), r.number("qy"), r.number("qz"));
  r.finish();
  Extrinsics ext;
  try {
    ext.lidar_to_camera = RigidTransform(q, t, FrameId::kLidar, FrameId::kCamera);
  } catch (const Error& e) {
    throw parse_error(path.string() + ": " + e.what());
  }
  return ext;
}

std::string format_extrinsics(const Extrinsics& ext) {
  const auto& q = ext.lidar_to_camera.rotation();
  const auto& t = ext.lidar_to_camera.translation();
  return format_key_values({{"tx", format_fixed(t.x(), 9)},
                            {"ty", format_fixed(t.y(), 9)},
                            {"tz", format_fixed(t.z(), 9)},
                            {"qx", format_fixed(q.x(), 9)},
                            {"qy", format_fixed(q.y(), 9)},
                            {"qz", format_fixed(q.z(), 9)},
                            {"qw", format_fixed(q.w(), 9)}});
}

PointCloud read_scan(const fs::path& path) {
  PointCloud cloud;
  cloud.frame = FrameId::kLidar;
  cloud.intensity.emplace();
  for (const auto& row : read_csv(path, {"x", "y", "z", "intensity"})) {
    if (row.values[3] < 0.0) throw parse_error(location(path, row.line) + "negative intensity");
    cloud.points.emplace_back(row.values[0], row.values[1], row.values[2]);
    cloud.intensity->push_back(static_cast<float>(row.values[3]));
  }
  return cloud;
}

std::string format_scan(const PointCloud& cloud) {
  std::string out = "x,y,z,intensity\n";
  out.reserve(cloud.size() * 48 + 16);
  char buf[160];
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    const double inten = cloud.intensity ? (*cloud.intensity)[i] : 0.0;
    std::snprintf(buf, sizeof buf, "%s,%s,%s,%s\n", format_fixed(p.x()).c_str(), format_fixed(p.y()).c_str(),
                  format_fixed(p.z()).c_str(), format_fixed(inten).c_str());
    out += buf;
  }
  return out;
}

MaskImage read_pgm(const fs::path& path) {
  const std::string data = read_file(path);
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < data.size()) {
      if (data[pos] == '#') {
        while (pos < data.size() && data[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(data[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
    return data.substr(start, pos - start);
  };
  auto number = [&](const char* what) {
    const std::string t = token();
    int v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || v <= 0) {
      throw parse_error(path.string() + ": invalid PGM " + what);
    }
    return v;
  };
  if (token() != "P5") throw parse_error(path.string() + ": not a binary PGM (P5)");
  const int w = number("width");
  const int h = number("height");
  if (number("maxval") != 255) throw parse_error(path.string() + ": PGM maxval must be 255");
  ++pos;  // single whitespace after maxval
  const std::size_t count = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (data.size() < pos + count) throw parse_error(path.string() + ": PGM pixel data truncated");
  if (data.size() > pos + count) throw parse_error(path.string() + ": PGM has trailing data");
  MaskImage mask(w, h);
  std::copy(data.begin() + static_cast<std::ptrdiff_t>(pos), data.end(), mask.pixels.begin());
  return mask;
}

std::string format_pgm(const MaskImage& mask) {
  std::string out = "P5\n" + std::to_string(mask.width) + " " + std::to_string(mask.height) + "\n255\n";
  out.append(mask.pixels.begin(), mask.pixels.end());
  return out;
}

RoadPolygon read_road_polygon(const fs::path& path) {
  RoadPolygon poly;
  for (const auto& row : read_csv(checked(path), {"x", "y"})) poly.vertices.emplace_back(row.values[0], row.values[1]);
  return poly;
}

std::string format_road_polygon(const RoadPolygon& poly) {
  std::string out = "x,y\n";
  for (const auto& v : poly.vertices) out += format_fixed(v.x()) + "," + format_fixed(v.y()) + "\n";
  return out;
}

std::vector<Lane> read_ground_truth_lanes(const fs::path& dir) {
  std::vector<Lane> lanes;
  for (const auto& [k, path] : lane_files(dir)) {
    Lane lane;
    lane.id = k;
    for (const auto& row : read_csv(path, {"x", "y", "z"})) {
      lane.points.emplace_back(row.values[0], row.values[1], row.values[2]);
    }
    lanes.push_back(std::move(lane));
  }
  return lanes;
}

std::vector<Lane> read_lanes(const fs::path& dir) {
  const fs::path path = checked(dir / "lanes.csv");
  std::vector<Lane> lanes;
  for (const auto& row : read_csv(path, {"lane_id", "seq", "x", "y", "z", "synthetic"})) {
    const auto& v = row.values;
    const int id = static_cast<int>(v[0]);
    if (v[0] != id || v[1] != std::floor(v[1])) throw parse_error(location(path, row.line) + "non-integer id");
    if (lanes.empty() || lanes.back().id != id) {
      for (const auto& l : lanes) {
        if (l.id == id) throw parse_error(location(path, row.line) + "lane rows must be contiguous");
      }
      lanes.push_back(Lane{id, {}, v[5] != 0.0, 0});
    }
    if (v[1] != static_cast<double>(lanes.back().points.size())) {
      throw parse_error(location(path, row.line) + "sequence numbers must count up from 0");
    }
    lanes.back().points.emplace_back(v[2], v[3], v[4]);
  }
  return lanes;
}

std::string format_lane(const Lane& lane) {
  std::string out;
  for (std::size_t i = 0; i < lane.points.size(); ++i) {
    const auto& p = lane.points[i];
    out += std::to_string(lane.id) + "," + std::to_string(i) + "," + format_fixed(p.x()) + "," +
           format_fixed(p.y()) + "," + format_fixed(p.z()) + "," + (lane.synthetic ? "1" : "0") + "\n";
  }
  return out;
}

std::string format_lanes(const std::vector<Lane>& lanes) {
  std::string out = "lane_id,seq,x,y,z,synthetic\n";
  for (const auto& lane : lanes) out += format_lane(lane);
  return out;
}

DatasetBundle load_dataset(const fs::path& root) {
  if (!fs::is_directory(root)) throw io_error("dataset directory " + root.string() + " does not exist");
  DatasetBundle bundle;
  bundle.camera = read_intrinsics(root / "intrinsics.txt");
  bundle.extrinsics = read_extrinsics(root / "extrinsics.txt");
  const auto poses = read_poses(checked(root / "poses.csv"));
  if (poses.empty()) throw parse_error((root / "poses.csv").string() + ": no frames");
  for (std::size_t k = 0; k < poses.size(); ++k) {
    const fs::path stem = root / "frames" / frame_stem(k);
    FrameData frame;
    frame.scan = read_scan(checked(stem.string() + ".scan.csv"));
    frame.road_mask = read_pgm(checked(stem.string() + ".road.pgm"));
    frame.lane_mask = read_pgm(checked(stem.string() + ".lanes.pgm"));
    for (const auto* m : {&frame.road_mask, &frame.lane_mask}) {
      if (m->width != bundle.camera.width || m->height != bundle.camera.height) {
        throw parse_error(stem.string() + ": mask is " + std::to_string(m->width) + "x" + std::to_string(m->height) +
                          " but intrinsics say " + std::to_string(bundle.camera.width) + "x" +
                          std::to_string(bundle.camera.height));
      }
    }
    frame.pose_prior = poses[k];
    bundle.frames.push_back(std::move(frame));
  }
  const fs::path gt = root / "gt";
  if (fs::exists(gt / "road.csv")) {
    GroundTruth truth;
    truth.road = read_road_polygon(gt / "road.csv");
    truth.lanes = read_ground_truth_lanes(gt);
    if (fs::exists(gt / "trajectory.csv")) truth.trajectory = read_poses(gt / "trajectory.csv");
    bundle.ground_truth = std::move(truth);
  }
  return bundle;
}

void write_dataset(const fs::path& root, const DatasetBundle& bundle) {
  bundle.validate();
  fs::create_directories(root / "frames");
  atomic_write(root / "intrinsics.txt", format_intrinsics(bundle.camera));
  atomic_write(root / "extrinsics.txt", format_extrinsics(bundle.extrinsics));
  std::string poses = "frame,tx,ty,tz,qx,qy,qz,qw\n";
  for (std::size_t k = 0; k < bundle.frames.size(); ++k) {
    const auto& f = bundle.frames[k];
    const std::string stem = (root / "frames" / frame_stem(k)).string();
    atomic_write(stem + ".scan.csv", format_scan(f.scan));
    atomic_write(stem + ".road.pgm", format_pgm(f.road_mask));
    atomic_write(stem + ".lanes.pgm", format_pgm(f.lane_mask));
    poses += format_pose_row(static_cast<int>(k), f.pose_prior);
  }
  atomic_write(root / "poses.csv", poses);
  if (bundle.ground_truth) {
    const auto& gt = *bundle.ground_truth;
    atomic_write(root / "gt" / "road.csv", format_road_polygon(gt.road));
    for (const auto& [k, path] : lane_files(root / "gt")) fs::remove(path);
    for (const auto& lane : gt.lanes) {
      std::string text = "x,y,z\n";
      for (const auto& p : lane.points) text += format_fixed(p.x()) + "," + format_fixed(p.y()) + "," + format_fixed(p.z()) + "\n";
      atomic_write(root / "gt" / ("lane_" + std::to_string(lane.id) + ".csv"), text);
    }
    std::string traj = "frame,tx,ty,tz,qx,qy,qz,qw\n";
    for (std::size_t k = 0; k < gt.trajectory.size(); ++k) traj += format_pose_row(static_cast<int>(k), gt.trajectory[k]);
    atomic_write(root / "gt" / "trajectory.csv", traj);
  }
}

ScenarioSpec read_scenario_spec(const fs::path& path) {
  KeyReader r(checked(path));
  ScenarioSpec spec = ScenarioSpec::preset(parse_archetype(r.require("archetype")));
  auto opt_number = [&](const char* key, double& field) {
    if (r.has(key)) field = r.number(key);
  };
  auto opt_int = [&](const char* key, int& field) {
    if (r.has(key)) field = r.integer(key);
  };
  opt_number("length", spec.length);
  opt_int("lane_count", spec.lane_count);
  opt_number("lane_width", spec.lane_width);
  opt_number("curb_height", spec.curb_height);
  opt_number("curvature", spec.curvature);
  opt_int("frame_count", spec.frame_count);
  opt_int("suppress_lane", spec.suppress_lane);
  if (r.has("seed")) {
    const std::string& text = r.require("seed");
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), spec.seed);
    if (ec != std::errc() || ptr != text.data() + text.size()) throw parse_error(path.string() + ": invalid seed");
  }
  opt_number("point_noise_sigma", spec.noise.point_noise_sigma);
  opt_number("mask_dropout_rate", spec.noise.mask_dropout_rate);
  opt_int("mask_curb_bleed", spec.noise.mask_curb_bleed);
  opt_number("pose_noise_translation", spec.noise.pose_translation_noise);
  opt_number("pose_noise_rotation_deg", spec.noise.pose_rotation_noise_deg);
  r.finish();
  try {
    spec.validate();
  } catch (const Error& e) {
    throw parse_error(path.string() + ": " + e.what());
  }
  return spec;
}

PipelineConfig read_config(const fs::path& path) {
  PipelineConfig config;
  for (const auto& [k, v] : read_key_values(checked(path))) {
    try {
      config.set(k, v);
    } catch (const Error& e) {
      throw parse_error(path.string() + ": " + e.what());
    }
  }
  try {
    config.validate();
  } catch (const Error& e) {
    throw parse_error(path.string() + ": " + e.what());
  }
  return config;
}

void write_result(const fs::path& out, const PipelineResult& result) {
  fs::create_directories(out);
  atomic_write(out / "road_polygon.csv", format_road_polygon(result.road));
  for (const auto& [k, path] : lane_files(out)) fs::remove(path);
  for (const auto& lane : result.lanes) {
    atomic_write(out / ("lane_" + std::to_string(lane.id) + ".csv"),
                 "lane_id,seq,x,y,z,synthetic\n" + format_lane(lane));
  }
  atomic_write(out / "lanes.csv", format_lanes(result.lanes));

  std::string cloud = "x,y,z\n";
  for (const auto& p : result.map_cloud.points) {
    cloud += format_fixed(p.x()) + "," + format_fixed(p.y()) + "," + format_fixed(p.z()) + "\n";
  }
  atomic_write(out / "map_cloud.csv", cloud);

  int converged = 0, iterations = 0, synthetic = 0;
  for (const auto& f : result.frames) {
    converged += f.registration.converged ? 1 : 0;
    iterations += f.registration.iterations;
  }
  for (const auto& l : result.lanes) synthetic += l.synthetic ? 1 : 0;
  KeyValues report = {
      {"frames", std::to_string(result.frames.size())},
      {"ndt_converged_frames", std::to_string(converged)},
      {"ndt_total_iterations", std::to_string(iterations)},
      {"map_points", std::to_string(result.map_cloud.size())},
      {"road_vertices", std::to_string(result.road.vertices.size())},
      {"road_area", format_fixed(polygon_area(result.road))},
      {"curb_total_points", std::to_string(result.curb_total)},
      {"curb_kept_points", std::to_string(result.curb_kept)},
      {"curb_delta", format_fixed(result.curb_delta)},
      {"lane_count", std::to_string(result.lanes.size())},
      {"synthetic_lanes", std::to_string(synthetic)},
      {"lane_completion", result.completion_applied ? "applied" : "skipped"},
      {"lane_width", format_fixed(result.completion.lane_width)},
      {"lane_expected", std::to_string(result.completion.expected_lanes)},
  };
  atomic_write(out / "report.txt", format_key_values(report));

  PlotLayers layers;
  layers.road = result.road;
  layers.lanes = result.lanes;
  atomic_write(out / "map.svg", render_svg(layers));
}

std::string render_svg(const PlotLayers& layers) {
  Point2 lo(std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity());
  Point2 hi = -lo;
  auto extend = [&](const Point2& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  };
  for (const auto* poly : {&layers.road, &layers.gt_road}) {
    if (*poly) {
      for (const auto& v : (*poly)->vertices) extend(v);
    }
  }
  for (const auto* lanes : {&layers.lanes, &layers.gt_lanes}) {
    for (const auto& l : *lanes) {
      for (const auto& p : l.points) extend(p.head<2>());
    }
  }
  if (!(lo.x() <= hi.x())) {
    lo = Point2(0, 0);
    hi = Point2(1, 1);
  }
  const double margin = 20.0, width = 1000.0;
  const Point2 span = (hi - lo).cwiseMax(Point2(1e-6, 1e-6));
  const double scale = (width - 2 * margin) / std::max(span.x(), span.y());
  const double height = span.y() * scale + 2 * margin + 60.0;
  auto px = [&](const Point2& p) {
    return format_fixed(margin + (p.x() - lo.x()) * scale, 2) + "," +
           format_fixed(margin + (hi.y() - p.y()) * scale, 2);
  };
  auto polygon = [&](const RoadPolygon& poly, const char* style) {
    std::string pts;
    for (const auto& v : poly.vertices) pts += (pts.empty() ? "" : " ") + px(v);
    return "  <polygon points=\"" + pts + "\" " + style + "/>\n";
  };
  auto polyline = [&](const Lane& lane, const char* style) {
    std::string pts;
    for (const auto& p : lane.points) pts += (pts.empty() ? "" : " ") + px(p.head<2>());
    return "  <polyline points=\"" + pts + "\" fill=\"none\" " + style + "/>\n";
  };

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + format_fixed(width, 0) + "\" height=\"" +
                    format_fixed(height, 0) + "\">\n";
  svg += "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (layers.gt_road) svg += polygon(*layers.gt_road, "fill=\"#dddddd\" stroke=\"#888888\" stroke-width=\"1\"");
  if (layers.road) {
    svg += polygon(*layers.road, "fill=\"#4a90d9\" fill-opacity=\"0.25\" stroke=\"#1f5fa8\" stroke-width=\"1.5\"");
  }
  for (const auto& l : layers.gt_lanes) {
    svg += polyline(l, "stroke=\"#000000\" stroke-width=\"1\" stroke-dasharray=\"6,4\"");
  }
  for (const auto& l : layers.lanes) {
    svg += polyline(l, l.synthetic ? "stroke=\"#f08c00\" stroke-width=\"2\" stroke-dasharray=\"3,3\""
                                   : "stroke=\"#d62728\" stroke-width=\"2\"");
  }
  const double y = height - 30.0;
  struct Entry {
    const char* color;
    const char* label;
  };
  const Entry legend[] = {{"#888888", "ground-truth road"},
                          {"#1f5fa8", "mapped road"},
                          {"#000000", "ground-truth lanes"},
                          {"#d62728", "mapped lanes"},
                          {"#f08c00", "completed lanes"}};
  double x = margin;
  for (const auto& e : legend) {
    svg += "  <rect x=\"" + format_fixed(x, 0) + "\" y=\"" + format_fixed(y - 10, 0) +
           "\" width=\"12\" height=\"12\" fill=\"" + e.color + "\"/>\n";
    svg += "  <text x=\"" + format_fixed(x + 16, 0) + "\" y=\"" + format_fixed(y, 0) +
           "\" font-family=\"sans-serif\" font-size=\"12\">" + e.label + "</text>\n";
    x += 180.0;
  }
  svg += "</svg>\n";
  return svg;
}

fs::path ground_truth_dir(const fs::path& dir) {
  if (fs::exists(dir / "gt" / "road.csv")) return dir / "gt";
  if (fs::exists(dir / "road.csv")) return dir;
  throw io_error("no ground truth found under " + dir.string());
}

KeyValues evaluate_directories(const fs::path& pred, const fs::path& gt) {
  const fs::path gt_dir = ground_truth_dir(gt);
  const RoadPolygon pred_road = read_road_polygon(pred / "road_polygon.csv");
  const RoadPolygon gt_road = read_road_polygon(gt_dir / "road.csv");
  double delta = 0.0;
  if (fs::exists(pred / "report.txt")) {
    for (const auto& [k, v] : read_key_values(pred / "report.txt")) {
      if (k == "curb_delta" && !parse_double(v, delta)) throw parse_error("invalid curb_delta in report.txt");
    }
  }
  const RoadReport road = road_metrics(pred_road, gt_road, delta);
  const std::vector<Lane> pred_lanes = read_lanes(pred);
  const std::vector<Lane> gt_lanes = read_ground_truth_lanes(gt_dir);
  const LaneReport lanes = evaluate_lanes(pred_lanes, gt_lanes);

  KeyValues out = {
      {"road_area_pred", format_fixed(road.area_pred)},
      {"road_area_gt", format_fixed(road.area_gt)},
      {"road_area_error_abs", format_fixed(road.area_error_abs)},
      {"road_area_error_symdiff", format_fixed(road.area_error_symdiff)},
      {"road_area_error_symdiff_ratio", format_fixed(road.area_error_symdiff / road.area_gt)},
      {"curb_delta", format_fixed(road.delta)},
      {"lane_count_pred", std::to_string(pred_lanes.size())},
      {"lane_count_gt", std::to_string(gt_lanes.size())},
      {"lane_matched", std::to_string(lanes.matches.size())},
      {"lane_translation_error_mean", format_fixed(lanes.mean_translation_error)},
      {"lane_sigma_x", format_fixed(lanes.sigma_x)},
      {"lane_sigma_y", format_fixed(lanes.sigma_y)},
  };
  for (const auto& m : lanes.matches) {
    const std::string key = "lane_" + std::to_string(m.pred_id);
    out.emplace_back(key + "_gt", std::to_string(m.gt_id));
    out.emplace_back(key + "_translation_error", format_fixed(m.metrics.translation_error));
    out.emplace_back(key + "_sigma_x", format_fixed(m.metrics.sigma_x));
    out.emplace_back(key + "_sigma_y", format_fixed(m.metrics.sigma_y));
  }
  std::string unmatched_pred, unmatched_gt;
  for (int id : lanes.unmatched_pred) unmatched_pred += (unmatched_pred.empty() ? "" : " ") + std::to_string(id);
  for (int id : lanes.unmatched_gt) unmatched_gt += (unmatched_gt.empty() ? "" : " ") + std::to_string(id);
  out.emplace_back("lane_unmatched_pred", unmatched_pred);
  out.emplace_back("lane_unmatched_gt", unmatched_gt);
  return out;
}

}  // namespace io
}  // namespace hdmap
