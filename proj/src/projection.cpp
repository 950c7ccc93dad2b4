#include "hdmap/projection.hpp"

#include "hdmap/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace hdmap {

void CameraModel::validate() const {
  if (!(fx > 0.0 && fy > 0.0)) throw invalid_argument("camera focal lengths must be positive");
  if (width <= 0 || height <= 0) throw invalid_argument("camera image size must be positive");
  if (!(cx > 0.0 && cx < width && cy > 0.0 && cy < height)) {
    throw invalid_argument("camera principal point must lie inside the image");
  }
}

std::optional<Point2> CameraModel::project(const Point3& p, double min_depth) const {
  if (!(p.z() >= min_depth)) return std::nullopt;
  return Point2(fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy);
}

void Extrinsics::validate() const {
  if (lidar_to_camera.from() != FrameId::kLidar || lidar_to_camera.to() != FrameId::kCamera) {
    throw invalid_argument("extrinsics must map the lidar frame to the camera frame");
  }
}

void ProjectionConfig::validate() const {
  if (!(min_depth > 0.0)) throw invalid_argument("projection.min_depth must be positive");
  if (!(range_limit > min_depth)) throw invalid_argument("projection.range_limit must exceed min_depth");
  if (road_range_limit < 0.0) throw invalid_argument("projection.road_range_limit must be >= 0");
}

namespace {

void require_lidar(const PointCloud& cloud, const char* op) {
  if (cloud.frame != FrameId::kLidar) throw invalid_argument(std::string(op) + " expects a lidar-frame cloud");
}

PointCloud empty_like(const PointCloud& cloud) {
  PointCloud out;
  out.frame = cloud.frame;
  if (cloud.intensity) out.intensity.emplace();
  if (cloud.labels) out.labels.emplace();
  return out;
}

bool inside_image(const Point2& uv, const CameraModel& cam) {
  return uv.x() >= 0.0 && uv.x() < cam.width && uv.y() >= 0.0 && uv.y() < cam.height;
}

}  // namespace

PointCloud crop_to_fov(const PointCloud& cloud, const CameraModel& cam, const Extrinsics& ext, double min_depth) {
  require_lidar(cloud, "crop_to_fov");
  cam.validate();
  ext.validate();
  PointCloud out = empty_like(cloud);
  const Eigen::Matrix3d r = ext.lidar_to_camera.rotation_matrix();
  const Eigen::Vector3d t = ext.lidar_to_camera.translation();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto uv = cam.project(r * cloud.points[i] + t, min_depth);
    if (uv && inside_image(*uv, cam)) out.push_from(cloud, i);
  }
  return out;
}

PointCloud crop_to_range(const PointCloud& cloud, double limit) {
  if (!(limit > 0.0)) throw invalid_argument("range limit must be positive");
  PointCloud out = empty_like(cloud);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (cloud.points[i].norm() <= limit) out.push_from(cloud, i);
  }
  return out;
}

int nearest_pixel(double coordinate) { return static_cast<int>(std::ceil(coordinate - 0.5)); }

PointCloud project_mask(const PointCloud& cloud, const MaskImage& mask, const CameraModel& cam,
                        const Extrinsics& ext, double min_depth) {
  require_lidar(cloud, "project_mask");
  cam.validate();
  ext.validate();
  if (mask.width != cam.width || mask.height != cam.height) {
    throw invalid_argument("mask is " + std::to_string(mask.width) + "x" + std::to_string(mask.height) +
                           " but the camera is " + std::to_string(cam.width) + "x" + std::to_string(cam.height));
  }
  if (mask.pixels.size() != static_cast<std::size_t>(mask.width) * static_cast<std::size_t>(mask.height)) {
    throw invalid_argument("mask pixel buffer does not match its dimensions");
  }
  PointCloud out = cloud;
  out.labels.emplace(cloud.size(), 0);
  const Eigen::Matrix3d r = ext.lidar_to_camera.rotation_matrix();
  const Eigen::Vector3d t = ext.lidar_to_camera.translation();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto uv = cam.project(r * cloud.points[i] + t, min_depth);
    if (!uv || !inside_image(*uv, cam)) continue;
    const int u = std::clamp(nearest_pixel(uv->x()), 0, cam.width - 1);
    const int v = std::clamp(nearest_pixel(uv->y()), 0, cam.height - 1);
    (*out.labels)[i] = mask.at(u, v);
  }
  return out;
}

PointCloud extract_label(const PointCloud& cloud, std::uint8_t label) {
  if (!cloud.labels) throw invalid_argument("cloud has no label channel");
  PointCloud out = empty_like(cloud);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if ((*cloud.labels)[i] == label) out.push_from(cloud, i);
  }
  return out;
}

PointCloud extract_nonzero(const PointCloud& cloud) {
  if (!cloud.labels) throw invalid_argument("cloud has no label channel");
  PointCloud out = empty_like(cloud);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if ((*cloud.labels)[i] != 0) out.push_from(cloud, i);
  }
  return out;
}

}  // namespace hdmap
