#include "hdmap/geometry.hpp"

#include "hdmap/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <tuple>

namespace hdmap {

std::string_view frame_name(FrameId frame) {
  switch (frame) {
    case FrameId::kMap: return "map";
    case FrameId::kCar: return "car";
    case FrameId::kLidar: return "lidar";
    case FrameId::kCamera: return "camera";
  }
  return "unknown";
}

void PointCloud::validate() const {
  if (intensity && intensity->size() != points.size()) {
    throw invalid_argument("intensity channel length does not match point count");
  }
  if (labels && labels->size() != points.size()) {
    throw invalid_argument("label channel length does not match point count");
  }
  for (const auto& p : points) {
    if (!p.allFinite()) throw invalid_argument("point cloud contains a non-finite coordinate");
  }
}

void PointCloud::push_from(const PointCloud& other, std::size_t index) {
  points.push_back(other.points[index]);
  if (intensity && other.intensity) intensity->push_back((*other.intensity)[index]);
  if (labels && other.labels) labels->push_back((*other.labels)[index]);
}

RigidTransform::RigidTransform(const Eigen::Quaterniond& rotation, const Eigen::Vector3d& translation,
                               FrameId from, FrameId to)
    : rotation_(rotation), translation_(translation), from_(from), to_(to) {
  const double norm = rotation.norm();
  if (!std::isfinite(norm) || norm < 1e-6) {
    throw invalid_argument("rotation quaternion norm is too small or not finite");
  }
  if (!translation.allFinite()) throw invalid_argument("translation is not finite");
  rotation_.coeffs() /= norm;
}

RigidTransform RigidTransform::identity(FrameId from, FrameId to) {
  return {Eigen::Quaterniond::Identity(), Eigen::Vector3d::Zero(), from, to};
}

RigidTransform RigidTransform::from_pose_params(const PoseParams& params, FrameId from, FrameId to) {
  return from_matrix(rotation_from_rpy(params[3], params[4], params[5]), params.head<3>(), from, to);
}

RigidTransform RigidTransform::from_matrix(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation,
                                           FrameId from, FrameId to) {
  return {Eigen::Quaterniond(rotation), translation, from, to};
}

PoseParams RigidTransform::to_pose_params() const {
  PoseParams out;
  out.head<3>() = translation_;
  out.tail<3>() = rpy_from_rotation(rotation_matrix());
  return out;
}

double RigidTransform::angle() const {
  const double w = std::min(1.0, std::abs(rotation_.w()));
  return 2.0 * std::atan2(rotation_.vec().norm(), w);
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  if (a.to() != b.from()) {
    throw invalid_argument("cannot compose transforms: " + std::string(frame_name(a.to())) + " does not chain to " +
                           std::string(frame_name(b.from())));
  }
  return {b.rotation() * a.rotation(), b.rotation() * a.translation() + b.translation(), a.from(), b.to()};
}

RigidTransform invert(const RigidTransform& t) {
  const Eigen::Quaterniond inv = t.rotation().conjugate();
  return {inv, -(inv * t.translation()), t.to(), t.from()};
}

PointCloud transform_cloud(const PointCloud& cloud, const RigidTransform& t) {
  if (cloud.frame != t.from()) {
    throw invalid_argument("cloud frame " + std::string(frame_name(cloud.frame)) + " does not match transform source " +
                           std::string(frame_name(t.from())));
  }
  PointCloud out = cloud;
  out.frame = t.to();
  const Eigen::Matrix3d r = t.rotation_matrix();
  for (auto& p : out.points) p = r * p + t.translation();
  return out;
}

Eigen::Matrix3d rotation_from_rpy(double roll, double pitch, double yaw) {
  return (Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()) * Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

Eigen::Vector3d rpy_from_rotation(const Eigen::Matrix3d& r) {
  const double pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  const double roll = std::atan2(r(2, 1), r(2, 2));
  const double yaw = std::atan2(r(1, 0), r(0, 0));
  return {roll, pitch, yaw};
}

Eigen::Vector3i voxel_index(const Point3& p, double cell) {
  return {static_cast<int>(std::floor(p.x() / cell)), static_cast<int>(std::floor(p.y() / cell)),
          static_cast<int>(std::floor(p.z() / cell))};
}

PointCloud voxel_downsample(const PointCloud& cloud, double cell) {
  if (!(cell > 0.0)) throw invalid_argument("voxel size must be positive");
  using Key = std::array<int, 3>;
  std::map<Key, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Eigen::Vector3i v = voxel_index(cloud.points[i], cell);
    buckets[{v.x(), v.y(), v.z()}].push_back(i);
  }

  PointCloud out;
  out.frame = cloud.frame;
  out.points.reserve(buckets.size());
  if (cloud.intensity) out.intensity.emplace();
  if (cloud.labels) out.labels.emplace();

  for (auto& [key, members] : buckets) {
    // Sum in coordinate order so the centroid is independent of input order.
    std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
      const auto& pa = cloud.points[a];
      const auto& pb = cloud.points[b];
      return std::tie(pa.x(), pa.y(), pa.z(), a) < std::tie(pb.x(), pb.y(), pb.z(), b);
    });
    Point3 sum = Point3::Zero();
    for (auto i : members) sum += cloud.points[i];
    const double n = static_cast<double>(members.size());
    out.points.push_back(sum / n);
    if (cloud.intensity) {
      std::vector<float> values;
      for (auto i : members) values.push_back((*cloud.intensity)[i]);
      std::sort(values.begin(), values.end());
      const double s = std::accumulate(values.begin(), values.end(), 0.0);
      out.intensity->push_back(static_cast<float>(s / n));
    }
    if (cloud.labels) {
      std::array<int, 256> votes{};
      for (auto i : members) ++votes[(*cloud.labels)[i]];
      out.labels->push_back(static_cast<std::uint8_t>(std::max_element(votes.begin(), votes.end()) - votes.begin()));
    }
  }
  return out;
}

}  // namespace hdmap
