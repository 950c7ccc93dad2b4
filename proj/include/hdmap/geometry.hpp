#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace hdmap {

using Point3 = Eigen::Vector3d;
using Point2 = Eigen::Vector2d;

/// Translation followed by intrinsic roll-pitch-yaw: [tx, ty, tz, roll, pitch, yaw].
using PoseParams = Eigen::Matrix<double, 6, 1>;

/// Coordinate frames. Lidar axes: x forward, y left, z up (right handed).
/// Camera axes: x right, y down, z along the optical axis.
enum class FrameId : std::uint8_t { kMap, kCar, kLidar, kCamera };

std::string_view frame_name(FrameId frame);

struct PointCloud {
  FrameId frame = FrameId::kLidar;
  std::vector<Point3> points;
  std::optional<std::vector<float>> intensity;
  std::optional<std::vector<std::uint8_t>> labels;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }

  /// Throws when a present channel does not match the point count or a
  /// coordinate is not finite.
  void validate() const;

  /// Appends point `index` of `other`, carrying channels that both clouds have.
  void push_from(const PointCloud& other, std::size_t index);
};

/// Rigid transform mapping coordinates in `from()` into `to()`.
class RigidTransform {
 public:
  RigidTransform() = default;

  /// The quaternion is normalized here; norms below 1e-6 are rejected.
  RigidTransform(const Eigen::Quaterniond& rotation, const Eigen::Vector3d& translation, FrameId from,
                 FrameId to);

  static RigidTransform identity(FrameId from, FrameId to);
  static RigidTransform from_pose_params(const PoseParams& params, FrameId from, FrameId to);
  static RigidTransform from_matrix(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation,
                                    FrameId from, FrameId to);

  const Eigen::Quaterniond& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }
  Eigen::Matrix3d rotation_matrix() const { return rotation_.toRotationMatrix(); }
  FrameId from() const { return from_; }
  FrameId to() const { return to_; }

  Point3 apply(const Point3& p) const { return rotation_ * p + translation_; }
  PoseParams to_pose_params() const;

  /// Rotation angle of the transform, radians in [0, pi].
  double angle() const;

 private:
  Eigen::Quaterniond rotation_ = Eigen::Quaterniond::Identity();
  Eigen::Vector3d translation_ = Eigen::Vector3d::Zero();
  FrameId from_ = FrameId::kLidar;
  FrameId to_ = FrameId::kMap;
};

/// Returns b∘a: apply `a` first, then `b`. Requires a.to() == b.from().
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform invert(const RigidTransform& t);
PointCloud transform_cloud(const PointCloud& cloud, const RigidTransform& t);

/// R = Rz(yaw) * Ry(pitch) * Rx(roll).
Eigen::Matrix3d rotation_from_rpy(double roll, double pitch, double yaw);
Eigen::Vector3d rpy_from_rotation(const Eigen::Matrix3d& rotation);

/// Integer voxel index of `p`; a point on a face belongs to the voxel of floor(coord / cell).
Eigen::Vector3i voxel_index(const Point3& p, double cell);

/// Replaces every occupied voxel by the centroid of its points. Output is
/// ordered by voxel index and does not depend on the input order. Intensity
/// is averaged; labels take the most frequent value (smallest on ties).
PointCloud voxel_downsample(const PointCloud& cloud, double cell);

}  // namespace hdmap
