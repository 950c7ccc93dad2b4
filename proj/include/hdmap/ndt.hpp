#pragma once

#include "hdmap/geometry.hpp"

#include <Eigen/Core>

#include <array>
#include <map>

namespace hdmap {

struct NdtConfig {
  double cell_size = 2.0;            ///< voxel edge, meters
  int min_points_per_cell = 5;
  double eigen_floor_ratio = 0.01;   ///< smallest covariance eigenvalue >= ratio * largest
  int max_iterations = 30;
  double convergence_epsilon = 1e-4; ///< Newton step norm below which we stop
  double outlier_uniform_weight = 0.05;
  double max_step = 0.5;             ///< cap on the Newton step norm before line search
  int max_step_halvings = 8;

  void validate() const;
};

struct NdtCell {
  int count = 0;
  Point3 mean = Point3::Zero();
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d inv_covariance = Eigen::Matrix3d::Zero();
};

/// Voxelized Gaussian field built from a map cloud. Immutable once built.
class NdtGrid {
 public:
  using Key = std::array<int, 3>;

  NdtGrid(double cell_size, std::map<Key, NdtCell> cells) : cell_size_(cell_size), cells_(std::move(cells)) {}

  double cell_size() const { return cell_size_; }
  const std::map<Key, NdtCell>& cells() const { return cells_; }

  /// Cell containing `p`, or nullptr when that voxel holds no Gaussian.
  const NdtCell* lookup(const Point3& p) const;

 private:
  double cell_size_;
  std::map<Key, NdtCell> cells_;
};

NdtGrid build_ndt_grid(const PointCloud& map_cloud, const NdtConfig& config);

/// Sum over scan points of -log((1-w) exp(-0.5 dᵀΣ⁻¹d) + w); points in empty
/// voxels contribute -log(w).
double ndt_score(const NdtGrid& grid, const PointCloud& scan, const PoseParams& pose,
                 double outlier_weight = 0.05);

struct NdtDerivatives {
  double score = 0.0;
  PoseParams gradient = PoseParams::Zero();
  Eigen::Matrix<double, 6, 6> hessian = Eigen::Matrix<double, 6, 6>::Zero();
};

/// Analytic gradient and symmetric Hessian of ndt_score, without the
/// positive-definite correction (see `make_positive_definite`).
NdtDerivatives ndt_gradient_hessian(const NdtGrid& grid, const PointCloud& scan, const PoseParams& pose,
                                    double outlier_weight = 0.05);

/// H + μI with μ = max(0, floor - λ_min(H)). Returns μ.
double make_positive_definite(Eigen::Matrix<double, 6, 6>& hessian, double floor = 1e-6);

struct RegistrationResult {
  RigidTransform transform;  ///< scan frame -> map frame
  double final_score = 0.0;
  int iterations = 0;
  bool converged = false;
  int gradient_fallbacks = 0;  ///< iterations where the Newton system could not be solved
  bool line_search_failed = false;
};

/// Newton iterations with backtracking from `initial_guess`.
RegistrationResult ndt_align(const NdtGrid& grid, const PointCloud& scan, const RigidTransform& initial_guess,
                             const NdtConfig& config);

/// Appends `scan` transformed by `result` to the map and voxel-downsamples.
PointCloud accumulate_scan(const PointCloud& map_cloud, const PointCloud& scan, const RegistrationResult& result,
                           double downsample_cell);

}  // namespace hdmap
