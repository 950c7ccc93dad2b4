#include "hdmap/ndt.hpp"

#include "hdmap/error.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <vector>

namespace hdmap {

void NdtConfig::validate() const {
  if (!(cell_size > 0.0)) throw invalid_argument("ndt.cell_size must be positive");
  if (min_points_per_cell < 1) throw invalid_argument("ndt.min_points_per_cell must be positive");
  if (!(eigen_floor_ratio > 0.0 && eigen_floor_ratio <= 1.0)) {
    throw invalid_argument("ndt.eigen_floor_ratio must be in (0, 1]");
  }
  if (max_iterations < 1) throw invalid_argument("ndt.max_iterations must be positive");
  if (!(convergence_epsilon > 0.0)) throw invalid_argument("ndt.convergence_epsilon must be positive");
  if (!(outlier_uniform_weight > 0.0 && outlier_uniform_weight < 1.0)) {
    throw invalid_argument("ndt.outlier_uniform_weight must be in (0, 1)");
  }
  if (!(max_step > 0.0)) throw invalid_argument("ndt.max_step must be positive");
  if (max_step_halvings < 0) throw invalid_argument("ndt.max_step_halvings must be >= 0");
}

const NdtCell* NdtGrid::lookup(const Point3& p) const {
  const Eigen::Vector3i v = voxel_index(p, cell_size_);
  const auto it = cells_.find({v.x(), v.y(), v.z()});
  return it == cells_.end() ? nullptr : &it->second;
}

NdtGrid build_ndt_grid(const PointCloud& map_cloud, const NdtConfig& config) {
  config.validate();
  if (map_cloud.empty()) throw invalid_argument("cannot build an NDT grid from an empty cloud");

  std::map<NdtGrid::Key, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < map_cloud.size(); ++i) {
    const Eigen::Vector3i v = voxel_index(map_cloud.points[i], config.cell_size);
    buckets[{v.x(), v.y(), v.z()}].push_back(i);
  }

  std::map<NdtGrid::Key, NdtCell> cells;
  for (const auto& [key, members] : buckets) {
    if (static_cast<int>(members.size()) < config.min_points_per_cell) continue;
    NdtCell cell;
    cell.count = static_cast<int>(members.size());
    for (auto i : members) cell.mean += map_cloud.points[i];
    cell.mean /= static_cast<double>(cell.count);
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (auto i : members) {
      const Point3 d = map_cloud.points[i] - cell.mean;
      cov += d * d.transpose();
    }
    cov /= static_cast<double>(cell.count > 1 ? cell.count - 1 : 1);

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    Eigen::Vector3d values = eig.eigenvalues();
    const double largest = values.maxCoeff();
    if (!(largest > 0.0)) {
      // Coincident points: an isotropic blob scaled to the voxel.
      const double eps = config.eigen_floor_ratio * config.cell_size * config.cell_size;
      cell.covariance = eps * Eigen::Matrix3d::Identity();
      cell.inv_covariance = (1.0 / eps) * Eigen::Matrix3d::Identity();
    } else {
      const double floor = config.eigen_floor_ratio * largest;
      for (int k = 0; k < 3; ++k) values[k] = std::max(values[k], floor);
      const Eigen::Matrix3d& v = eig.eigenvectors();
      cell.covariance = v * values.asDiagonal() * v.transpose();
      cell.inv_covariance = v * values.cwiseInverse().asDiagonal() * v.transpose();
    }
    cells.emplace(key, cell);
  }
  return NdtGrid(config.cell_size, std::move(cells));
}

namespace {

// First and second derivatives of R = Rz(yaw) Ry(pitch) Rx(roll) with respect
// to (roll, pitch, yaw).
struct RotationDerivatives {
  Eigen::Matrix3d r;
  std::array<Eigen::Matrix3d, 3> d1;
  std::array<std::array<Eigen::Matrix3d, 3>, 3> d2;

  explicit RotationDerivatives(const PoseParams& pose) {
    const double cr = std::cos(pose[3]), sr = std::sin(pose[3]);
    const double cp = std::cos(pose[4]), sp = std::sin(pose[4]);
    const double cy = std::cos(pose[5]), sy = std::sin(pose[5]);
    Eigen::Matrix3d rx, rx1, rx2, ry, ry1, ry2, rz, rz1, rz2;
    rx << 1, 0, 0, 0, cr, -sr, 0, sr, cr;
    rx1 << 0, 0, 0, 0, -sr, -cr, 0, cr, -sr;
    rx2 << 0, 0, 0, 0, -cr, sr, 0, -sr, -cr;
    ry << cp, 0, sp, 0, 1, 0, -sp, 0, cp;
    ry1 << -sp, 0, cp, 0, 0, 0, -cp, 0, -sp;
    ry2 << -cp, 0, -sp, 0, 0, 0, sp, 0, -cp;
    rz << cy, -sy, 0, sy, cy, 0, 0, 0, 1;
    rz1 << -sy, -cy, 0, cy, -sy, 0, 0, 0, 0;
    rz2 << -cy, sy, 0, -sy, -cy, 0, 0, 0, 0;

    r = rz * ry * rx;
    d1[0] = rz * ry * rx1;
    d1[1] = rz * ry1 * rx;
    d1[2] = rz1 * ry * rx;
    d2[0][0] = rz * ry * rx2;
    d2[0][1] = d2[1][0] = rz * ry1 * rx1;
    d2[0][2] = d2[2][0] = rz1 * ry * rx1;
    d2[1][1] = rz * ry2 * rx;
    d2[1][2] = d2[2][1] = rz1 * ry1 * rx;
    d2[2][2] = rz2 * ry * rx;
  }
};

template <bool kDerivatives>
NdtDerivatives evaluate(const NdtGrid& grid, const PointCloud& scan, const PoseParams& pose, double w) {
  const RotationDerivatives rot(pose);
  const Eigen::Vector3d t = pose.head<3>();
  const double outlier_cost = -std::log(w);

  NdtDerivatives out;
  Eigen::Matrix<double, 3, 6> jac;
  jac.leftCols<3>().setIdentity();
  for (const auto& x : scan.points) {
    const Point3 q = rot.r * x + t;
    const NdtCell* cell = grid.lookup(q);
    if (cell == nullptr) {
      out.score += outlier_cost;
      continue;
    }
    const Eigen::Vector3d d = q - cell->mean;
    const Eigen::Vector3d ad = cell->inv_covariance * d;
    const double m = d.dot(ad);
    const double e = std::exp(-0.5 * m);
    const double mix = (1.0 - w) * e + w;
    out.score += -std::log(mix);
    if constexpr (kDerivatives) {
      const double s = (1.0 - w) * e / mix;
      if (s == 0.0) continue;
      for (int k = 0; k < 3; ++k) jac.col(3 + k) = rot.d1[k] * x;
      const PoseParams h = jac.transpose() * ad;
      out.gradient += s * h;
      Eigen::Matrix<double, 6, 6> local = jac.transpose() * cell->inv_covariance * jac;
      for (int k = 0; k < 3; ++k) {
        for (int l = k; l < 3; ++l) {
          const double v = ad.dot(rot.d2[k][l] * x);
          local(3 + k, 3 + l) += v;
          if (l != k) local(3 + l, 3 + k) += v;
        }
      }
      out.hessian += s * local - (s * w / mix) * (h * h.transpose());
    }
  }
  if constexpr (kDerivatives) {
    out.hessian = 0.5 * (out.hessian + out.hessian.transpose()).eval();
  }
  return out;
}

}  // namespace

double ndt_score(const NdtGrid& grid, const PointCloud& scan, const PoseParams& pose, double outlier_weight) {
  return evaluate<false>(grid, scan, pose, outlier_weight).score;
}

NdtDerivatives ndt_gradient_hessian(const NdtGrid& grid, const PointCloud& scan, const PoseParams& pose,
                                    double outlier_weight) {
  return evaluate<true>(grid, scan, pose, outlier_weight);
}

double make_positive_definite(Eigen::Matrix<double, 6, 6>& hessian, double floor) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> eig(hessian, Eigen::EigenvaluesOnly);
  const double mu = std::max(0.0, floor - eig.eigenvalues().minCoeff());
  hessian.diagonal().array() += mu;
  return mu;
}

RegistrationResult ndt_align(const NdtGrid& grid, const PointCloud& scan, const RigidTransform& initial_guess,
                             const NdtConfig& config) {
  config.validate();
  if (scan.empty()) throw invalid_argument("cannot register an empty scan");
  if (initial_guess.from() != scan.frame) throw invalid_argument("initial guess does not start in the scan frame");
  const double w = config.outlier_uniform_weight;

  RegistrationResult result;
  PoseParams x = initial_guess.to_pose_params();
  NdtDerivatives current = ndt_gradient_hessian(grid, scan, x, w);

  for (int iter = 1; iter <= config.max_iterations; ++iter) {
    result.iterations = iter;
    Eigen::Matrix<double, 6, 6> h = current.hessian;
    make_positive_definite(h);
    const Eigen::LDLT<Eigen::Matrix<double, 6, 6>> ldlt(h);
    PoseParams step = -ldlt.solve(current.gradient);
    if (ldlt.info() != Eigen::Success || !step.allFinite()) {
      step = -current.gradient;
      ++result.gradient_fallbacks;
    }
    const double norm = step.norm();
    if (norm > config.max_step) step *= config.max_step / norm;

    if (step.norm() < config.convergence_epsilon) {
      const PoseParams candidate = x + step;
      if (ndt_score(grid, scan, candidate, w) <= current.score) {
        x = candidate;
        current = ndt_gradient_hessian(grid, scan, x, w);
      }
      result.converged = true;
      break;
    }

    double alpha = 1.0;
    bool accepted = false;
    PoseParams candidate;
    for (int halving = 0; halving <= config.max_step_halvings; ++halving, alpha *= 0.5) {
      candidate = x + alpha * step;
      if (ndt_score(grid, scan, candidate, w) < current.score) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      result.line_search_failed = true;
      break;
    }
    x = candidate;
    current = ndt_gradient_hessian(grid, scan, x, w);
    if (alpha * step.norm() < config.convergence_epsilon) {
      result.converged = true;
      break;
    }
  }

  result.transform = RigidTransform::from_pose_params(x, scan.frame, initial_guess.to());
  result.final_score = current.score;
  return result;
}

PointCloud accumulate_scan(const PointCloud& map_cloud, const PointCloud& scan, const RegistrationResult& result,
                           double downsample_cell) {
  PointCloud moved = transform_cloud(scan, result.transform);
  if (map_cloud.empty()) return voxel_downsample(moved, downsample_cell);
  if (map_cloud.frame != moved.frame) throw invalid_argument("map cloud is not in the registration target frame");

  PointCloud merged;
  merged.frame = moved.frame;
  merged.points.reserve(map_cloud.size() + moved.size());
  const bool intensity = map_cloud.intensity && moved.intensity;
  if (intensity) merged.intensity.emplace();
  for (std::size_t i = 0; i < map_cloud.size(); ++i) merged.push_from(map_cloud, i);
  for (std::size_t i = 0; i < moved.size(); ++i) merged.push_from(moved, i);
  return voxel_downsample(merged, downsample_cell);
}

}  // namespace hdmap
