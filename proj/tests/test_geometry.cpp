#include "hdmap/error.hpp"
#include "hdmap/geometry.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace hdmap;

namespace {

RigidTransform random_transform(std::mt19937_64& rng, FrameId from, FrameId to) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
  return {q, Eigen::Vector3d(g(rng), g(rng), g(rng)) * 5.0, from, to};
}

Point3 random_point(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  return {u(rng), u(rng), u(rng)};
}

PointCloud random_cloud(std::mt19937_64& rng, std::size_t n) {
  PointCloud c;
  c.intensity.emplace();
  c.labels.emplace();
  for (std::size_t i = 0; i < n; ++i) {
    c.points.push_back(random_point(rng));
    c.intensity->push_back(static_cast<float>(i));
    c.labels->push_back(static_cast<std::uint8_t>(i % 3));
  }
  return c;
}

}  // namespace

TEST_CASE("identity transform leaves a cloud unchanged") {
  std::mt19937_64 rng(1);
  const PointCloud c = random_cloud(rng, 30);
  const PointCloud out = transform_cloud(c, RigidTransform::identity(FrameId::kLidar, FrameId::kMap));
  CHECK(out.frame == FrameId::kMap);
  REQUIRE(out.size() == c.size());
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(out.points[i] == c.points[i]);
  CHECK(*out.intensity == *c.intensity);
  CHECK(*out.labels == *c.labels);
}

TEST_CASE("quarter turn about z maps x onto y") {
  const RigidTransform t(Eigen::Quaterniond(Eigen::AngleAxisd(std::numbers::pi / 2, Eigen::Vector3d::UnitZ())),
                         Eigen::Vector3d::Zero(), FrameId::kLidar, FrameId::kMap);
  CHECK((t.apply({1, 0, 0}) - Point3(0, 1, 0)).norm() <= 1e-12);
}

TEST_CASE("transform then inverse restores the cloud") {
  std::mt19937_64 rng(2);
  const PointCloud c = random_cloud(rng, 50);
  const RigidTransform t = random_transform(rng, FrameId::kLidar, FrameId::kMap);
  const PointCloud back = transform_cloud(transform_cloud(c, t), invert(t));
  CHECK(back.frame == FrameId::kLidar);
  for (std::size_t i = 0; i < c.size(); ++i) CHECK((back.points[i] - c.points[i]).norm() <= 1e-9);
}

TEST_CASE("transform_cloud rejects a frame mismatch") {
  PointCloud c;
  c.frame = FrameId::kCamera;
  c.points.push_back(Point3::Zero());
  CHECK_THROWS_AS(transform_cloud(c, RigidTransform::identity(FrameId::kLidar, FrameId::kMap)), Error);
}

TEST_CASE("compose") {
  SUBCASE("with the inverse gives identity") {
    std::mt19937_64 rng(3);
    const RigidTransform a = random_transform(rng, FrameId::kLidar, FrameId::kMap);
    const RigidTransform id = compose(a, invert(a));
    CHECK(id.from() == FrameId::kLidar);
    CHECK(id.to() == FrameId::kLidar);
    CHECK(id.translation().norm() <= 1e-12);
    CHECK(id.angle() <= 1e-12);
  }
  SUBCASE("pure translations add") {
    const RigidTransform a(Eigen::Quaterniond::Identity(), {1, 0, 0}, FrameId::kLidar, FrameId::kCar);
    const RigidTransform b(Eigen::Quaterniond::Identity(), {0, 2, 0}, FrameId::kCar, FrameId::kMap);
    const RigidTransform ab = compose(a, b);
    CHECK((ab.translation() - Eigen::Vector3d(1, 2, 0)).norm() == doctest::Approx(0.0));
    CHECK(ab.from() == FrameId::kLidar);
    CHECK(ab.to() == FrameId::kMap);
  }
  SUBCASE("matches applying both pointwise") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 10; ++trial) {
      const RigidTransform a = random_transform(rng, FrameId::kLidar, FrameId::kCar);
      const RigidTransform b = random_transform(rng, FrameId::kCar, FrameId::kMap);
      const RigidTransform ab = compose(a, b);
      for (int i = 0; i < 20; ++i) {
        const Point3 p = random_point(rng);
        CHECK((ab.apply(p) - b.apply(a.apply(p))).norm() <= 1e-9);
      }
    }
  }
  SUBCASE("rejects a broken chain") {
    const auto a = RigidTransform::identity(FrameId::kLidar, FrameId::kCar);
    const auto b = RigidTransform::identity(FrameId::kCamera, FrameId::kMap);
    CHECK_THROWS_AS(compose(a, b), Error);
  }
  SUBCASE("is associative") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
      const auto a = random_transform(rng, FrameId::kLidar, FrameId::kCar);
      const auto b = random_transform(rng, FrameId::kCar, FrameId::kCamera);
      const auto c = random_transform(rng, FrameId::kCamera, FrameId::kMap);
      const auto left = compose(compose(a, b), c);
      const auto right = compose(a, compose(b, c));
      CHECK((left.translation() - right.translation()).norm() <= 1e-9);
      CHECK((left.rotation_matrix() - right.rotation_matrix()).cwiseAbs().maxCoeff() <= 1e-9);
    }
  }
}

TEST_CASE("invert") {
  const auto id = invert(RigidTransform::identity(FrameId::kLidar, FrameId::kMap));
  CHECK(id.from() == FrameId::kMap);
  CHECK(id.to() == FrameId::kLidar);
  CHECK(id.translation().norm() == 0.0);
  CHECK(id.angle() == 0.0);

  const RigidTransform t(Eigen::Quaterniond::Identity(), {3, 0, 0}, FrameId::kLidar, FrameId::kMap);
  CHECK((invert(t).translation() - Eigen::Vector3d(-3, 0, 0)).norm() == 0.0);

  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const auto r = random_transform(rng, FrameId::kLidar, FrameId::kMap);
    const auto ri = invert(r);
    for (int i = 0; i < 10; ++i) {
      const Point3 p = random_point(rng);
      CHECK((ri.apply(r.apply(p)) - p).norm() <= 1e-9);
    }
  }
}

TEST_CASE("rigid transforms preserve distances and rotations are orthonormal") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const auto t = random_transform(rng, FrameId::kLidar, FrameId::kMap);
    const Eigen::Matrix3d r = t.rotation_matrix();
    CHECK((r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(std::abs(t.rotation().norm() - 1.0) <= 1e-9);
    const PointCloud c = random_cloud(rng, 10);
    const PointCloud m = transform_cloud(c, t);
    for (std::size_t i = 0; i < c.size(); ++i) {
      for (std::size_t j = i + 1; j < c.size(); ++j) {
        CHECK(std::abs((m.points[i] - m.points[j]).norm() - (c.points[i] - c.points[j]).norm()) <= 1e-9);
      }
    }
  }
}

TEST_CASE("near-zero quaternions are rejected") {
  CHECK_THROWS_AS(RigidTransform(Eigen::Quaterniond(1e-7, 0, 0, 0), Eigen::Vector3d::Zero(), FrameId::kLidar,
                                 FrameId::kMap),
                  Error);
}

TEST_CASE("pose parameters round trip through roll-pitch-yaw") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.2, 1.2);
  for (int trial = 0; trial < 50; ++trial) {
    PoseParams x;
    x << u(rng), u(rng), u(rng), u(rng), u(rng), u(rng);
    const auto t = RigidTransform::from_pose_params(x, FrameId::kLidar, FrameId::kMap);
    CHECK((t.to_pose_params() - x).cwiseAbs().maxCoeff() <= 1e-9);
    const Eigen::Matrix3d expected = (Eigen::AngleAxisd(x[5], Eigen::Vector3d::UnitZ()) *
                                      Eigen::AngleAxisd(x[4], Eigen::Vector3d::UnitY()) *
                                      Eigen::AngleAxisd(x[3], Eigen::Vector3d::UnitX()))
                                         .toRotationMatrix();
    CHECK((t.rotation_matrix() - expected).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("voxel_downsample") {
  SUBCASE("boundary points go to the floor voxel") {
    CHECK(voxel_index({2.0, -2.0, 0.0}, 2.0) == Eigen::Vector3i(1, -1, 0));
    CHECK(voxel_index({1.999, -0.001, 0.0}, 2.0) == Eigen::Vector3i(0, -1, 0));
  }
  SUBCASE("centroids per voxel and order independence") {
    std::mt19937_64 rng(9);
    PointCloud c = random_cloud(rng, 400);
    const PointCloud a = voxel_downsample(c, 4.0);
    std::shuffle(c.points.begin(), c.points.end(), rng);
    c.intensity.reset();
    c.labels.reset();
    const PointCloud b = voxel_downsample(c, 4.0);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK((a.points[i] - b.points[i]).norm() <= 1e-9);
  }
  SUBCASE("labels take the most frequent value, smallest on ties") {
    PointCloud c;
    c.labels.emplace();
    for (std::uint8_t l : {3, 2, 2, 3, 1}) {
      c.points.push_back({0.1, 0.1, 0.1});
      c.labels->push_back(l);
    }
    const PointCloud d = voxel_downsample(c, 1.0);
    REQUIRE(d.size() == 1);
    CHECK(d.labels->at(0) == 2);
  }
}

TEST_CASE("cloud validation") {
  PointCloud c;
  c.points.push_back({0, 0, 0});
  c.intensity = std::vector<float>{};
  CHECK_THROWS_AS(c.validate(), Error);
  c.intensity->push_back(1.0f);
  CHECK_NOTHROW(c.validate());
  c.points.push_back({std::nan(""), 0, 0});
  c.intensity->push_back(1.0f);
  CHECK_THROWS_AS(c.validate(), Error);
}
