#include "hdmap/error.hpp"
#include "hdmap/polygon.hpp"
#include "hdmap/road.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace hdmap;
using namespace hdmap::testing;

namespace {

PointCloud cloud_from_z(const std::vector<double>& z) {
  PointCloud c;
  for (std::size_t i = 0; i < z.size(); ++i) c.points.push_back({static_cast<double>(i) * 0.01, 0.0, z[i]});
  return c;
}

}  // namespace

TEST_CASE("otsu threshold") {
  SUBCASE("two symmetric deltas split at the midpoint") {
    std::vector<double> v(50, 0.0);
    v.insert(v.end(), 50, 10.0);
    CHECK(otsu_threshold(v, 10) == doctest::Approx(5.0));
  }
  SUBCASE("unequal deltas match exhaustive search") {
    std::vector<double> v(40, 1.0);
    v.insert(v.end(), 60, 5.0);
    const auto hist = make_histogram(v, 8);
    CHECK(otsu_boundary(hist) == exhaustive_otsu(v, 8));
  }
  SUBCASE("single distinct value is degenerate") {
    std::vector<double> v(20, 3.0);
    CHECK_THROWS_AS(otsu_threshold(v, 16), Error);
  }
  SUBCASE("random bimodal samples match exhaustive search exactly") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
      const double m1 = u(rng) * 2.0 - 1.0, m2 = m1 + 0.05 + u(rng);
      std::normal_distribution<double> a(m1, 0.01 + 0.1 * u(rng)), b(m2, 0.01 + 0.1 * u(rng));
      const int n1 = 50 + static_cast<int>(u(rng) * 500), n2 = 20 + static_cast<int>(u(rng) * 300);
      std::vector<double> v;
      for (int i = 0; i < n1; ++i) v.push_back(a(rng));
      for (int i = 0; i < n2; ++i) v.push_back(b(rng));
      const int bins = 8 + static_cast<int>(u(rng) * 249);
      const auto hist = make_histogram(v, bins);
      const int oracle = exhaustive_otsu(v, bins);
      CHECK(otsu_boundary(hist) == oracle);
      CHECK(otsu_threshold(v, bins) == hist.boundary(oracle));
    }
  }
  SUBCASE("histogram counts everything") {
    std::vector<double> v{0.0, 0.1, 0.5, 0.99, 1.0};
    const auto h = make_histogram(v, 4);
    std::int64_t total = 0;
    for (auto c : h.counts) total += c;
    CHECK(total == 5);
    CHECK(h.counts[3] == 2);
  }
}

TEST_CASE("curb filter") {
  SUBCASE("road and curb modes") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> road(-1.8, 0.02), curb(-1.65, 0.02);
    std::vector<double> z;
    for (int i = 0; i < 900; ++i) z.push_back(road(rng));
    for (int i = 0; i < 100; ++i) z.push_back(curb(rng));
    PointCloud c = cloud_from_z(z);
    c.intensity.emplace();
    for (std::size_t i = 0; i < c.size(); ++i) c.intensity->push_back(static_cast<float>(i));
    const auto [kept, report] = curb_filter(c, CurbFilterConfig{});
    int curb_left = 0, road_left = 0;
    for (float id : *kept.intensity) (id >= 900 ? curb_left : road_left)++;
    CHECK(curb_left <= 5);
    CHECK(road_left >= 540);
    CHECK(report.split_applied);
    CHECK(report.mu1 == doctest::Approx(-1.8).epsilon(0.01));
    CHECK(report.delta == 1.0 - static_cast<double>(report.kept) / static_cast<double>(report.total));

    double lo = 1e9, hi = -1e9;
    for (const auto& p : kept.points) {
      lo = std::min(lo, p.z());
      hi = std::max(hi, p.z());
    }
    CHECK(hi - lo <= 2.0 * report.sigma1 + 1e-9);
  }
  SUBCASE("flat cloud keeps everything") {
    const auto [kept, report] = curb_filter(cloud_from_z(std::vector<double>(80, -1.8)), CurbFilterConfig{});
    CHECK(kept.size() == 80);
    CHECK(report.delta == 0.0);
    CHECK_FALSE(report.split_applied);
  }
  SUBCASE("delta arithmetic") {
    CurbFilterReport r;
    r.total = 1000;
    r.kept = 840;
    CHECK(1.0 - static_cast<double>(r.kept) / static_cast<double>(r.total) == doctest::Approx(0.16));
  }
  SUBCASE("too few points") {
    CHECK_THROWS_AS(curb_filter(cloud_from_z({0.0, 1.0}), CurbFilterConfig{}), Error);
  }
  SUBCASE("lower-class override") {
    std::vector<double> z(30, 0.0);
    z.insert(z.end(), 70, 1.0);
    CurbFilterConfig cfg;
    CHECK(curb_filter(cloud_from_z(z), cfg).second.mu1 == doctest::Approx(1.0));
    cfg.road_is_lower_class = true;
    CHECK(curb_filter(cloud_from_z(z), cfg).second.mu1 == doctest::Approx(0.0));
  }
}

TEST_CASE("concave hull") {
  SUBCASE("unit square") {
    const std::vector<Point2> sq{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    const RoadPolygon p = concave_hull(sq, 3);
    CHECK(same_ring(p.vertices, sq));
  }
  SUBCASE("collinear input is an error") {
    const std::vector<Point2> line{{0, 0}, {1, 1}, {2, 2}, {3, 3}};
    CHECK_THROWS_AS(concave_hull(line, 3), Error);
    CHECK_THROWS_AS(concave_hull(std::vector<Point2>{{0, 0}, {1, 0}}, 3), Error);
  }
  SUBCASE("L-shaped grid") {
    std::vector<Point2> pts;
    for (int i = 0; i <= 20; ++i)
      for (int j = 0; j <= 20; ++j)
        if (i <= 6 || j <= 6) pts.emplace_back(i * 0.5, j * 0.5);
    const auto res = concave_hull_ex(pts, ConcaveHullConfig{5, 3});
    CHECK_FALSE(res.convex_fallback);
    CHECK(is_simple(res.polygon.vertices));
    CHECK(signed_area(res.polygon.vertices) > 0.0);
    for (const auto& p : pts) CHECK(point_in_polygon(p, res.polygon.vertices, 1e-9));
    CHECK(polygon_area(res.polygon) < std::abs(signed_area(convex_hull(pts))) - 1.0);
  }
  SUBCASE("random sets") {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> size(5, 120), kpick(3, 12);
    for (int trial = 0; trial < 200; ++trial) {
      const auto pts = random_points(rng, static_cast<std::size_t>(size(rng)));
      const auto hull = concave_hull(pts, kpick(rng));
      REQUIRE(hull.vertices.size() >= 3);
      CHECK(is_simple(hull.vertices));
      CHECK(signed_area(hull.vertices) > 0.0);
      bool contains = true;
      for (const auto& p : pts) contains = contains && point_in_polygon(p, hull.vertices, 1e-9);
      CHECK(contains);
      const auto oracle = brute_force_hull(pts);
      CHECK(polygon_area(hull) <= std::abs(signed_area(oracle)) + 1e-9);
      const auto full = concave_hull(pts, static_cast<int>(pts.size()) - 1);
      CHECK(same_ring(full.vertices, oracle));
    }
  }
}

TEST_CASE("polygon area") {
  CHECK(polygon_area({{{0, 0}, {1, 0}, {1, 1}, {0, 1}}}) == 1.0);
  CHECK(polygon_area({{{0, 0}, {2, 0}, {0, 2}}}) == 2.0);
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const auto ring = brute_force_hull(random_points(rng, 30));
    double fan = 0.0;
    for (std::size_t i = 1; i + 1 < ring.size(); ++i) {
      const Point2 a = ring[i] - ring[0], b = ring[i + 1] - ring[0];
      fan += 0.5 * std::abs(a.x() * b.y() - a.y() * b.x());
    }
    CHECK(polygon_area({ring}) == doctest::Approx(fan).epsilon(1e-12));
  }
}

TEST_CASE("road accumulation") {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> x(0.0, 20.0), y(-3.5, 3.5);
  std::vector<PointCloud> scans(4);
  for (auto& s : scans)
    for (int i = 0; i < 400; ++i) s.points.push_back({x(rng), y(rng), -1.8});
  const RigidTransform a(Eigen::Quaterniond::Identity(), {0, 0, 0}, FrameId::kLidar, FrameId::kMap);
  const RigidTransform b(Eigen::Quaterniond(Eigen::AngleAxisd(0.3, Eigen::Vector3d::UnitZ())), {40, 10, 0},
                         FrameId::kLidar, FrameId::kMap);

  SUBCASE("finalized polygon contains every accumulated point") {
    RoadAccumulator acc(0.2);
    acc.update(scans[0], a);
    acc.update(scans[1], b);
    const RoadPolygon poly = finalize_road(acc, ConcaveHullConfig{});
    for (const auto& p : acc.points()) CHECK(point_in_polygon(p, poly.vertices, 1e-9));
    CHECK_NOTHROW(poly.validate());
  }
  SUBCASE("order independent") {
    RoadAccumulator fwd(0.2), rev(0.2);
    const std::vector<RigidTransform> poses{a, b, a, b};
    for (int i = 0; i < 4; ++i) fwd.update(scans[i], poses[i]);
    for (int i = 3; i >= 0; --i) {
      PointCloud s = scans[i];
      std::shuffle(s.points.begin(), s.points.end(), rng);
      rev.update(s, poses[i]);
    }
    CHECK(fwd.points() == rev.points());
    CHECK(finalize_road(fwd, ConcaveHullConfig{}).vertices == finalize_road(rev, ConcaveHullConfig{}).vertices);
  }
  SUBCASE("too few points") {
    RoadAccumulator acc(0.2);
    PointCloud s;
    s.points = {{0, 0, 0}, {1, 0, 0}};
    acc.update(s, a);
    CHECK_THROWS_AS(finalize_road(acc, ConcaveHullConfig{}), Error);
  }
}
