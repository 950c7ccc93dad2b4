#include "hdmap/error.hpp"
#include "hdmap/evaluation.hpp"
#include "hdmap/polygon.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

using namespace hdmap;

namespace {

RoadPolygon square(double x0, double y0, double side = 1.0) {
  return RoadPolygon{{{x0, y0}, {x0 + side, y0}, {x0 + side, y0 + side}, {x0, y0 + side}}};
}

std::vector<Point2> random_convex(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> c(-1.0, 1.0), r(0.5, 2.0);
  const Point2 center(c(rng), c(rng));
  std::vector<Point2> pts;
  for (int i = 0; i < 12; ++i) {
    const double a = 2.0 * std::numbers::pi * i / 12.0 + 0.2 * c(rng);
    pts.push_back(center + r(rng) * Point2(std::cos(a), std::sin(a)));
  }
  return convex_hull(pts);
}

std::vector<Point2> random_star(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> c(-1.0, 1.0), r(0.4, 2.0);
  const Point2 center(c(rng), c(rng));
  std::vector<Point2> pts;
  for (int i = 0; i < 10; ++i) {
    const double a = 2.0 * std::numbers::pi * i / 10.0 + 0.25 * c(rng);
    pts.push_back(center + r(rng) * Point2(std::cos(a), std::sin(a)));
  }
  if (rng() % 2) std::reverse(pts.begin(), pts.end());
  return pts;
}

double monte_carlo_symdiff(const std::vector<Point2>& a, const std::vector<Point2>& b, std::mt19937_64& rng,
                           int samples) {
  Point2 lo(1e9, 1e9), hi(-1e9, -1e9);
  for (const auto* ring : {&a, &b})
    for (const auto& p : *ring) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
  std::uniform_real_distribution<double> ux(lo.x(), hi.x()), uy(lo.y(), hi.y());
  int hits = 0;
  for (int i = 0; i < samples; ++i) {
    const Point2 p(ux(rng), uy(rng));
    hits += point_in_polygon(p, a, 0.0) != point_in_polygon(p, b, 0.0);
  }
  return (hi - lo).prod() * hits / samples;
}

std::vector<Point3> densify(const std::vector<Point3>& line, double step) {
  std::vector<Point3> out;
  for (std::size_t i = 0; i + 1 < line.size(); ++i) {
    const int n = std::max(1, static_cast<int>(std::ceil((line[i + 1] - line[i]).norm() / step)));
    for (int k = 0; k < n; ++k) out.push_back(line[i] + (line[i + 1] - line[i]) * (static_cast<double>(k) / n));
  }
  out.push_back(line.back());
  return out;
}

Lane lane_of(int id, std::vector<Point3> pts) {
  Lane l;
  l.id = id;
  l.points = std::move(pts);
  return l;
}

Lane straight_lane(int id, double y, double x0 = 0.0, double x1 = 50.0, double step = 1.0) {
  Lane l;
  l.id = id;
  for (double x = x0; x <= x1 + 1e-9; x += step) l.points.emplace_back(x, y, 0.0);
  return l;
}

}  // namespace

TEST_CASE("road metrics on squares") {
  const auto a = square(0, 0);
  auto r = road_metrics(a, a, 0.25);
  CHECK(r.area_error_abs == doctest::Approx(0.0));
  CHECK(r.area_error_symdiff == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r.delta == 0.25);

  r = road_metrics(square(0.1, 0), a, 0.0);
  CHECK(r.area_pred == doctest::Approx(1.0));
  CHECK(r.area_error_abs == doctest::Approx(0.0));
  CHECK(r.area_error_symdiff == doctest::Approx(0.2));

  RoadPolygon cw = a;
  std::reverse(cw.vertices.begin(), cw.vertices.end());
  CHECK(road_metrics(cw, square(0.5, 0.5), 0.0).area_error_symdiff == doctest::Approx(1.5));
  CHECK(road_metrics(square(5, 5), a, 0.0).area_error_symdiff == doctest::Approx(2.0));
  CHECK(road_metrics(square(0.25, 0.25, 0.5), a, 0.0).area_error_symdiff == doctest::Approx(0.75));
}

TEST_CASE("symmetric difference matches Monte Carlo sampling") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 12; ++trial) {
    const bool convex = trial % 2 == 0;
    const auto a = convex ? random_convex(rng) : random_star(rng);
    const auto b = convex ? random_convex(rng) : random_star(rng);
    REQUIRE(is_simple(a));
    REQUIRE(is_simple(b));
    const double exact = symmetric_difference_area(a, b);
    const double mc = monte_carlo_symdiff(a, b, rng, 1'000'000);
    INFO("trial " << trial);
    CHECK(std::abs(exact - mc) <= 0.01 * exact);
    const double inter = intersection_area(a, b);
    CHECK(exact == doctest::Approx(polygon_area(RoadPolygon{a}) + polygon_area(RoadPolygon{b}) - 2.0 * inter));
    CHECK(symmetric_difference_area(b, a) == doctest::Approx(exact));
  }
}

TEST_CASE("road metrics are rigid invariant") {
  std::mt19937_64 rng(5);
  const RoadPolygon a{random_star(rng)}, b{random_star(rng)};
  const double base = road_metrics(a, b, 0.0).area_error_symdiff;
  const Eigen::Rotation2Dd rot(0.7);
  const Point2 t(120.0, -45.0);
  RoadPolygon ma = a, mb = b;
  for (auto& p : ma.vertices) p = rot * p + t;
  for (auto& p : mb.vertices) p = rot * p + t;
  CHECK(road_metrics(ma, mb, 0.0).area_error_symdiff == doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("degenerate polygons are rejected") {
  const auto ok = square(0, 0);
  CHECK_THROWS_AS(road_metrics(RoadPolygon{{{0, 0}, {1, 0}}}, ok, 0.0), Error);
  CHECK_THROWS_AS(road_metrics(ok, RoadPolygon{{{0, 0}, {1, 0}, {2, 0}}}, 0.0), Error);
  CHECK_THROWS_AS(road_metrics(RoadPolygon{{{0, 0}, {1, 1}, {1, 0}, {0, 1}}}, ok, 0.0), Error);
  CHECK_THROWS_AS(road_metrics(ok, RoadPolygon{{{0, 0}, {NAN, 0}, {1, 1}}}, 0.0), Error);
}

TEST_CASE("lane metrics") {
  const Lane gt = straight_lane(0, 0.0);
  SUBCASE("identical lanes") {
    const auto m = lane_metrics(gt, gt);
    CHECK(m.translation_error == doctest::Approx(0.0));
    CHECK(m.sigma_x == doctest::Approx(0.0));
    CHECK(m.sigma_y == doctest::Approx(0.0));
  }
  SUBCASE("constant lateral offset") {
    const auto m = lane_metrics(straight_lane(1, 0.5, 0.5, 49.5), gt);
    CHECK(m.translation_error == doctest::Approx(0.5));
    CHECK(m.sigma_x == doctest::Approx(0.0));
    CHECK(m.sigma_y == doctest::Approx(0.0));
    for (const auto& r : m.residuals) CHECK(r.y() == doctest::Approx(-0.5));
  }
  SUBCASE("dense sampling oracle") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 0.3);
    std::vector<Point3> curve, pred;
    for (double s = 0.0; s <= 40.0; s += 2.0) curve.emplace_back(s, 0.02 * s * s, 0.1 * std::sin(s));
    for (double s = 0.5; s < 40.0; s += 1.7) pred.emplace_back(s + n(rng), 0.02 * s * s + n(rng), n(rng));
    const auto dense = densify(curve, 1e-3);
    const auto m = lane_metrics(lane_of(0, pred), lane_of(1, curve));
    double total = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      double best = 1e18;
      for (const auto& q : dense) best = std::min(best, (q - pred[i]).norm());
      CHECK(std::abs(m.residuals[i].norm() - best) <= 1e-3);
      CHECK(m.residuals[i].norm() <= best + 1e-12);
      total += best;
    }
    CHECK(std::abs(m.translation_error - total / pred.size()) <= 1e-3);
  }
  SUBCASE("rigid invariance") {
    std::vector<Point3> curve, pred;
    for (double s = 0.0; s <= 30.0; s += 1.0) curve.emplace_back(s, 0.1 * s + std::sin(0.2 * s), 0.0);
    for (double s = 0.3; s < 30.0; s += 1.3) pred.emplace_back(s, 0.1 * s + std::sin(0.2 * s) + 0.2, 0.05);
    const auto base = lane_metrics(lane_of(0, pred), lane_of(1, curve));
    const Eigen::Matrix3d r = Eigen::AngleAxisd(1.1, Eigen::Vector3d::UnitZ()).toRotationMatrix();
    const Eigen::Vector3d t(30.0, -12.0, 0.0);
    for (auto& p : curve) p = r * p + t;
    for (auto& p : pred) p = r * p + t;
    const auto moved = lane_metrics(lane_of(0, pred), lane_of(1, curve));
    CHECK(moved.translation_error == doctest::Approx(base.translation_error).epsilon(1e-9));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(lane_metrics(Lane{}, gt), Error);
    CHECK_THROWS_AS(lane_metrics(gt, lane_of(0, {{0, 0, 0}})), Error);
    CHECK_THROWS_AS(closest_on_polyline({0, 0, 0}, {}), Error);
  }
}

TEST_CASE("lane matching") {
  const std::vector<Lane> gt{straight_lane(0, -3.5), straight_lane(1, 0.0), straight_lane(2, 3.5)};
  const std::vector<Lane> pred{straight_lane(7, 3.4), straight_lane(4, 0.2), straight_lane(9, 20.0)};
  const auto rep = evaluate_lanes(pred, gt, 2.0);
  REQUIRE(rep.matches.size() == 2);
  CHECK(rep.matches[0].pred_id == 4);
  CHECK(rep.matches[0].gt_id == 1);
  CHECK(rep.matches[1].pred_id == 7);
  CHECK(rep.matches[1].gt_id == 2);
  CHECK(rep.unmatched_pred == std::vector<int>{9});
  CHECK(rep.unmatched_gt == std::vector<int>{0});
  CHECK(rep.mean_translation_error == doctest::Approx(0.15));

  // Each ground-truth lane is claimed at most once.
  const auto dup = evaluate_lanes({straight_lane(0, 0.1), straight_lane(1, 0.2)}, {straight_lane(0, 0.0)});
  REQUIRE(dup.matches.size() == 1);
  CHECK(dup.matches[0].pred_id == 0);
  CHECK(dup.unmatched_pred == std::vector<int>{1});
}
