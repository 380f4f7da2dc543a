#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "doctest.h"
#include "oracles.hpp"
#include "refmod/rng.hpp"
#include "refmod/sim.hpp"

using namespace refmod;

namespace {

SimParams default_params() {
  SimParams p;
  p.validate();
  return p;
}

ObstacleMap random_map(Rng& rng, int n_obstacles) {
  ObstacleMap map;
  for (int i = 0; i < n_obstacles; ++i) {
    map.obstacles.push_back({{rng.uniform(1.0, 9.0), rng.uniform(-4.0, 4.0)},
                             rng.uniform(0.3, 1.5),
                             rng.uniform(0.3, 1.5)});
  }
  return map;
}

}  // namespace

TEST_CASE("step: zero steering advances exactly v*dt along heading") {
  const SimParams p = default_params();
  VehicleState s;
  s.v = 2.0;
  const VehicleState next = step(s, 2.0, 0.0, p);
  CHECK(next.x == 2.0 * p.dt);
  CHECK(next.y == 0.0);
  CHECK(next.theta == 0.0);
  CHECK(next.v == 2.0);
  CHECK(next.delta == 0.0);
}

TEST_CASE("step: constant steering traces a circle of radius l/tan(delta)") {
  SimParams p = default_params();
  const double delta = 0.2;
  const double v = 1.0;
  const double expect_r = p.wheelbase / std::tan(delta);

  auto radius_at_dt = [&](double dt) {
    SimParams q = p;
    q.dt = dt;
    VehicleState s;
    s.v = v;
    s.delta = delta;
    const double omega = v * std::tan(delta) / q.wheelbase;
    const auto steps = static_cast<size_t>(std::ceil(2.0 * M_PI / (omega * dt)));
    std::vector<Vec2> traj;
    traj.reserve(steps);
    for (size_t i = 0; i < steps; ++i) {
      s = step(s, v, delta, q);
      traj.push_back(s.position());
    }
    return oracles::fit_circle_radius(traj);
  };

  const double err_coarse = std::abs(radius_at_dt(0.01) - expect_r);
  CHECK(expect_r == doctest::Approx(1.628).epsilon(1e-3));
  CHECK(err_coarse / expect_r < 0.01);

  // first-order integrator: halving dt at least halves the radius error
  const double err_fine = std::abs(radius_at_dt(0.005) - expect_r);
  CHECK(err_fine <= 0.55 * err_coarse);
}

TEST_CASE("step: steering reference beyond the rate limit saturates") {
  const SimParams p = default_params();
  VehicleState s;  // delta = 0
  const VehicleState next = step(s, 0.0, 0.4, p);
  CHECK(next.delta == doctest::Approx(p.max_steer_rate * p.dt).epsilon(1e-12));
}

TEST_CASE("step: rejects non-finite input") {
  const SimParams p = default_params();
  VehicleState s;
  CHECK_THROWS_AS(step(s, std::nan(""), 0.0, p), std::invalid_argument);
  s.theta = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(step(s, 1.0, 0.0, p), std::invalid_argument);
}

TEST_CASE("step: heading conserved exactly with zero steering") {
  const SimParams p = default_params();
  VehicleState s;
  s.theta = 0.7;
  s.v = 3.0;
  for (int i = 0; i < 100000; ++i) s = step(s, 3.0, 0.0, p);
  CHECK(s.theta == 0.7);
  CHECK(s.delta == 0.0);
}

TEST_CASE("step: invariants hold under wild references") {
  const SimParams p = default_params();
  Rng rng(7);
  VehicleState s;
  for (int i = 0; i < 5000; ++i) {
    s = step(s, rng.uniform(0.0, p.v_max), rng.uniform(-p.delta_max, p.delta_max), p);
    CHECK(std::abs(s.delta) <= p.delta_max);
    CHECK(s.v >= 0.0);
    CHECK(s.v <= p.v_max);
    CHECK(s.theta <= M_PI);
    CHECK(s.theta > -M_PI);
  }
}

TEST_CASE("cast_scan: empty map returns max_range everywhere") {
  const SimParams p = default_params();
  const ObstacleMap map;
  VehicleState s;
  const Scan scan = cast_scan(s, map, p);
  REQUIRE(scan.ranges.size() == 10);
  for (const double r : scan.ranges) CHECK(r == p.max_range);
}

TEST_CASE("cast_scan: rectangle face two meters ahead") {
  SimParams p = default_params();
  p.n_beams = 11;  // odd count gives an exact straight-ahead beam
  ObstacleMap map;
  map.obstacles.push_back({{2.5, 0.0}, 1.0, 1.0});
  VehicleState s;
  const Scan scan = cast_scan(s, map, p);
  CHECK(scan.angles[5] == doctest::Approx(0.0));
  CHECK(scan.ranges[5] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("cast_scan: beam parallel to an obstacle face misses it") {
  SimParams p = default_params();
  p.n_beams = 11;
  ObstacleMap map;
  map.obstacles.push_back({{3.0, 2.0}, 1.0, 1.0});  // off to the side
  VehicleState s;
  const Scan scan = cast_scan(s, map, p);
  CHECK(scan.ranges[5] == p.max_range);
}

TEST_CASE("cast_scan: matches the slab-method oracle on random maps") {
  SimParams p = default_params();
  p.n_beams = 21;
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const ObstacleMap map = random_map(rng, 6);
    VehicleState s;
    s.x = rng.uniform(-1.0, 0.5);
    s.y = rng.uniform(-1.0, 1.0);
    s.theta = rng.uniform(-M_PI, M_PI);
    const Scan scan = cast_scan(s, map, p);
    for (size_t b = 0; b < scan.ranges.size(); ++b) {
      const double a = s.theta + scan.angles[b];
      const Vec2 dir{std::cos(a), std::sin(a)};
      double best = p.max_range;
      for (const Rect& r : map.obstacles) {
        double t = 0.0;
        if (oracles::ray_aabb(s.position(), dir, r, t)) best = std::min(best, t);
      }
      CHECK(scan.ranges[b] == doctest::Approx(best).epsilon(1e-9));
    }
  }
}

TEST_CASE("cast_scan: mirrored map reverses the ranges sequence") {
  SimParams p = default_params();
  Rng rng(1234);
  for (int trial = 0; trial < 20; ++trial) {
    const ObstacleMap map = random_map(rng, 5);
    ObstacleMap mirrored = map;
    for (Rect& r : mirrored.obstacles) r.center.y = -r.center.y;
    VehicleState s;  // at origin, heading +x: mirror axis is the heading axis
    const Scan a = cast_scan(s, map, p);
    const Scan b = cast_scan(s, mirrored, p);
    for (int i = 0; i < p.n_beams; ++i) {
      CHECK(a.ranges[static_cast<size_t>(i)] ==
            doctest::Approx(b.ranges[static_cast<size_t>(p.n_beams - 1 - i)])
                .epsilon(1e-12));
    }
  }
}

TEST_CASE("check_collision: open space, overlap, and 1 mm graze") {
  const SimParams p = default_params();
  ObstacleMap map;
  map.obstacles.push_back({{5.0, 0.0}, 1.0, 1.0});
  VehicleState s;
  CHECK_FALSE(check_collision(s, map, p));

  s.x = 5.0;
  CHECK(check_collision(s, map, p));

  // footprint spans x in [0, length]; obstacle face at 4.5: a 1 mm overlap
  s.x = 4.5 - p.length + 1e-3;
  s.y = 0.0;
  CHECK(check_collision(s, map, p));
  const Obb foot = vehicle_footprint(s, p);
  const std::vector<Vec2> rect_poly = {{4.5, -0.5}, {5.5, -0.5}, {5.5, 0.5}, {4.5, 0.5}};
  CHECK(oracles::polygons_intersect(foot.corners(), rect_poly));

  s.x = 4.5 - p.length - 1e-3;  // 1 mm clear
  CHECK_FALSE(check_collision(s, map, p));
  CHECK_FALSE(oracles::polygons_intersect(vehicle_footprint(s, p).corners(), rect_poly));
}

TEST_CASE("check_collision: agrees with the polygon-intersection oracle") {
  const SimParams p = default_params();
  Rng rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    ObstacleMap map;
    const Rect r{{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)},
                 rng.uniform(0.2, 1.2),
                 rng.uniform(0.2, 1.2)};
    map.obstacles.push_back(r);
    VehicleState s;
    s.x = rng.uniform(-1.5, 1.5);
    s.y = rng.uniform(-1.5, 1.5);
    s.theta = rng.uniform(-M_PI, M_PI);
    const std::vector<Vec2> rect_poly = {{r.min_x(), r.min_y()},
                                         {r.max_x(), r.min_y()},
                                         {r.max_x(), r.max_y()},
                                         {r.min_x(), r.max_y()}};
    const bool expect =
        oracles::polygons_intersect(vehicle_footprint(s, p).corners(), rect_poly);
    CHECK(check_collision(s, map, p) == expect);
  }
}

TEST_CASE("check_collision: growing an obstacle never clears a collision") {
  const SimParams p = default_params();
  Rng rng(17);
  int collisions = 0;
  for (int trial = 0; trial < 500; ++trial) {
    ObstacleMap map;
    map.obstacles.push_back({{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)},
                             rng.uniform(0.2, 1.0),
                             rng.uniform(0.2, 1.0)});
    VehicleState s;
    s.x = rng.uniform(-1.0, 1.0);
    s.y = rng.uniform(-1.0, 1.0);
    s.theta = rng.uniform(-M_PI, M_PI);
    if (!check_collision(s, map, p)) continue;
    ++collisions;
    map.obstacles[0].w += rng.uniform(0.0, 2.0);
    map.obstacles[0].h += rng.uniform(0.0, 2.0);
    CHECK(check_collision(s, map, p));
  }
  CHECK(collisions > 50);
}

TEST_CASE("check_collision: leaving the drivable region") {
  const SimParams p = default_params();
  ObstacleMap map;
  map.boundaries.push_back({{0.0, -2.0}, {10.0, -2.0}, {10.0, 2.0}, {0.0, 2.0}});
  VehicleState s;
  s.x = 5.0;
  CHECK_FALSE(check_collision(s, map, p));
  s.y = 1.9;  // footprint pokes through the wall
  CHECK(check_collision(s, map, p));
  s.y = 3.0;  // fully outside
  CHECK(check_collision(s, map, p));
}

TEST_CASE("obstacle map file round trip and errors") {
  const auto dir = std::filesystem::temp_directory_path() / "refmod_sim_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "map.txt").string();

  ObstacleMap map;
  map.boundaries.push_back({{0.0, 0.0}, {10.0, 0.0}, {10.0, 5.0}, {0.0, 5.0}});
  map.boundaries.push_back({{4.0, 2.0}, {6.0, 2.0}, {6.0, 3.0}, {4.0, 3.0}});
  map.obstacles.push_back({{2.0, 1.0}, 0.5, 0.75});
  save_obstacle_map(map, path);

  const ObstacleMap loaded = load_obstacle_map(path);
  REQUIRE(loaded.boundaries.size() == 2);
  REQUIRE(loaded.obstacles.size() == 1);
  CHECK(loaded.obstacles[0].center.x == 2.0);
  CHECK(loaded.obstacles[0].h == 0.75);
  CHECK(loaded.point_in_region({1.0, 1.0}));
  CHECK_FALSE(loaded.point_in_region({5.0, 2.5}));  // inside the hole
  CHECK_FALSE(loaded.point_in_region({-1.0, 1.0}));

  CHECK_THROWS_AS(load_obstacle_map((dir / "missing.txt").string()),
                  std::invalid_argument);
  {
    std::ofstream bad((dir / "bad.txt").string());
    bad << "obstacle 1.0 2.0\n";
  }
  CHECK_THROWS_AS(load_obstacle_map((dir / "bad.txt").string()),
                  std::invalid_argument);
}
