#include "evobot/world.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "gtest/gtest.h"

namespace evobot {
namespace {

World empty_world() {
  WorldConfig cfg;
  return make_world(cfg);
}

RobotState at(double x, double y, double heading) {
  RobotState s;
  s.x = x;
  s.y = y;
  s.heading = heading;
  return s;
}

TEST(MakeWorld, FlatWithoutObstacles) {
  const World w = make_world(TerrainKind::kFlat, 0, 123);
  EXPECT_TRUE(w.obstacles.empty());
  for (double h : w.terrain.heights()) EXPECT_EQ(h, 0.0);
  EXPECT_EQ(w.starts.size(), 4u);
}

TEST(MakeWorld, BumpyIsDeterministicAndBounded) {
  const World a = make_world(TerrainKind::kBumpy, 0, 5);
  const World b = make_world(TerrainKind::kBumpy, 0, 5);
  const World c = make_world(TerrainKind::kBumpy, 0, 6);
  EXPECT_EQ(a.terrain.heights(), b.terrain.heights());
  EXPECT_NE(a.terrain.heights(), c.terrain.heights());
  double peak = 0.0;
  for (double h : a.terrain.heights()) peak = std::max(peak, std::abs(h));
  EXPECT_LE(peak, a.terrain.amplitude());
  EXPECT_GT(peak, 0.0);
  // Grid covers the bounds.
  EXPECT_GE((a.terrain.nx() - 1) * a.terrain.cell_size(), a.bounds.width());
  EXPECT_GE((a.terrain.ny() - 1) * a.terrain.cell_size(), a.bounds.height());
}

TEST(MakeWorld, CombinedIsFlatOnTheLeftHalf) {
  const World w = make_world(TerrainKind::kCombined, 0, 3);
  const Terrain& t = w.terrain;
  double right_peak = 0.0;
  for (int j = 0; j < t.ny(); ++j) {
    for (int i = 0; i < t.nx(); ++i) {
      const double x = w.bounds.x_min + i * t.cell_size();
      if (x < 5.0) {
        EXPECT_EQ(t.node(i, j), 0.0);
      } else {
        right_peak = std::max(right_peak, std::abs(t.node(i, j)));
      }
    }
  }
  EXPECT_GT(right_peak, 0.0);
}

TEST(MakeWorld, ObstaclesKeepClearOfStartsTargetAndEachOther) {
  const RobotBody body;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const World w = make_world(TerrainKind::kBumpy, 5, seed);
    ASSERT_EQ(w.obstacles.size(), 5u);
    for (std::size_t i = 0; i < w.obstacles.size(); ++i) {
      const Obstacle& o = w.obstacles[i];
      for (const Pose& s : w.starts) {
        EXPECT_GE(std::hypot(o.center.x - s.x, o.center.y - s.y) - o.radius - body.body_radius,
                  body.body_radius - 1e-12);
      }
      EXPECT_GE(std::hypot(o.center.x - w.target.center.x, o.center.y - w.target.center.y) - o.radius -
                    w.target.radius,
                body.body_radius - 1e-12);
      for (std::size_t j = i + 1; j < w.obstacles.size(); ++j) {
        const Obstacle& p = w.obstacles[j];
        EXPECT_GE(std::hypot(o.center.x - p.center.x, o.center.y - p.center.y), o.radius + p.radius);
      }
    }
  }
}

TEST(MakeWorld, TooManyObstaclesIsPlacementError) {
  EXPECT_THROW(make_world(TerrainKind::kFlat, 400, 1), PlacementError);
}

TEST(CornerStarts, FaceTheTarget) {
  const World w = empty_world();
  for (const Pose& p : w.starts) {
    const double bearing = std::atan2(w.target.center.y - p.y, w.target.center.x - p.x);
    EXPECT_NEAR(std::remainder(p.heading - bearing, 2 * std::numbers::pi), 0.0, 1e-12);
  }
  EXPECT_DOUBLE_EQ(w.starts[0].x, 0.6);
  EXPECT_DOUBLE_EQ(w.starts[2].y, 9.4);
}

TEST(Step, ZeroMotorLeavesStateUnchanged) {
  const World w = empty_world();
  const RobotBody body;
  const RobotState s0 = initial_state(w, body, {3, 4, 0.7});
  const RobotState s1 = step(w, body, s0, {0, 0}, {});
  EXPECT_EQ(s1.x, s0.x);
  EXPECT_EQ(s1.y, s0.y);
  EXPECT_EQ(s1.heading, s0.heading);
  EXPECT_EQ(s1.wheel_angle_left, 0.0);
  EXPECT_EQ(s1.wheel_angle_right, 0.0);
}

TEST(Step, StraightLineDisplacement) {
  const World w = empty_world();
  const RobotBody body;
  const StepConfig cfg;
  const RobotState s0 = initial_state(w, body, {3, 4, 0.3});
  const RobotState s1 = step(w, body, s0, {1, 1}, cfg);
  EXPECT_DOUBLE_EQ(s1.heading, s0.heading);
  const double expected = body.wheel_radius * body.omega_max * cfg.dt();
  EXPECT_NEAR(std::hypot(s1.x - s0.x, s1.y - s0.y), expected, 1e-12);
  EXPECT_NEAR(std::atan2(s1.y - s0.y, s1.x - s0.x), 0.3, 1e-12);
}

TEST(Step, SpinInPlaceMatchesClosedForm) {
  const World w = empty_world();
  const RobotBody body;
  const StepConfig cfg;
  RobotState s = initial_state(w, body, {5, 5, 0});
  const int k = 37;
  for (int i = 0; i < k; ++i) s = step(w, body, s, {-1, 1}, cfg);
  EXPECT_LT(std::hypot(s.x - 5, s.y - 5), 1e-9);
  const double omega = body.wheel_radius * 2 * body.omega_max / body.wheel_base;
  EXPECT_NEAR(std::remainder(s.heading - omega * cfg.dt() * k, 2 * std::numbers::pi), 0.0, 1e-9);
}

TEST(Step, WheelAnglesAccumulateAbsoluteCommand) {
  const World w = empty_world();
  const RobotBody body;
  const StepConfig cfg;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  RobotState s = initial_state(w, body, {5, 5, 0});
  double left = 0.0;
  double right = 0.0;
  for (int i = 0; i < 200; ++i) {
    const MotorCommand m{u(rng), u(rng)};
    left += std::abs(m.left) * body.omega_max * cfg.dt();
    right += std::abs(m.right) * body.omega_max * cfg.dt();
    s = step(w, body, s, m, cfg);
  }
  EXPECT_NEAR(s.wheel_angle_left, left, 1e-9);
  EXPECT_NEAR(s.wheel_angle_right, right, 1e-9);
}

TEST(Step, CollisionStopsAndFlags) {
  World w = empty_world();
  const RobotBody body;
  w.obstacles.push_back({{5.0 + body.body_radius + 0.5 + 0.05, 5.0}, 0.5});
  const RobotState s0 = initial_state(w, body, {5, 5, 0});
  const RobotState s1 = step(w, body, s0, {1, 1}, {});
  EXPECT_TRUE(s1.contact);
  EXPECT_EQ(s1.x, s0.x);
  EXPECT_EQ(s1.y, s0.y);
  EXPECT_GT(s1.wheel_angle_left, 0.0);
}

TEST(Step, BoundsBlockMotion) {
  const World w = empty_world();
  const RobotBody body;
  const RobotState s0 = initial_state(w, body, {body.body_radius + 0.01, 5, std::numbers::pi});
  const RobotState s1 = step(w, body, s0, {1, 1}, {});
  EXPECT_TRUE(s1.contact);
  EXPECT_EQ(s1.x, s0.x);
}

TEST(Step, FlatClearanceIsNominal) {
  const World w = empty_world();
  const RobotBody body;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1, 1);
  RobotState s = initial_state(w, body, {5, 5, 1});
  for (int i = 0; i < 300; ++i) {
    s = step(w, body, s, {u(rng), u(rng)}, {});
    EXPECT_EQ(s.clearance, body.nominal_clearance);
  }
}

// Uphill travel covers (1 - grade) of the flat distance, with the grade taken
// as a central difference of the height field across one cell.
TEST(Step, UphillSlowsByGrade) {
  const World w = make_world(TerrainKind::kBumpy, 0, 21);
  const RobotBody body;
  const StepConfig cfg;
  int checked = 0;
  for (double x = 2; x < 8 && checked < 20; x += 0.37) {
    for (double h = 0; h < 6.28 && checked < 20; h += 0.9) {
      const double eps = 0.5 * w.terrain.cell_size();
      const double grade = (w.terrain.height_at(x + eps * std::cos(h), 5 + eps * std::sin(h)) -
                            w.terrain.height_at(x - eps * std::cos(h), 5 - eps * std::sin(h))) /
                           (2 * eps);
      if (grade <= 0.05 || grade >= 0.9) continue;
      const RobotState s0 = initial_state(w, body, {x, 5, h});
      const RobotState s1 = step(w, body, s0, {1, 1}, cfg);
      const double flat = body.wheel_radius * body.omega_max * cfg.dt();
      EXPECT_NEAR(std::hypot(s1.x - s0.x, s1.y - s0.y), flat * (1 - grade), 1e-12);
      ++checked;
    }
  }
  EXPECT_GT(checked, 0);
}

TEST(Step, RoughTerrainLowersClearance) {
  const World w = make_world(TerrainKind::kBumpy, 0, 8);
  const RobotBody body;
  const RobotState s = initial_state(w, body, {5, 5, 0});
  EXPECT_LT(s.clearance, body.nominal_clearance);
  EXPECT_GE(s.clearance, 0.0);
}

TEST(Sense, EmptySurroundingsReadZero) {
  const World w = empty_world();
  const SensorReading r = sense(w, RobotBody{}, at(5, 5, 0.4));
  for (double p : r.proximity) EXPECT_EQ(p, 0.0);
}

TEST(Sense, ObstacleTouchingBodyEdgeReadsOne) {
  World w = empty_world();
  RobotBody body;
  const double bearing = body.sensor_bearings[4];
  const double reach = body.body_radius + 0.4;
  w.obstacles.push_back({{5 + reach * std::cos(bearing), 5 + reach * std::sin(bearing)}, 0.4});
  EXPECT_NEAR(sense(w, body, at(5, 5, 0)).proximity[4], 1.0, 1e-12);
}

TEST(Sense, HalfRangeReadsHalf) {
  const RobotBody body;
  for (int k = 0; k < kSensorCount; ++k) {
    World w = empty_world();
    const double a = 0.25 + body.sensor_bearings[k];
    const double reach = body.body_radius + body.sensor_range / 2 + 0.3;
    w.obstacles.push_back({{5 + reach * std::cos(a), 5 + reach * std::sin(a)}, 0.3});
    EXPECT_NEAR(sense(w, body, at(5, 5, 0.25)).proximity[k], 0.5, 1e-9) << "sensor " << k;
  }
}

TEST(Sense, WallDistanceMatchesGeometry) {
  const World w = empty_world();
  const RobotBody body;
  // Facing the x_max wall; the +-15 degree pair sees it symmetrically.
  const RobotState s = at(10 - body.body_radius - 0.9, 5, 0);
  const SensorReading r = sense(w, body, s);
  const double b = body.sensor_bearings[5];
  const double d = (10 - (s.x + body.body_radius * std::cos(b))) / std::cos(b);
  EXPECT_NEAR(r.proximity[5], 1 - d / body.sensor_range, 1e-12);
  EXPECT_NEAR(r.proximity[4], r.proximity[5], 1e-12);
}

TEST(Sense, MirroredWorldSwapsMirroredBearings) {
  const RobotBody body;
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int trial = 0; trial < 50; ++trial) {
    World a = empty_world();
    World b = empty_world();
    for (int i = 0; i < 4; ++i) {
      const double dx = u(rng);
      const double dy = u(rng);
      if (std::hypot(dx, dy) < 0.8) continue;
      a.obstacles.push_back({{5 + dx, 5 + dy}, 0.3});
      b.obstacles.push_back({{5 + dx, 5 - dy}, 0.3});
    }
    const SensorReading ra = sense(a, body, at(5, 5, 0));
    const SensorReading rb = sense(b, body, at(5, 5, 0));
    for (int k = 0; k < kSensorCount; ++k) EXPECT_NEAR(ra.proximity[k], rb.proximity[9 - k], 1e-12);
  }
}

TEST(ReachedTarget, CenterAndInclusiveBoundary) {
  const World w = empty_world();
  const RobotBody body;
  EXPECT_TRUE(reached_target(w, body, at(5, 5, 0)));
  const double edge = w.target.radius + body.body_radius;
  EXPECT_TRUE(reached_target(w, body, at(5 + edge, 5, 0)));
  EXPECT_FALSE(reached_target(w, body, at(5 + edge + 1e-9, 5, 0)));
}

TEST(ReachedTarget, AgreesWithBruteForceDistance) {
  const World w = empty_world();
  const RobotBody body;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(3.5, 6.5);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng);
    const double y = u(rng);
    const double dx = x - 5;
    const double dy = y - 5;
    const double r = w.target.radius + body.body_radius;
    if (std::abs(dx * dx + dy * dy - r * r) < 1e-12) continue;
    EXPECT_EQ(reached_target(w, body, at(x, y, 0)), dx * dx + dy * dy < r * r);
  }
}

TEST(Determinism, IdenticalInputsGiveIdenticalTrajectories) {
  const World w = make_world(TerrainKind::kBumpy, 5, 11);
  const RobotBody body;
  auto run = [&] {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1, 1);
    RobotState s = initial_state(w, body, w.start());
    std::vector<RobotState> out;
    for (int i = 0; i < 500; ++i) {
      s = step(w, body, s, {u(rng), u(rng)}, {});
      out.push_back(s);
    }
    return out;
  };
  EXPECT_EQ(run(), run());
}

TEST(StepConfig, CoarsenessInterpolatesDt) {
  StepConfig c;
  c.coarseness = 0.0;
  EXPECT_DOUBLE_EQ(c.dt(), 0.05);
  c.coarseness = 1.0;
  EXPECT_DOUBLE_EQ(c.dt(), 0.15);
  c.coarseness = 0.5;
  EXPECT_EQ(c.steps(), 1000);
  EXPECT_TRUE(c.valid());
  c.t_finish = c.t_start;
  EXPECT_FALSE(c.valid());
}

TEST(TrajectoryCsv, RoundTripsExactly) {
  const World w = make_world(TerrainKind::kBumpy, 3, 4);
  const RobotBody body;
  Trajectory traj;
  RobotState s = initial_state(w, body, w.start());
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 50; ++i) {
    const MotorCommand m{u(rng), u(rng)};
    traj.push_back({i * 0.1, s, m, sense(w, body, s)});
    s = step(w, body, s, m, {});
  }
  std::stringstream ss;
  write_trajectory_csv(ss, traj);
  const std::string header = ss.str().substr(0, ss.str().find('\n'));
  EXPECT_EQ(header.rfind("t,x,y,heading,clearance,motor_l,motor_r,s0,", 0), 0u);
  const Trajectory back = read_trajectory_csv(ss);
  ASSERT_EQ(back.size(), traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i) {
    EXPECT_EQ(back[i].state.x, traj[i].state.x);
    EXPECT_EQ(back[i].motor, traj[i].motor);
    EXPECT_EQ(back[i].reading.proximity, traj[i].reading.proximity);
    EXPECT_EQ(back[i].reading.rotation_rate_left, traj[i].reading.rotation_rate_left);
  }
}

}  // namespace
}  // namespace evobot
