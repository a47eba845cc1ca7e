#include "evobot/fitness.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "gtest/gtest.h"

namespace evobot {
namespace {

// A perceptron that drives both wheels at tanh(k) regardless of input.
Controller constant_drive(double k) {
  const Topology t(0);
  std::vector<double> w(t.edges().size(), 0.0);
  w[static_cast<std::size_t>(t.edge_index(kBiasInput, t.output_unit(0)))] = k;
  w[static_cast<std::size_t>(t.edge_index(kBiasInput, t.output_unit(1)))] = k;
  return Controller(t, w);
}

TEST(EvaluateTrial, ZeroWeightsScoreZero) {
  const World w = make_world(TerrainKind::kFlat, 0, 1);
  const TrialResult r = evaluate_trial(w, RobotBody{}, Controller{}, FitnessConfig{}, 1);
  EXPECT_EQ(r.fitness, 0.0);
  EXPECT_EQ(r.rotations_left, 0.0);
  EXPECT_EQ(r.rotations_right, 0.0);
  EXPECT_FALSE(r.reached);
  EXPECT_EQ(r.steps_used, FitnessConfig{}.max_steps);
  EXPECT_EQ(r.sensor_performance, 1.0);
}

// Hand-computed: the corner start faces the target, so a constant command
// drives straight in; the step count to contact is the first k with
// k·v·dt >= gap, and the rotation term follows from the same k.
TEST(EvaluateTrial, StraightRunMatchesClosedForm) {
  const World w = make_world(TerrainKind::kFlat, 0, 1);
  const RobotBody body;
  const FitnessConfig cfg;
  const double drive = std::tanh(3.0);
  const double step_len = body.wheel_radius * body.omega_max * drive * cfg.step_cfg.dt();
  const Pose s = w.start();
  const double gap = std::hypot(s.x - 5, s.y - 5) - w.target.radius - body.body_radius;
  const int k = static_cast<int>(std::ceil(gap / step_len - 1e-12));

  const TrialResult r = evaluate_trial(w, body, constant_drive(3.0), cfg, 1);
  ASSERT_TRUE(r.reached);
  EXPECT_EQ(r.steps_used, k);
  const double rot = k * drive * body.omega_max * cfg.step_cfg.dt() / (2 * std::numbers::pi);
  EXPECT_NEAR(r.rotations_left, rot, 1e-9);
  EXPECT_NEAR(r.rotations_right, rot, 1e-9);
  const double budget = 1.5 * gap / (2 * std::numbers::pi * body.wheel_radius);
  EXPECT_NEAR(r.fitness, 0.6 + 0.3 - 0.05 * rot / budget, 1e-9);
  EXPECT_EQ(r.penalty_steps, 0);
}

TEST(EvaluateTrial, BodyDamagePenaltyLowersFitness) {
  const World w = make_world(TerrainKind::kFlat, 0, 1);
  const RobotBody body;
  const FitnessConfig cfg;
  const TrialResult healthy = evaluate_trial(w, body, constant_drive(3.0), cfg, 1);
  Controller damaged = constant_drive(3.0);
  damaged.set_failure(FailureInjection{FailureCase::kBodyDamage, 0, 0.8, 0, -1});
  const TrialResult r = evaluate_trial(w, body, damaged, cfg, 1);
  EXPECT_EQ(r.penalty_steps, r.steps_used);
  EXPECT_LT(r.fitness, healthy.fitness);
}

TEST(EvaluateTrial, StartOnTargetIsConfigError) {
  const World w = make_world(TerrainKind::kFlat, 0, 1);
  const FitnessConfig cfg;
  TrialSetup setup = default_setup(w, cfg);
  setup.start = {5, 5, 0};
  EXPECT_THROW(evaluate_trial(w, RobotBody{}, Controller{}, cfg, setup, 1), ConfigError);
}

TEST(EvaluateTrial, FitnessBoundedForAdversarialControllers) {
  const World w = make_world(TerrainKind::kBumpy, 5, 2);
  FitnessConfig cfg;
  cfg.max_steps = 300;
  for (std::uint64_t s = 0; s < 30; ++s) {
    Controller c = Controller::random(2, s);
    for (auto& x : c.mutable_weights()) x *= 50;
    const TrialResult r = evaluate_trial(w, RobotBody{}, c, cfg, s);
    EXPECT_GE(r.fitness, 0.0);
    EXPECT_LE(r.fitness, 1.0);
    EXPECT_GE(r.rotations_left, 0.0);
  }
}

TEST(EvaluateTrial, RotationsEqualWheelIntegral) {
  const World w = make_world(TerrainKind::kBumpy, 5, 3);
  const RobotBody body;
  const FitnessConfig cfg;
  Controller c = Controller::random(1, 5);
  const TrialRun run = run_trial(w, body, c, default_setup(w, cfg), 1);
  const TrialResult r = score_trial(w, body, w.start(), run, cfg);
  EXPECT_NEAR(r.rotations_left, run.final_state.wheel_angle_left / (2 * std::numbers::pi), 1e-9);
  EXPECT_NEAR(r.rotations_right, run.final_state.wheel_angle_right / (2 * std::numbers::pi), 1e-9);
}

TEST(EvaluateTrial, SeedDeterminism) {
  const World w = make_world(TerrainKind::kBumpy, 5, 4);
  FitnessConfig cfg;
  TrialSetup setup = default_setup(w, cfg);
  setup.sensors.noise_sigma = 0.1;
  const Controller c = Controller::random(2, 6);
  EXPECT_EQ(evaluate_trial(w, RobotBody{}, c, cfg, setup, 9), evaluate_trial(w, RobotBody{}, c, cfg, setup, 9));
}

TEST(ScoreTrial, MorePenaltyStepsNeverRaiseFitness) {
  const World w = make_world(TerrainKind::kBumpy, 0, 5);
  const RobotBody body;
  const FitnessConfig cfg;
  Controller c = constant_drive(0.5);
  TrialRun run = run_trial(w, body, c, default_setup(w, cfg), 1);
  double prev = 2.0;
  for (int p = 0; p <= run.steps_used; p += std::max(1, run.steps_used / 20)) {
    run.penalty_steps = p;
    const double f = score_trial(w, body, w.start(), run, cfg).fitness;
    EXPECT_LE(f, prev);
    prev = f;
  }
}

TEST(ScoreTrial, ClampsBelowAtZero) {
  const World w = make_world(TerrainKind::kFlat, 0, 1);
  const RobotBody body;
  TrialRun run;
  run.final_state = initial_state(w, body, w.start());
  run.final_state.wheel_angle_left = 1e6;
  run.final_state.wheel_angle_right = 1e6;
  run.steps_used = 10;
  EXPECT_EQ(score_trial(w, body, w.start(), run, FitnessConfig{}).fitness, 0.0);
}

TEST(SensorPerformance, CleanSensorsScoreOne) {
  const World w = make_world(TerrainKind::kFlat, 5, 6);
  const FitnessConfig cfg;
  EXPECT_EQ(evaluate_trial(w, RobotBody{}, Controller::random(0, 3), cfg, 1).sensor_performance, 1.0);
}

// A stationary robot ringed by obstacles, one on each sensor ray, so the
// dead channel disagrees with the geometry at every step.
World ringed_world(const RobotBody& body) {
  World w = make_world(TerrainKind::kFlat, 0, 6);
  for (double b : body.sensor_bearings) {
    const double reach = body.body_radius + 0.5 + 0.1;
    w.obstacles.push_back({{5 + reach * std::cos(b), 2 + reach * std::sin(b)}, 0.1});
  }
  return w;
}

TEST(SensorPerformance, OneDeadSensorOfTenScoresNineTenths) {
  const RobotBody body;
  const World w = ringed_world(body);
  FitnessConfig cfg;
  cfg.max_steps = 100;
  TrialSetup setup = default_setup(w, cfg);
  setup.start = {5, 2, 0};
  Controller c;
  c.set_failure(FailureInjection{FailureCase::kSensorFail, 0, 0.5, 0, 4});
  const TrialRun run = run_trial(w, body, c, setup, 1);
  for (int k = 0; k < kSensorCount; ++k) {
    ASSERT_GT(sense(w, body, run.trajectory.front().state).proximity[k], 0.0) << k;
  }
  EXPECT_DOUBLE_EQ(sensor_performance(run.trajectory, w, body), 0.9);
}

// Readings clamp to [0, 1], so a zero reading still matches half the time
// under noise; the score is non-increasing in sigma rather than strictly falling.
TEST(SensorPerformance, NonIncreasingWithNoise) {
  const RobotBody body;
  const World w = make_world(TerrainKind::kFlat, 5, 7);
  FitnessConfig cfg;
  cfg.max_steps = 400;
  TrialSetup setup = default_setup(w, cfg);
  setup.start = {w.obstacles[0].center.x + w.obstacles[0].radius + body.body_radius + 0.3,
                 w.obstacles[0].center.y, std::numbers::pi};
  std::vector<double> perf;
  for (double sigma : {0.0, 0.1, 0.3}) {
    double total = 0;
    for (std::uint64_t s = 0; s < 5; ++s) {
      setup.sensors.noise_sigma = sigma;
      total += evaluate_trial(w, body, Controller{}, cfg, setup, s).sensor_performance;
    }
    perf.push_back(total / 5);
  }
  EXPECT_EQ(perf[0], 1.0);
  EXPECT_LT(perf[1], perf[0]);
  EXPECT_LE(perf[2], perf[1]);
}

TEST(FitnessConfig, DefaultsAreValidAndIdealStaysWithinOne) {
  FitnessConfig cfg;
  EXPECT_TRUE(cfg.valid());
  cfg.reach_bonus = 0.5;
  EXPECT_FALSE(cfg.valid());
}

TEST(TrialCsv, HeaderAndRow) {
  std::ostringstream out;
  write_trial_csv_header(out);
  TrialResult r;
  r.fitness = 0.5;
  r.reached = true;
  r.penalty_steps = 3;
  write_trial_csv_row(out, 7, "flat/obs", r);
  EXPECT_EQ(out.str(), "seed,env,fitness,r_L,r_R,reached,sensor_perf,penalty_steps\n7,flat/obs,0.5,0,0,1,1,3\n");
}

}  // namespace
}  // namespace evobot
