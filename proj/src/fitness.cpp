#include "evobot/fitness.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>

#include "evobot/csv.hpp"

namespace evobot {

bool FitnessConfig::valid() const {
  return w_progress >= 0 && reach_bonus >= 0 && w_rotation >= 0 && w_penalty >= 0 &&
         w_progress + reach_bonus <= 1.0 + 1e-12 && max_steps > 0 && unit_time > 0 && step_cfg.valid();
}

TrialSetup default_setup(const World& world, const FitnessConfig& cfg) {
  TrialSetup s;
  s.start = world.start();
  s.max_steps = cfg.max_steps;
  s.step_cfg = cfg.step_cfg;
  return s;
}

TrialRun run_trial(const World& world, const RobotBody& body, Controller& controller, const TrialSetup& setup,
                   std::uint64_t seed, double clearance_floor) {
  TrialRun run;
  const int steps = std::min(setup.max_steps, setup.step_cfg.steps());
  run.trajectory.reserve(static_cast<std::size_t>(steps));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  const FailureInjection none;
  const FailureInjection& failure = controller.failure() ? *controller.failure() : none;
  const double dt = setup.step_cfg.dt();

  RobotState state = initial_state(world, body, setup.start);
  for (int k = 0; k < steps; ++k) {
    SensorReading reading = sense(world, body, state);
    for (int i = 0; i < kSensorCount; ++i) {
      double p = reading.proximity[i] * setup.sensors.gains[i];
      if (setup.sensors.noise_sigma > 0.0) p += setup.sensors.noise_sigma * noise(rng);
      reading.proximity[i] = std::clamp(p, 0.0, 1.0);
    }
    apply_sensor_failure(failure, k, reading);

    const MotorCommand cmd = controller.activate(reading);
    controller.plasticity_step();
    run.trajectory.push_back({setup.step_cfg.t_start + k * dt, state, cmd, reading});

    state = step(world, body, state, cmd, setup.step_cfg, combine(setup.actuation, failure_actuation(failure, k)));
    ++run.steps_used;
    if (state.clearance < clearance_floor) ++run.penalty_steps;
    if (reached_target(world, body, state)) {
      run.reached = true;
      if (setup.stop_on_reach) break;
    }
  }
  run.final_state = state;
  return run;
}

TrialResult score_trial(const World& world, const RobotBody& body, const Pose& start, const TrialRun& run,
                        const FitnessConfig& cfg) {
  const double d_initial = target_gap(world, body, start.x, start.y);
  if (d_initial <= 0.0) throw ConfigError("trial starts on the target (initial distance 0)");
  const double d_final = target_gap(world, body, run.final_state.x, run.final_state.y);

  TrialResult r;
  r.rotations_left = run.final_state.wheel_angle_left / (2.0 * std::numbers::pi);
  r.rotations_right = run.final_state.wheel_angle_right / (2.0 * std::numbers::pi);
  r.reached = run.reached;
  r.steps_used = run.steps_used;
  r.penalty_steps = run.penalty_steps;

  const double rotations = 0.5 * (r.rotations_left + r.rotations_right);
  const double r_budget = (1.0 + cfg.rotation_margin) * d_initial / (2.0 * std::numbers::pi * body.wheel_radius);
  double f = cfg.w_progress * (1.0 - d_final / d_initial);
  if (run.reached) f += cfg.reach_bonus;
  f -= cfg.w_rotation * rotations / r_budget;
  if (run.steps_used > 0) f -= cfg.w_penalty * static_cast<double>(run.penalty_steps) / run.steps_used;
  r.fitness = std::clamp(f, 0.0, 1.0);
  if (run.steps_used > 0) r.rotations_per_unit_time = rotations * cfg.unit_time / run.steps_used;
  return r;
}

TrialResult evaluate_trial(const World& world, const RobotBody& body, Controller controller,
                           const FitnessConfig& cfg, const TrialSetup& setup, std::uint64_t seed) {
  if (target_gap(world, body, setup.start.x, setup.start.y) <= 0.0) {
    throw ConfigError("trial starts on the target (initial distance 0)");
  }
  const TrialRun run = run_trial(world, body, controller, setup, seed, cfg.clearance_floor);
  TrialResult r = score_trial(world, body, setup.start, run, cfg);
  r.sensor_performance = sensor_performance(run.trajectory, world, body);
  return r;
}

TrialResult evaluate_trial(const World& world, const RobotBody& body, Controller controller,
                           const FitnessConfig& cfg, std::uint64_t seed) {
  return evaluate_trial(world, body, std::move(controller), cfg, default_setup(world, cfg), seed);
}

double sensor_performance(const Trajectory& trace, const World& world, const RobotBody& body) {
  if (trace.empty()) return 1.0;
  std::size_t matches = 0;
  for (const auto& s : trace) {
    const SensorReading oracle = sense(world, body, s.state);
    for (int k = 0; k < kSensorCount; ++k) {
      if (std::abs(oracle.proximity[k] - s.reading.proximity[k]) <= 1e-6) ++matches;
    }
  }
  return static_cast<double>(matches) / static_cast<double>(trace.size() * kSensorCount);
}

void write_trial_csv_header(std::ostream& out) {
  out << "seed,env,fitness,r_L,r_R,reached,sensor_perf,penalty_steps\n";
}

void write_trial_csv_row(std::ostream& out, std::uint64_t seed, const std::string& env, const TrialResult& r) {
  out << seed << ',' << env << ',' << csv::num(r.fitness) << ',' << csv::num(r.rotations_left) << ','
      << csv::num(r.rotations_right) << ',' << (r.reached ? 1 : 0) << ',' << csv::num(r.sensor_performance) << ','
      << r.penalty_steps << '\n';
}

}  // namespace evobot
