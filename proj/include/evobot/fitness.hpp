#pragma once

// One target-reaching trial and its score: progress toward the target, a
// bonus for reaching it, a wheel-rotation cost and a ground-clearance
// penalty, clamped to [0, 1].

#include <array>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "evobot/controller.hpp"
#include "evobot/world.hpp"

namespace evobot {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FitnessConfig {
  double threshold = kDefaultThreshold;  // alert threshold Th given to decoded controllers
  double w_progress = 0.6;
  double reach_bonus = 0.3;
  double w_rotation = 0.05;
  double w_penalty = 0.05;
  double clearance_floor = 1.0;
  int max_steps = 1000;
  StepConfig step_cfg;
  int unit_time = 10;  // steps per unit of time for the per-unit-time wheel rates
  // Rotation normaliser = straight-line rotations to the target * (1 + margin).
  double rotation_margin = 0.5;

  bool operator==(const FitnessConfig&) const = default;
  // Ideal score (reach with no cost) must not exceed 1.
  bool valid() const;
};

// Per-sensor calibration gain and additive Gaussian noise.
struct SensorModel {
  std::array<double, kSensorCount> gains = {1, 1, 1, 1, 1, 1, 1, 1, 1, 1};
  double noise_sigma = 0.0;
  bool operator==(const SensorModel&) const = default;
};

struct TrialSetup {
  Pose start;
  Actuation actuation;
  SensorModel sensors;
  int max_steps = 1000;
  StepConfig step_cfg;
  bool stop_on_reach = true;
};

TrialSetup default_setup(const World& world, const FitnessConfig& cfg);

struct TrialRun {
  Trajectory trajectory;  // pre-step state, reading and command for every step
  RobotState final_state;
  bool reached = false;
  int steps_used = 0;
  int penalty_steps = 0;  // post-step states below the clearance floor
};

// sense -> sensor model -> activate -> plasticity -> step, until the target
// is reached or the step budget runs out. The controller is advanced in place.
TrialRun run_trial(const World& world, const RobotBody& body, Controller& controller, const TrialSetup& setup,
                   std::uint64_t seed, double clearance_floor = 1.0);

struct TrialResult {
  double fitness = 0.0;
  double rotations_left = 0.0;
  double rotations_right = 0.0;
  bool reached = false;
  int steps_used = 0;
  double sensor_performance = 1.0;
  int penalty_steps = 0;
  double rotations_per_unit_time = 0.0;
  bool operator==(const TrialResult&) const = default;
};

// Score of a finished run. Throws ConfigError when the start is already on
// the target.
TrialResult score_trial(const World& world, const RobotBody& body, const Pose& start, const TrialRun& run,
                        const FitnessConfig& cfg);

TrialResult evaluate_trial(const World& world, const RobotBody& body, Controller controller,
                           const FitnessConfig& cfg, std::uint64_t seed);
TrialResult evaluate_trial(const World& world, const RobotBody& body, Controller controller,
                           const FitnessConfig& cfg, const TrialSetup& setup, std::uint64_t seed);

// Fraction of (step, sensor) pairs whose reported proximity matches the
// geometric reading within 1e-6.
double sensor_performance(const Trajectory& trace, const World& world, const RobotBody& body);

// seed,env,fitness,r_L,r_R,reached,sensor_perf,penalty_steps
void write_trial_csv_header(std::ostream& out);
void write_trial_csv_row(std::ostream& out, std::uint64_t seed, const std::string& env, const TrialResult& r);

}  // namespace evobot
