#pragma once

// Estimation-exploration: evolve a controller in a simulator, run it on a
// held-out reference simulator standing in for the physical robot, then
// evolve simulator parameters (including a failure hypothesis) until the
// simulated sensor traces match the observed ones.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "evobot/controller.hpp"
#include "evobot/evolution.hpp"
#include "evobot/fitness.hpp"
#include "evobot/world.hpp"

namespace evobot {

class TraceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SimParams {
  double motor_gain_left = 1.0;
  double motor_gain_right = 1.0;
  std::array<double, kSensorCount> sensor_gains = {1, 1, 1, 1, 1, 1, 1, 1, 1, 1};
  double slope_gain = 1.0;
  FailureInjection failure;

  // Throws ConfigError unless gains are in [0, 2] and severity in [0, 1].
  void validate() const;
  bool operator==(const SimParams&) const = default;
};

// Genome layout for SimParams searches.
enum SimGene : int {
  kGeneGainLeft = 0,
  kGeneGainRight = 1,
  kGeneSensorGain0 = 2,
  kGeneSlopeGain = kGeneSensorGain0 + kSensorCount,
  kGeneCase,
  kGeneSeverity,
  kGeneIndex,
  kGeneOnset,
  kSimGeneCount,
};

inline constexpr double kMaxGain = 2.0;

using GeneMask = std::array<bool, kSimGeneCount>;

GeneMask all_genes();
GeneMask gain_genes();      // motor and sensor gains
GeneMask failure_genes();   // case, severity, index, onset

// `max_onset` is the onset gene's upper bound (trace length in steps);
// `n_hidden` sizes the hidden-neuron index choice.
std::vector<double> encode_params(const SimParams& p, int max_onset, int n_hidden);
// Genes outside `mask` are taken from `base`.
SimParams decode_params(const std::vector<double>& genome, const GeneMask& mask, const SimParams& base, int max_onset,
                        int n_hidden);
WeightVectorOps sim_param_ops(const EvoConfig& cfg, int max_onset);

struct SensorTrace {
  Trajectory samples;
  Controller controller;  // as it was before the run
  long long controller_id = 0;
  std::uint64_t world_seed = 0;
  Pose start;
  StepConfig step_cfg;
};

// Runs `c` in `world` under `params` for exactly `steps` steps; the target
// does not end the run.
Trajectory simulate(const Controller& c, const SimParams& params, const World& world, const RobotBody& body,
                    const Pose& start, int steps, const StepConfig& step_cfg);

SensorTrace run_reference(const Controller& c, const SimParams& true_params, const World& world,
                          const RobotBody& body, const Pose& start, int steps, const StepConfig& step_cfg = {},
                          long long controller_id = 0);

// Trajectory CSV preceded by '# key=value' metadata lines and the controller
// as '#! ' lines.
void write_sensor_trace(std::ostream& out, const SensorTrace& trace);
SensorTrace read_sensor_trace(std::istream& in);

// Channels compared per step: ten proximities, the two wheel rotation rates
// over omega_max, and the two motor commands.
inline constexpr int kDiscrepancyChannels = kSensorCount + 4;

struct Discrepancy {
  double value = 0.0;
  std::vector<double> per_controller;
  std::vector<std::string> warnings;  // TraceMismatch notes
};

// Mean absolute per-step, per-channel difference between each observed
// trace and its re-simulation under `candidate`, averaged over controllers.
// Traces of different length are truncated to the shorter with a warning.
Discrepancy discrepancy(const std::vector<SensorTrace>& traces, const SimParams& candidate, const World& world,
                        const RobotBody& body);

struct EstimationConfig {
  EvoConfig evo;
  GeneMask mask = all_genes();
  SimParams base;
  // Exhaustive pass over the discrete failure genes after the GA.
  bool polish = true;
};

struct EstimationResult {
  SimParams params;
  double discrepancy = 0.0;
  RunLog log;  // fitness = -discrepancy
  std::vector<std::string> warnings;
};

// GA over SimParams minimising discrepancy; stops early at 0. `seeds` are
// placed in generation 0.
EstimationResult estimation_phase(const std::vector<SensorTrace>& traces, const World& world, const RobotBody& body,
                                  const EstimationConfig& cfg, const std::vector<SimParams>& seeds = {});

struct DiagnosisEntry {
  FailureCase failure_case = FailureCase::kNothingFail;
  double score = 0.0;  // best discrepancy reached with the case clamped
  SimParams params;
};

// Every case once, ranked by score ascending; ties favour NothingFail, then
// case order. Gains stay at `cfg.base`; severity, index and onset are searched.
std::vector<DiagnosisEntry> diagnose(const std::vector<SensorTrace>& traces, const World& world,
                                     const RobotBody& body, const EstimationConfig& cfg);

// rank,case,score,severity,index,onset
void write_diagnosis_csv(std::ostream& out, const std::vector<DiagnosisEntry>& ranking);
void write_diagnosis_text(std::ostream& out, const std::vector<DiagnosisEntry>& ranking);

// Applies `params` to a task: motor gains, sensor gains, slope gain and the failure.
ControllerEvaluation with_params(const ControllerEvaluation& task, const SimParams& params);

// Best controller evolved entirely inside the simulator configured by `params`.
Controller exploration_phase(const SimParams& params, const EvoConfig& evo, const ControllerEvaluation& task);

struct LoopConfig {
  EvoConfig explore;
  EstimationConfig estimate;
  int cycles = 1;
  int trace_steps = 300;
};

struct LoopResult {
  SimParams start;
  SimParams final;
  double start_discrepancy = 0.0;  // on all collected traces
  double final_discrepancy = 0.0;
  std::vector<SensorTrace> traces;
};

// explore -> reference run -> estimate, `cycles` times. The working
// parameters start at `approx`; estimation is seeded with them.
LoopResult estimation_exploration(const SimParams& true_params, const SimParams& approx,
                                  const ControllerEvaluation& task, const LoopConfig& cfg);

}  // namespace evobot
