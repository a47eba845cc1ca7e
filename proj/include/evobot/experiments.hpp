#pragma once

// The environment matrix: evolve a controller per terrain/obstacle cell and
// seed, deploy it from every corner, and tabulate fitness, wheel effort and
// sensor performance. Also the per-case failure distribution.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "evobot/evolution.hpp"
#include "evobot/fitness.hpp"
#include "evobot/world.hpp"

namespace evobot {

struct Environment {
  TerrainKind terrain = TerrainKind::kFlat;
  bool obstacles = false;
  // flat/no_obs, bumpy/obs, ...
  std::string name() const;
  bool operator==(const Environment&) const = default;
};

Environment environment_from_string(const std::string& s);

// flat, bumpy, combined; each without and with obstacles.
std::vector<Environment> default_environments();

struct ExperimentPlan {
  std::vector<Environment> environments = default_environments();
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  int trials_per_env = 25;
  int obstacle_count = 5;
  WorldConfig world;  // terrain, obstacles and seed are set per cell
  RobotBody body;
  FitnessConfig fitness;
  EvoConfig evo;
  int n_hidden = 0;
  // Trial starts are jittered around the corner by up to this much (units, radians).
  double start_jitter = 0.2;
  double heading_jitter = 0.2;
  int workers = 1;

  // Failure distribution settings.
  Environment failure_env{TerrainKind::kFlat, true};
  double failure_severity = 0.5;
  int failure_onset = 0;

  void validate() const;
};

struct TrialRecord {
  std::uint64_t seed = 0;
  std::string env;
  int trial = 0;
  int corner = 0;
  TrialResult result;
};

struct CellResult {
  Environment env;
  std::uint64_t seed = 0;
  double best_fitness = 0.0;  // evolved champion, training evaluation
  RunLog log;
  std::vector<TrialRecord> trials;

  double mean_trial_fitness() const;
  // Mean of r_L + r_R over trials that reached the target; NaN if none did.
  double mean_rotations_reached() const;
};

struct TableRow {
  std::string env;
  int seeds = 0;
  int trials = 0;
  double mean_best_fitness = 0.0;
  double mean_fitness = 0.0;
  double max_fitness = 0.0;
  double mean_r_left = 0.0;
  double mean_r_right = 0.0;
  double mean_sensor_performance = 0.0;
  double reached_fraction = 0.0;
};

struct FailureRow {
  FailureCase failure_case = FailureCase::kNothingFail;
  int trials = 0;
  int task_failures = 0;  // target not reached
};

struct Report {
  std::vector<CellResult> cells;  // environment-major, then seed
  std::vector<TableRow> table;
  std::vector<FailureRow> failures;
  int baseline_failures = -1;  // uninjected runs of the failure trials, -1 if not run
};

// Training evaluation for one cell: the cell's world with every corner as a start.
ControllerEvaluation cell_evaluation(const ExperimentPlan& plan, const Environment& env, std::uint64_t seed);

CellResult run_cell(const ExperimentPlan& plan, const Environment& env, std::uint64_t seed);

// Every environment x seed cell, plus the aggregated table.
Report run_matrix(const ExperimentPlan& plan);

std::vector<TableRow> aggregate(const std::vector<CellResult>& cells, const std::vector<Environment>& envs);

// Evolves one controller on plan.failure_env (first seed), then runs it
// n_per_case times under each of the nine cases and once more uninjected.
std::vector<FailureRow> run_failure_distribution(const ExperimentPlan& plan, int n_per_case,
                                                 int* baseline_failures = nullptr);

// table.csv, curves.csv, failures.csv, trials.csv; with `plot_data` also
// curves_long.csv. Returns the written paths.
std::vector<std::filesystem::path> export_report(const Report& report, const std::filesystem::path& dir,
                                                 bool plot_data = false);

}  // namespace evobot
