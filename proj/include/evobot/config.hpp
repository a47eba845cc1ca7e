#pragma once

// Run configuration: one `section.key = value` line per setting, `#` starts
// a comment. Every setting has a default, so an empty file is a valid config.
// Unknown keys and malformed values raise ConfigError.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "evobot/estimation.hpp"
#include "evobot/evolution.hpp"
#include "evobot/experiments.hpp"
#include "evobot/fitness.hpp"
#include "evobot/session.hpp"
#include "evobot/world.hpp"

namespace evobot {

struct ControllerSettings {
  int n_hidden = 0;
  PlasticityConfig plasticity{PlasticityRule::kHebbian, 0.0, 4.0};
  bool operator==(const ControllerSettings&) const = default;
};

struct EstimationSettings {
  int pop_size = 16;
  int generations = 30;
  std::string mask = "all";  // all, gains or failure
  bool polish = true;
  int explore_pop_size = 20;
  int explore_generations = 30;
  int cycles = 1;
  int trace_steps = 300;
  bool operator==(const EstimationSettings&) const = default;
};

struct ExperimentSettings {
  std::vector<Environment> environments = default_environments();
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  int trials_per_env = 25;
  int obstacle_count = 5;
  double start_jitter = 0.2;
  double heading_jitter = 0.2;
  Environment failure_env{TerrainKind::kFlat, true};
  double failure_severity = 0.5;
  int failure_onset = 0;
  int failures_per_case = 20;
  bool operator==(const ExperimentSettings&) const = default;
};

struct Config {
  WorldConfig world;
  RobotBody body;
  ControllerSettings controller;
  FitnessConfig fitness;
  // Evaluate from all four corners instead of the first one.
  bool all_corners = false;
  EvoConfig evolution;
  EcologyConfig ecology;
  double selection_timeout_s = 600.0;
  EstimationSettings estimation;
  ExperimentSettings experiment;

  bool operator==(const Config&) const;
};

// Sets one `section.key`. Throws ConfigError for unknown keys or bad values.
void apply_setting(Config& cfg, const std::string& key, const std::string& value);

// Applies every line of `in` on top of `cfg`.
void read_config(std::istream& in, Config& cfg);
Config load_config(const std::filesystem::path& path);

// Every key, in a fixed order; re-reading the output reproduces `cfg` exactly.
void write_config(std::ostream& out, const Config& cfg);
std::string dump_config(const Config& cfg);

std::vector<std::string> config_keys();

// Cross-section checks; throws ConfigError.
void validate(const Config& cfg);

// `--seed`: the evolution and world seeds.
void apply_seed(Config& cfg, std::uint64_t seed);

World build_world(const Config& cfg);
ControllerEvaluation build_evaluation(const Config& cfg);
ExperimentPlan build_plan(const Config& cfg);
EstimationConfig build_estimation(const Config& cfg);
LoopConfig build_loop(const Config& cfg);
SessionConfig build_session(const Config& cfg);
EcologyConfig build_ecology(const Config& cfg);

}  // namespace evobot
