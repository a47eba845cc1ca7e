#include "evobot/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "evobot/csv.hpp"

namespace evobot {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class Int>
Int parse_int(const std::string& s) {
  Int v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw ConfigError("not an integer: '" + s + "'");
  return v;
}

double parse_double(const std::string& s) {
  try {
    return csv::to_double(s);
  } catch (const std::invalid_argument&) {
    throw ConfigError("not a number: '" + s + "'");
  }
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError("not a boolean: '" + s + "'");
}

std::vector<std::string> parse_list(const std::string& s) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  for (const auto& part : csv::split(s)) out.push_back(trim(part));
  return out;
}

template <class T, class F>
std::string join(const T& items, F&& fmt) {
  std::string out;
  for (const auto& x : items) {
    if (!out.empty()) out += ',';
    out += fmt(x);
  }
  return out;
}

// One configurable value: how to print it and how to set it.
struct Field {
  std::string key;
  std::function<std::string(const Config&)> get;
  std::function<void(Config&, const std::string&)> set;
};

// Builders for the common shapes, addressed through an accessor lambda.
template <class Acc>
Field dbl(std::string key, Acc acc) {
  return {std::move(key), [acc](const Config& c) { return csv::num(acc(const_cast<Config&>(c))); },
          [acc](Config& c, const std::string& v) { acc(c) = parse_double(v); }};
}

template <class Acc>
Field integer(std::string key, Acc acc) {
  return {std::move(key), [acc](const Config& c) { return std::to_string(acc(const_cast<Config&>(c))); },
          [acc](Config& c, const std::string& v) {
            auto& ref = acc(c);
            ref = parse_int<std::remove_reference_t<decltype(ref)>>(v);
          }};
}

template <class Acc>
Field boolean(std::string key, Acc acc) {
  return {std::move(key), [acc](const Config& c) { return std::string(acc(const_cast<Config&>(c)) ? "true" : "false"); },
          [acc](Config& c, const std::string& v) { acc(c) = parse_bool(v); }};
}

template <class Acc, class ToStr, class FromStr>
Field named(std::string key, Acc acc, ToStr to_str, FromStr from_str) {
  return {std::move(key), [acc, to_str](const Config& c) { return std::string(to_str(acc(const_cast<Config&>(c)))); },
          [acc, from_str](Config& c, const std::string& v) {
            try {
              acc(c) = from_str(v);
            } catch (const ConfigError&) {
              throw;
            } catch (const std::exception& e) {
              throw ConfigError(e.what());
            }
          }};
}

template <std::size_t N, class Acc>
Field dbl_array(std::string key, Acc acc) {
  return {std::move(key), [acc](const Config& c) { return join(acc(const_cast<Config&>(c)), csv::num); },
          [acc, key](Config& c, const std::string& v) {
            const auto parts = parse_list(v);
            if (parts.size() != N) throw ConfigError(key + " needs " + std::to_string(N) + " values");
            auto& arr = acc(c);
            for (std::size_t i = 0; i < N; ++i) arr[i] = parse_double(parts[i]);
          }};
}

std::string plasticity_rule_name(PlasticityRule r) { return r == PlasticityRule::kHebbian ? "hebbian" : "none"; }

PlasticityRule plasticity_rule_from_string(const std::string& s) {
  if (s == "hebbian") return PlasticityRule::kHebbian;
  if (s == "none") return PlasticityRule::kNone;
  throw ConfigError("unknown plasticity rule '" + s + "'");
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    // world
    f.push_back(named("world.terrain", [](Config& c) -> auto& { return c.world.terrain; },
                      [](TerrainKind k) { return to_string(k); }, terrain_kind_from_string));
    f.push_back(integer("world.obstacles", [](Config& c) -> auto& { return c.world.obstacles; }));
    f.push_back(integer("world.seed", [](Config& c) -> auto& { return c.world.seed; }));
    f.push_back(dbl("world.amplitude", [](Config& c) -> auto& { return c.world.amplitude; }));
    f.push_back(dbl("world.cell_size", [](Config& c) -> auto& { return c.world.cell_size; }));
    f.push_back(dbl("world.x_min", [](Config& c) -> auto& { return c.world.bounds.x_min; }));
    f.push_back(dbl("world.y_min", [](Config& c) -> auto& { return c.world.bounds.y_min; }));
    f.push_back(dbl("world.x_max", [](Config& c) -> auto& { return c.world.bounds.x_max; }));
    f.push_back(dbl("world.y_max", [](Config& c) -> auto& { return c.world.bounds.y_max; }));
    f.push_back(dbl("world.target_x", [](Config& c) -> auto& { return c.world.target.center.x; }));
    f.push_back(dbl("world.target_y", [](Config& c) -> auto& { return c.world.target.center.y; }));
    f.push_back(dbl("world.target_radius", [](Config& c) -> auto& { return c.world.target.radius; }));
    f.push_back(dbl("world.obstacle_radius_min", [](Config& c) -> auto& { return c.world.obstacle_radius_min; }));
    f.push_back(dbl("world.obstacle_radius_max", [](Config& c) -> auto& { return c.world.obstacle_radius_max; }));
    f.push_back(dbl("world.gravity", [](Config& c) -> auto& { return c.world.gravity; }));
    f.push_back(dbl("world.corner_inset", [](Config& c) -> auto& { return c.world.corner_inset; }));
    f.push_back(dbl("world.coarseness", [](Config& c) -> auto& { return c.fitness.step_cfg.coarseness; }));
    f.push_back(dbl("world.dt_min", [](Config& c) -> auto& { return c.fitness.step_cfg.dt_min; }));
    f.push_back(dbl("world.dt_max", [](Config& c) -> auto& { return c.fitness.step_cfg.dt_max; }));
    f.push_back(dbl("world.t_start", [](Config& c) -> auto& { return c.fitness.step_cfg.t_start; }));
    f.push_back(dbl("world.t_finish", [](Config& c) -> auto& { return c.fitness.step_cfg.t_finish; }));
    // body
    f.push_back(dbl("body.body_radius", [](Config& c) -> auto& { return c.body.body_radius; }));
    f.push_back(dbl("body.wheel_base", [](Config& c) -> auto& { return c.body.wheel_base; }));
    f.push_back(dbl("body.wheel_radius", [](Config& c) -> auto& { return c.body.wheel_radius; }));
    f.push_back(dbl("body.nominal_clearance", [](Config& c) -> auto& { return c.body.nominal_clearance; }));
    f.push_back(dbl("body.sensor_range", [](Config& c) -> auto& { return c.body.sensor_range; }));
    f.push_back(dbl("body.omega_max", [](Config& c) -> auto& { return c.body.omega_max; }));
    f.push_back(dbl("body.slope_gain", [](Config& c) -> auto& { return c.body.slope_gain; }));
    f.push_back(dbl_array<kSensorCount>("body.sensor_bearings", [](Config& c) -> auto& { return c.body.sensor_bearings; }));
    // controller
    f.push_back(integer("controller.n_hidden", [](Config& c) -> auto& { return c.controller.n_hidden; }));
    f.push_back(dbl("controller.threshold", [](Config& c) -> auto& { return c.fitness.threshold; }));
    f.push_back(named("controller.plasticity", [](Config& c) -> auto& { return c.controller.plasticity.rule; },
                      plasticity_rule_name, plasticity_rule_from_string));
    f.push_back(dbl("controller.eta", [](Config& c) -> auto& { return c.controller.plasticity.eta; }));
    f.push_back(dbl("controller.weight_clip", [](Config& c) -> auto& { return c.controller.plasticity.weight_clip; }));
    // fitness
    f.push_back(dbl("fitness.w_progress", [](Config& c) -> auto& { return c.fitness.w_progress; }));
    f.push_back(dbl("fitness.reach_bonus", [](Config& c) -> auto& { return c.fitness.reach_bonus; }));
    f.push_back(dbl("fitness.w_rotation", [](Config& c) -> auto& { return c.fitness.w_rotation; }));
    f.push_back(dbl("fitness.w_penalty", [](Config& c) -> auto& { return c.fitness.w_penalty; }));
    f.push_back(dbl("fitness.clearance_floor", [](Config& c) -> auto& { return c.fitness.clearance_floor; }));
    f.push_back(integer("fitness.max_steps", [](Config& c) -> auto& { return c.fitness.max_steps; }));
    f.push_back(integer("fitness.unit_time", [](Config& c) -> auto& { return c.fitness.unit_time; }));
    f.push_back(dbl("fitness.rotation_margin", [](Config& c) -> auto& { return c.fitness.rotation_margin; }));
    f.push_back(boolean("fitness.all_corners", [](Config& c) -> auto& { return c.all_corners; }));
    // evolution
    f.push_back(named("evolution.mode", [](Config& c) -> auto& { return c.evolution.mode; },
                      [](EvoMode m) { return to_string(m); }, evo_mode_from_string));
    f.push_back(integer("evolution.pop_size", [](Config& c) -> auto& { return c.evolution.pop_size; }));
    f.push_back(integer("evolution.generations", [](Config& c) -> auto& { return c.evolution.generations; }));
    f.push_back(integer("evolution.tournament_k", [](Config& c) -> auto& { return c.evolution.tournament_k; }));
    f.push_back(integer("evolution.elitism_count", [](Config& c) -> auto& { return c.evolution.elitism_count; }));
    f.push_back(dbl("evolution.mutation_sigma", [](Config& c) -> auto& { return c.evolution.mutation_sigma; }));
    f.push_back(dbl("evolution.mutation_rate", [](Config& c) -> auto& { return c.evolution.mutation_rate; }));
    f.push_back(dbl("evolution.crossover_prob", [](Config& c) -> auto& { return c.evolution.crossover_prob; }));
    f.push_back(integer("evolution.seed", [](Config& c) -> auto& { return c.evolution.seed; }));
    f.push_back(boolean("evolution.lifetime_learning", [](Config& c) -> auto& { return c.evolution.lifetime_learning; }));
    f.push_back(integer("evolution.workers", [](Config& c) -> auto& { return c.evolution.workers; }));
    f.push_back(integer("evolution.stagnation_generations",
                        [](Config& c) -> auto& { return c.evolution.stagnation_generations; }));
    f.push_back(dbl("evolution.genotype_point_change", [](Config& c) -> auto& { return c.evolution.genotype_rates.point_change; }));
    f.push_back(dbl("evolution.genotype_segment_insert",
                    [](Config& c) -> auto& { return c.evolution.genotype_rates.segment_insert; }));
    f.push_back(dbl("evolution.genotype_segment_delete",
                    [](Config& c) -> auto& { return c.evolution.genotype_rates.segment_delete; }));
    f.push_back(dbl("evolution.genotype_weight_perturb",
                    [](Config& c) -> auto& { return c.evolution.genotype_rates.weight_perturb; }));
    f.push_back(dbl("evolution.genotype_weight_sigma", [](Config& c) -> auto& { return c.evolution.genotype_rates.weight_sigma; }));
    f.push_back(dbl("evolution.selection_timeout_s", [](Config& c) -> auto& { return c.selection_timeout_s; }));
    f.push_back(integer("evolution.ecology_robots", [](Config& c) -> auto& { return c.ecology.n_robots; }));
    f.push_back(dbl("evolution.ecology_energy_init", [](Config& c) -> auto& { return c.ecology.energy_init; }));
    f.push_back(dbl("evolution.ecology_energy_drain", [](Config& c) -> auto& { return c.ecology.energy_drain; }));
    f.push_back(dbl("evolution.ecology_energy_gain", [](Config& c) -> auto& { return c.ecology.energy_gain; }));
    f.push_back(integer("evolution.ecology_steps", [](Config& c) -> auto& { return c.ecology.steps_per_generation; }));
    f.push_back(integer("evolution.ecology_tournament_k", [](Config& c) -> auto& { return c.ecology.tournament_k; }));
    // estimation
    f.push_back(integer("estimation.pop_size", [](Config& c) -> auto& { return c.estimation.pop_size; }));
    f.push_back(integer("estimation.generations", [](Config& c) -> auto& { return c.estimation.generations; }));
    f.push_back(named("estimation.mask", [](Config& c) -> auto& { return c.estimation.mask; },
                      [](const std::string& s) { return s; },
                      [](const std::string& s) {
                        if (s != "all" && s != "gains" && s != "failure") {
                          throw ConfigError("estimation.mask must be all, gains or failure");
                        }
                        return s;
                      }));
    f.push_back(boolean("estimation.polish", [](Config& c) -> auto& { return c.estimation.polish; }));
    f.push_back(integer("estimation.explore_pop_size", [](Config& c) -> auto& { return c.estimation.explore_pop_size; }));
    f.push_back(integer("estimation.explore_generations", [](Config& c) -> auto& { return c.estimation.explore_generations; }));
    f.push_back(integer("estimation.cycles", [](Config& c) -> auto& { return c.estimation.cycles; }));
    f.push_back(integer("estimation.trace_steps", [](Config& c) -> auto& { return c.estimation.trace_steps; }));
    // experiment
    f.push_back({"experiment.environments",
                 [](const Config& c) { return join(c.experiment.environments, [](const Environment& e) { return e.name(); }); },
                 [](Config& c, const std::string& v) {
                   std::vector<Environment> envs;
                   for (const auto& s : parse_list(v)) envs.push_back(environment_from_string(s));
                   c.experiment.environments = envs;
                 }});
    f.push_back({"experiment.seeds",
                 [](const Config& c) { return join(c.experiment.seeds, [](std::uint64_t s) { return std::to_string(s); }); },
                 [](Config& c, const std::string& v) {
                   std::vector<std::uint64_t> seeds;
                   for (const auto& s : parse_list(v)) seeds.push_back(parse_int<std::uint64_t>(s));
                   c.experiment.seeds = seeds;
                 }});
    f.push_back(integer("experiment.trials_per_env", [](Config& c) -> auto& { return c.experiment.trials_per_env; }));
    f.push_back(integer("experiment.obstacle_count", [](Config& c) -> auto& { return c.experiment.obstacle_count; }));
    f.push_back(dbl("experiment.start_jitter", [](Config& c) -> auto& { return c.experiment.start_jitter; }));
    f.push_back(dbl("experiment.heading_jitter", [](Config& c) -> auto& { return c.experiment.heading_jitter; }));
    f.push_back(named("experiment.failure_env", [](Config& c) -> auto& { return c.experiment.failure_env; },
                      [](const Environment& e) { return e.name(); }, environment_from_string));
    f.push_back(dbl("experiment.failure_severity", [](Config& c) -> auto& { return c.experiment.failure_severity; }));
    f.push_back(integer("experiment.failure_onset", [](Config& c) -> auto& { return c.experiment.failure_onset; }));
    f.push_back(integer("experiment.failures_per_case", [](Config& c) -> auto& { return c.experiment.failures_per_case; }));
    return f;
  }();
  return table;
}

const Field& find_field(const std::string& key) {
  for (const Field& f : fields()) {
    if (f.key == key) return f;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

bool Config::operator==(const Config& other) const { return dump_config(*this) == dump_config(other); }

void apply_setting(Config& cfg, const std::string& key, const std::string& value) {
  const Field& f = find_field(key);
  try {
    f.set(cfg, value);
  } catch (const ConfigError& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

void read_config(std::istream& in, Config& cfg) {
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(n) + ": expected key = value");
    try {
      apply_setting(cfg, trim(std::string_view(line).substr(0, eq)), trim(std::string_view(line).substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(n) + ": " + e.what());
    }
  }
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  Config cfg;
  read_config(in, cfg);
  return cfg;
}

void write_config(std::ostream& out, const Config& cfg) {
  std::string section;
  for (const Field& f : fields()) {
    const std::string s = f.key.substr(0, f.key.find('.'));
    if (s != section) {
      if (!section.empty()) out << '\n';
      out << "# " << s << '\n';
      section = s;
    }
    out << f.key << " = " << f.get(cfg) << '\n';
  }
}

std::string dump_config(const Config& cfg) {
  std::ostringstream out;
  write_config(out, cfg);
  return out.str();
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const Field& f : fields()) keys.push_back(f.key);
  return keys;
}

void validate(const Config& cfg) {
  if (!cfg.body.valid()) throw ConfigError("body section is inconsistent");
  if (!cfg.fitness.valid()) throw ConfigError("fitness weights are inconsistent");
  if (!cfg.fitness.step_cfg.valid()) throw ConfigError("world timestep settings are inconsistent");
  if (cfg.fitness.max_steps < 1) throw ConfigError("fitness.max_steps must be >= 1");
  if (cfg.controller.n_hidden < 0) throw ConfigError("controller.n_hidden must be >= 0");
  if (cfg.world.obstacles < 0) throw ConfigError("world.obstacles must be >= 0");
  if (cfg.selection_timeout_s <= 0) throw ConfigError("evolution.selection_timeout_s must be positive");
  if (cfg.estimation.pop_size < 2) throw ConfigError("estimation.pop_size must be >= 2");
  if (cfg.estimation.generations < 0) throw ConfigError("estimation.generations must be >= 0");
  if (cfg.estimation.trace_steps < 1) throw ConfigError("estimation.trace_steps must be >= 1");
  if (cfg.estimation.cycles < 1) throw ConfigError("estimation.cycles must be >= 1");
  if (cfg.experiment.failures_per_case < 1) throw ConfigError("experiment.failures_per_case must be >= 1");
  cfg.evolution.validate();
}

void apply_seed(Config& cfg, std::uint64_t seed) {
  cfg.evolution.seed = seed;
  cfg.world.seed = seed;
}

World build_world(const Config& cfg) { return make_world(cfg.world, cfg.body); }

ControllerEvaluation build_evaluation(const Config& cfg) {
  ControllerEvaluation ev;
  ev.world = build_world(cfg);
  ev.body = cfg.body;
  ev.fitness = cfg.fitness;
  ev.n_hidden = cfg.controller.n_hidden;
  ev.plasticity = cfg.controller.plasticity;
  ev.lifetime_learning = cfg.evolution.lifetime_learning;
  if (cfg.all_corners) ev.starts = ev.world.starts;
  ev.seed = cfg.evolution.seed;
  return ev;
}

ExperimentPlan build_plan(const Config& cfg) {
  ExperimentPlan plan;
  const ExperimentSettings& e = cfg.experiment;
  plan.environments = e.environments;
  plan.seeds = e.seeds;
  plan.trials_per_env = e.trials_per_env;
  plan.obstacle_count = e.obstacle_count;
  plan.world = cfg.world;
  plan.body = cfg.body;
  plan.fitness = cfg.fitness;
  plan.evo = cfg.evolution;
  plan.n_hidden = cfg.controller.n_hidden;
  plan.start_jitter = e.start_jitter;
  plan.heading_jitter = e.heading_jitter;
  plan.workers = cfg.evolution.workers;
  plan.failure_env = e.failure_env;
  plan.failure_severity = e.failure_severity;
  plan.failure_onset = e.failure_onset;
  return plan;
}

EstimationConfig build_estimation(const Config& cfg) {
  EstimationConfig ec;
  ec.evo = cfg.evolution;
  ec.evo.mode = EvoMode::kStandard;
  ec.evo.pop_size = cfg.estimation.pop_size;
  ec.evo.generations = cfg.estimation.generations;
  ec.polish = cfg.estimation.polish;
  if (cfg.estimation.mask == "gains") {
    ec.mask = gain_genes();
  } else if (cfg.estimation.mask == "failure") {
    ec.mask = failure_genes();
  } else {
    ec.mask = all_genes();
  }
  return ec;
}

LoopConfig build_loop(const Config& cfg) {
  LoopConfig lc;
  lc.explore = cfg.evolution;
  lc.explore.mode = EvoMode::kStandard;
  lc.explore.pop_size = cfg.estimation.explore_pop_size;
  lc.explore.generations = cfg.estimation.explore_generations;
  lc.estimate = build_estimation(cfg);
  lc.cycles = cfg.estimation.cycles;
  lc.trace_steps = cfg.estimation.trace_steps;
  return lc;
}

SessionConfig build_session(const Config& cfg) {
  SessionConfig sc;
  sc.evo = cfg.evolution;
  sc.evo.mode = EvoMode::kUserGuided;
  sc.eval = build_evaluation(cfg);
  sc.selection_timeout =
      std::chrono::milliseconds(static_cast<long long>(cfg.selection_timeout_s * 1000.0));
  return sc;
}

EcologyConfig build_ecology(const Config& cfg) {
  EcologyConfig ec = cfg.ecology;
  ec.mutation_sigma = cfg.evolution.mutation_sigma;
  ec.mutation_rate = cfg.evolution.mutation_rate;
  ec.n_hidden = cfg.controller.n_hidden;
  ec.step_cfg = cfg.fitness.step_cfg;
  ec.seed = cfg.evolution.seed;
  return ec;
}

}  // namespace evobot
