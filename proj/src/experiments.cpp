#include "evobot/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <stdexcept>

#include "evobot/csv.hpp"

namespace evobot {

std::string Environment::name() const {
  return std::string(to_string(terrain)) + (obstacles ? "/obs" : "/no_obs");
}

Environment environment_from_string(const std::string& s) {
  const auto slash = s.find('/');
  if (slash == std::string::npos) throw ConfigError("environment must look like flat/obs or bumpy/no_obs: " + s);
  Environment e;
  try {
    e.terrain = terrain_kind_from_string(s.substr(0, slash));
  } catch (const std::invalid_argument& err) {
    throw ConfigError(err.what());
  }
  const std::string o = s.substr(slash + 1);
  if (o == "obs") {
    e.obstacles = true;
  } else if (o != "no_obs") {
    throw ConfigError("environment obstacle part must be obs or no_obs: " + s);
  }
  return e;
}

std::vector<Environment> default_environments() {
  std::vector<Environment> out;
  for (TerrainKind t : {TerrainKind::kFlat, TerrainKind::kBumpy, TerrainKind::kCombined}) {
    out.push_back({t, false});
    out.push_back({t, true});
  }
  return out;
}

void ExperimentPlan::validate() const {
  if (environments.empty()) throw ConfigError("experiment.environments is empty");
  if (seeds.empty()) throw ConfigError("experiment.seeds is empty");
  if (trials_per_env < 1) throw ConfigError("experiment.trials_per_env must be >= 1");
  if (obstacle_count < 0) throw ConfigError("experiment.obstacle_count must be >= 0");
  if (!fitness.valid()) throw ConfigError("fitness weights are inconsistent");
  if (workers < 1) throw ConfigError("experiment.workers must be >= 1");
  evo.validate();
}

ControllerEvaluation cell_evaluation(const ExperimentPlan& plan, const Environment& env, std::uint64_t seed) {
  WorldConfig wc = plan.world;
  wc.terrain = env.terrain;
  wc.obstacles = env.obstacles ? plan.obstacle_count : 0;
  wc.seed = seed;
  ControllerEvaluation ev;
  ev.world = make_world(wc, plan.body);
  ev.body = plan.body;
  ev.fitness = plan.fitness;
  ev.n_hidden = plan.n_hidden;
  ev.starts = ev.world.starts;
  ev.seed = seed;
  return ev;
}

double CellResult::mean_trial_fitness() const {
  double s = 0.0;
  for (const auto& t : trials) s += t.result.fitness;
  return trials.empty() ? 0.0 : s / static_cast<double>(trials.size());
}

double CellResult::mean_rotations_reached() const {
  double s = 0.0;
  int n = 0;
  for (const auto& t : trials) {
    if (!t.result.reached) continue;
    s += t.result.rotations_left + t.result.rotations_right;
    ++n;
  }
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : s / n;
}

namespace {

Pose jittered_start(const ExperimentPlan& plan, const World& world, const Pose& corner, std::uint64_t stream) {
  std::mt19937_64 rng(stream);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Pose p = corner;
  p.x += plan.start_jitter * u(rng);
  p.y += plan.start_jitter * u(rng);
  p.heading += plan.heading_jitter * u(rng);
  if (collides(world, plan.body, p.x, p.y)) return corner;
  return p;
}

std::uint64_t trial_stream(std::uint64_t seed, int trial) { return seed * 1000003ULL + static_cast<std::uint64_t>(trial); }

}  // namespace

CellResult run_cell(const ExperimentPlan& plan, const Environment& env, std::uint64_t seed) {
  const ControllerEvaluation ev = cell_evaluation(plan, env, seed);
  EvoConfig evo = plan.evo;
  evo.seed = seed;
  const auto evolved = evolve_controller(evo, ev);

  CellResult cell;
  cell.env = env;
  cell.seed = seed;
  cell.best_fitness = evolved.best.fitness.value_or(0.0);
  cell.log = evolved.log;

  ControllerEvaluation deploy = ev;
  deploy.lifetime_learning = evo.lifetime_learning;
  const Controller controller = decode_controller(evolved.best.genome, deploy);
  const auto& corners = ev.world.starts;
  for (int t = 0; t < plan.trials_per_env; ++t) {
    const int corner = t % static_cast<int>(corners.size());
    TrialSetup setup = default_setup(ev.world, plan.fitness);
    setup.start = jittered_start(plan, ev.world, corners[static_cast<std::size_t>(corner)], trial_stream(seed, t));
    TrialRecord rec;
    rec.seed = seed;
    rec.env = env.name();
    rec.trial = t;
    rec.corner = corner;
    rec.result = evaluate_trial(ev.world, plan.body, controller, plan.fitness, setup, trial_stream(seed, t));
    cell.trials.push_back(rec);
  }
  return cell;
}

std::vector<TableRow> aggregate(const std::vector<CellResult>& cells, const std::vector<Environment>& envs) {
  std::vector<TableRow> rows;
  for (const Environment& env : envs) {
    TableRow row;
    row.env = env.name();
    row.max_fitness = 0.0;
    double best_sum = 0.0;
    for (const CellResult& c : cells) {
      if (!(c.env == env)) continue;
      ++row.seeds;
      best_sum += c.best_fitness;
      for (const TrialRecord& t : c.trials) {
        ++row.trials;
        row.mean_fitness += t.result.fitness;
        row.max_fitness = std::max(row.max_fitness, t.result.fitness);
        row.mean_r_left += t.result.rotations_left;
        row.mean_r_right += t.result.rotations_right;
        row.mean_sensor_performance += t.result.sensor_performance;
        row.reached_fraction += t.result.reached ? 1.0 : 0.0;
      }
    }
    if (row.seeds > 0) row.mean_best_fitness = best_sum / row.seeds;
    if (row.trials > 0) {
      const double n = row.trials;
      row.mean_fitness /= n;
      row.mean_r_left /= n;
      row.mean_r_right /= n;
      row.mean_sensor_performance /= n;
      row.reached_fraction /= n;
    }
    rows.push_back(row);
  }
  return rows;
}

Report run_matrix(const ExperimentPlan& plan) {
  plan.validate();
  std::vector<std::pair<Environment, std::uint64_t>> jobs;
  for (const Environment& e : plan.environments) {
    for (std::uint64_t s : plan.seeds) jobs.emplace_back(e, s);
  }
  Report report;
  report.cells.resize(jobs.size());
  ExperimentPlan inner = plan;
  inner.evo.workers = 1;
  parallel_for_index(jobs.size(), plan.workers,
                     [&](std::size_t i) { report.cells[i] = run_cell(inner, jobs[i].first, jobs[i].second); });
  report.table = aggregate(report.cells, plan.environments);
  return report;
}

std::vector<FailureRow> run_failure_distribution(const ExperimentPlan& plan, int n_per_case, int* baseline_failures) {
  if (n_per_case < 1) throw ConfigError("failures per case must be >= 1");
  plan.validate();
  const std::uint64_t seed = plan.seeds.front();
  const ControllerEvaluation ev = cell_evaluation(plan, plan.failure_env, seed);
  EvoConfig evo = plan.evo;
  evo.seed = seed;
  const auto evolved = evolve_controller(evo, ev);
  const Controller controller = decode_controller(evolved.best.genome, ev);
  const auto& corners = ev.world.starts;

  auto run = [&](const std::optional<FailureInjection>& f, int j) {
    Controller c = controller;
    c.set_failure(f);
    TrialSetup setup = default_setup(ev.world, plan.fitness);
    setup.start = jittered_start(plan, ev.world, corners[static_cast<std::size_t>(j) % corners.size()],
                                 trial_stream(seed, j));
    TrialRun r = run_trial(ev.world, plan.body, c, setup, trial_stream(seed, j), plan.fitness.clearance_floor);
    return r.reached;
  };

  std::vector<FailureRow> rows;
  for (FailureCase fc : kAllFailureCases) {
    FailureRow row;
    row.failure_case = fc;
    std::vector<char> reached(static_cast<std::size_t>(n_per_case));
    parallel_for_index(reached.size(), plan.workers, [&](std::size_t j) {
      FailureInjection f;
      f.failure_case = fc;
      f.onset_step = plan.failure_onset;
      f.severity = plan.failure_severity;
      f.rng_seed = trial_stream(seed, static_cast<int>(j));
      reached[j] = run(f, static_cast<int>(j));
    });
    row.trials = n_per_case;
    for (char r : reached) row.task_failures += r ? 0 : 1;
    rows.push_back(row);
  }
  if (baseline_failures) {
    *baseline_failures = 0;
    for (int j = 0; j < n_per_case; ++j) *baseline_failures += run(std::nullopt, j) ? 0 : 1;
  }
  return rows;
}

namespace {

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

}  // namespace

std::vector<std::filesystem::path> export_report(const Report& report, const std::filesystem::path& dir,
                                                 bool plot_data) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;

  {
    const auto p = dir / "table.csv";
    auto out = open_out(p);
    out << "env,seeds,trials,mean_best_fitness,mean_fitness,max_fitness,mean_r_L,mean_r_R,mean_sensor_perf,"
           "reached_fraction\n";
    for (const auto& r : report.table) {
      out << r.env << ',' << r.seeds << ',' << r.trials << ',' << csv::num(r.mean_best_fitness) << ','
          << csv::num(r.mean_fitness) << ',' << csv::num(r.max_fitness) << ',' << csv::num(r.mean_r_left) << ','
          << csv::num(r.mean_r_right) << ',' << csv::num(r.mean_sensor_performance) << ','
          << csv::num(r.reached_fraction) << '\n';
    }
    written.push_back(p);
  }

  // Mean best-of-generation fitness per environment.
  {
    const auto p = dir / "curves.csv";
    auto out = open_out(p);
    std::vector<std::string> envs;
    for (const auto& r : report.table) envs.push_back(r.env);
    out << "generation,evaluations";
    for (const auto& e : envs) out << ',' << e;
    out << '\n';
    std::size_t gens = 0;
    for (const auto& c : report.cells) gens = std::max(gens, c.log.generations.size());
    for (std::size_t g = 0; g < gens; ++g) {
      long long evals = 0;
      std::vector<double> sum(envs.size(), 0.0);
      std::vector<int> n(envs.size(), 0);
      for (const auto& c : report.cells) {
        if (g >= c.log.generations.size()) continue;
        const auto idx = std::find(envs.begin(), envs.end(), c.env.name()) - envs.begin();
        sum[static_cast<std::size_t>(idx)] += c.log.generations[g].best;
        ++n[static_cast<std::size_t>(idx)];
        evals = std::max(evals, c.log.generations[g].evaluations);
      }
      out << g << ',' << evals;
      for (std::size_t e = 0; e < envs.size(); ++e) out << ',' << (n[e] ? csv::num(sum[e] / n[e]) : "");
      out << '\n';
    }
    written.push_back(p);
  }

  {
    const auto p = dir / "failures.csv";
    auto out = open_out(p);
    out << "case,trials,task_failures,failure_rate\n";
    for (const auto& r : report.failures) {
      out << to_string(r.failure_case) << ',' << r.trials << ',' << r.task_failures << ','
          << csv::num(r.trials ? static_cast<double>(r.task_failures) / r.trials : 0.0) << '\n';
    }
    if (report.baseline_failures >= 0 && !report.failures.empty()) {
      const int n = report.failures.front().trials;
      out << "baseline," << n << ',' << report.baseline_failures << ','
          << csv::num(static_cast<double>(report.baseline_failures) / n) << '\n';
    }
    written.push_back(p);
  }

  {
    const auto p = dir / "trials.csv";
    auto out = open_out(p);
    out << "seed,env,trial,corner,fitness,r_L,r_R,reached,sensor_perf,penalty_steps\n";
    for (const auto& c : report.cells) {
      for (const auto& t : c.trials) {
        out << t.seed << ',' << t.env << ',' << t.trial << ',' << t.corner << ',' << csv::num(t.result.fitness)
            << ',' << csv::num(t.result.rotations_left) << ',' << csv::num(t.result.rotations_right) << ','
            << (t.result.reached ? 1 : 0) << ',' << csv::num(t.result.sensor_performance) << ','
            << t.result.penalty_steps << '\n';
      }
    }
    written.push_back(p);
  }

  if (plot_data) {
    const auto p = dir / "curves_long.csv";
    auto out = open_out(p);
    out << "env,seed,generation,evaluations,best,mean,min\n";
    for (const auto& c : report.cells) {
      for (const auto& g : c.log.generations) {
        out << c.env.name() << ',' << c.seed << ',' << g.generation << ',' << g.evaluations << ','
            << csv::num(g.best) << ',' << csv::num(g.mean) << ',' << csv::num(g.min) << '\n';
      }
    }
    written.push_back(p);
  }
  return written;
}

}  // namespace evobot
