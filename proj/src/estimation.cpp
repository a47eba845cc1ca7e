#include "evobot/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "evobot/csv.hpp"

namespace evobot {

void SimParams::validate() const {
  auto gain_ok = [](double g) { return g >= 0.0 && g <= kMaxGain; };
  bool ok = gain_ok(motor_gain_left) && gain_ok(motor_gain_right) && gain_ok(slope_gain);
  for (double g : sensor_gains) ok = ok && gain_ok(g);
  if (!ok) throw ConfigError("simulator gains must lie in [0, 2]");
  if (!(failure.severity >= 0.0 && failure.severity <= 1.0)) throw ConfigError("failure severity must lie in [0, 1]");
  if (failure.onset_step < 0) throw ConfigError("failure onset must be >= 0");
}

GeneMask all_genes() {
  GeneMask m;
  m.fill(true);
  return m;
}

GeneMask gain_genes() {
  GeneMask m{};
  for (int g = kGeneGainLeft; g < kGeneSlopeGain; ++g) m[g] = true;
  return m;
}

GeneMask failure_genes() {
  GeneMask m{};
  m[kGeneCase] = m[kGeneSeverity] = m[kGeneIndex] = m[kGeneOnset] = true;
  return m;
}

std::vector<double> encode_params(const SimParams& p, int max_onset, int n_hidden) {
  std::vector<double> g(kSimGeneCount);
  g[kGeneGainLeft] = p.motor_gain_left;
  g[kGeneGainRight] = p.motor_gain_right;
  for (int i = 0; i < kSensorCount; ++i) g[kGeneSensorGain0 + i] = p.sensor_gains[i];
  g[kGeneSlopeGain] = p.slope_gain;
  g[kGeneCase] = static_cast<int>(p.failure.failure_case) - 0.5;
  g[kGeneSeverity] = p.failure.severity;
  const int choices = failure_index_choices(p.failure.failure_case, n_hidden);
  g[kGeneIndex] = (p.failure.chosen_index(choices) + 0.5) / choices;
  g[kGeneOnset] = std::clamp(p.failure.onset_step, 0, max_onset);
  return g;
}

SimParams decode_params(const std::vector<double>& genome, const GeneMask& mask, const SimParams& base,
                        int max_onset, int n_hidden) {
  SimParams p = base;
  auto gene = [&](int g) { return genome.at(static_cast<std::size_t>(g)); };
  if (mask[kGeneGainLeft]) p.motor_gain_left = gene(kGeneGainLeft);
  if (mask[kGeneGainRight]) p.motor_gain_right = gene(kGeneGainRight);
  for (int i = 0; i < kSensorCount; ++i) {
    if (mask[kGeneSensorGain0 + i]) p.sensor_gains[i] = gene(kGeneSensorGain0 + i);
  }
  if (mask[kGeneSlopeGain]) p.slope_gain = gene(kGeneSlopeGain);
  if (mask[kGeneCase]) {
    const int c = std::clamp(static_cast<int>(std::floor(gene(kGeneCase))), 0, 8) + 1;
    p.failure.failure_case = static_cast<FailureCase>(c);
  }
  if (mask[kGeneSeverity]) p.failure.severity = std::clamp(gene(kGeneSeverity), 0.0, 1.0);
  if (mask[kGeneIndex]) {
    const int choices = failure_index_choices(p.failure.failure_case, n_hidden);
    p.failure.index = std::clamp(static_cast<int>(std::floor(gene(kGeneIndex) * choices)), 0, choices - 1);
  }
  if (mask[kGeneOnset]) {
    p.failure.onset_step = std::clamp(static_cast<int>(std::lround(gene(kGeneOnset))), 0, max_onset);
  }
  return p;
}

WeightVectorOps sim_param_ops(const EvoConfig& cfg, int max_onset) {
  WeightVectorOps ops;
  ops.dimension = kSimGeneCount;
  ops.sigma = cfg.mutation_sigma;
  ops.rate = cfg.mutation_rate;
  ops.lo.assign(kSimGeneCount, 0.0);
  ops.hi.assign(kSimGeneCount, kMaxGain);
  ops.scale.assign(kSimGeneCount, 1.0);
  ops.hi[kGeneCase] = 9.0;
  ops.scale[kGeneCase] = 6.0;
  ops.hi[kGeneSeverity] = 1.0;
  ops.hi[kGeneIndex] = 1.0;
  ops.scale[kGeneIndex] = 2.0;
  ops.hi[kGeneOnset] = std::max(1, max_onset);
  ops.scale[kGeneOnset] = std::max(1.0, max_onset / 4.0);
  return ops;
}

Trajectory simulate(const Controller& c, const SimParams& params, const World& world, const RobotBody& body,
                    const Pose& start, int steps, const StepConfig& step_cfg) {
  RobotBody b = body;
  b.slope_gain = params.slope_gain;
  Controller run_c = c;
  run_c.reset();
  run_c.set_failure(params.failure);
  TrialSetup setup;
  setup.start = start;
  setup.actuation.gain_left = params.motor_gain_left;
  setup.actuation.gain_right = params.motor_gain_right;
  setup.sensors.gains = params.sensor_gains;
  setup.max_steps = steps;
  setup.step_cfg = step_cfg;
  setup.stop_on_reach = false;
  return run_trial(world, b, run_c, setup, 0).trajectory;
}

SensorTrace run_reference(const Controller& c, const SimParams& true_params, const World& world,
                          const RobotBody& body, const Pose& start, int steps, const StepConfig& step_cfg,
                          long long controller_id) {
  SensorTrace t;
  t.controller = c;
  t.controller.reset();
  t.controller.set_failure(std::nullopt);
  t.controller_id = controller_id;
  t.world_seed = world.seed;
  t.start = start;
  t.step_cfg = step_cfg;
  t.samples = simulate(t.controller, true_params, world, body, start, steps, step_cfg);
  return t;
}

void write_sensor_trace(std::ostream& out, const SensorTrace& trace) {
  out << "# controller_id=" << trace.controller_id << '\n';
  out << "# world_seed=" << trace.world_seed << '\n';
  out << "# start=" << csv::num(trace.start.x) << ',' << csv::num(trace.start.y) << ','
      << csv::num(trace.start.heading) << '\n';
  out << "# coarseness=" << csv::num(trace.step_cfg.coarseness) << '\n';
  out << "# dt_min=" << csv::num(trace.step_cfg.dt_min) << '\n';
  out << "# dt_max=" << csv::num(trace.step_cfg.dt_max) << '\n';
  out << "# t_start=" << csv::num(trace.step_cfg.t_start) << '\n';
  out << "# t_finish=" << csv::num(trace.step_cfg.t_finish) << '\n';
  std::ostringstream ctrl;
  save_controller(ctrl, trace.controller);
  std::istringstream lines(ctrl.str());
  for (std::string line; std::getline(lines, line);) out << "#! " << line << '\n';
  write_trajectory_csv(out, trace.samples);
}

SensorTrace read_sensor_trace(std::istream& in) {
  std::map<std::string, std::string> meta;
  std::string ctrl;
  std::string body;
  for (std::string line; std::getline(in, line);) {
    if (line.rfind("#!", 0) == 0) {
      ctrl += line.substr(line.size() > 2 && line[2] == ' ' ? 3 : 2) + '\n';
    } else if (line.rfind('#', 0) == 0) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      std::string key = line.substr(1, eq - 1);
      key.erase(0, key.find_first_not_of(' '));
      meta[key] = line.substr(eq + 1);
    } else {
      body += line + '\n';
    }
  }
  auto get = [&](const std::string& k) -> const std::string& {
    auto it = meta.find(k);
    if (it == meta.end()) throw TraceError("trace metadata missing '" + k + "'");
    return it->second;
  };
  if (ctrl.empty()) throw TraceError("trace has no embedded controller");
  SensorTrace t;
  std::istringstream cs(ctrl);
  t.controller = load_controller(cs);
  t.controller_id = std::stoll(get("controller_id"));
  t.world_seed = std::stoull(get("world_seed"));
  const auto start = csv::split(get("start"));
  if (start.size() != 3) throw TraceError("trace start must be x,y,heading");
  t.start = {csv::to_double(start[0]), csv::to_double(start[1]), csv::to_double(start[2])};
  t.step_cfg.coarseness = csv::to_double(get("coarseness"));
  t.step_cfg.dt_min = csv::to_double(get("dt_min"));
  t.step_cfg.dt_max = csv::to_double(get("dt_max"));
  t.step_cfg.t_start = csv::to_double(get("t_start"));
  t.step_cfg.t_finish = csv::to_double(get("t_finish"));
  std::istringstream bs(body);
  t.samples = read_trajectory_csv(bs);
  if (t.samples.empty()) throw TraceError("trace has no samples");
  return t;
}

namespace {

double sample_distance(const TrajectorySample& a, const TrajectorySample& b, double omega_max) {
  double sum = 0.0;
  for (int k = 0; k < kSensorCount; ++k) sum += std::abs(a.reading.proximity[k] - b.reading.proximity[k]);
  sum += std::abs(a.reading.rotation_rate_left - b.reading.rotation_rate_left) / omega_max;
  sum += std::abs(a.reading.rotation_rate_right - b.reading.rotation_rate_right) / omega_max;
  sum += std::abs(a.motor.left - b.motor.left);
  sum += std::abs(a.motor.right - b.motor.right);
  return sum;
}

}  // namespace

Discrepancy discrepancy(const std::vector<SensorTrace>& traces, const SimParams& candidate, const World& world,
                        const RobotBody& body) {
  if (traces.empty()) throw TraceError("discrepancy needs at least one trace");
  Discrepancy d;
  for (const SensorTrace& t : traces) {
    if (t.samples.empty()) throw TraceError("empty trace for controller " + std::to_string(t.controller_id));
    const int steps = static_cast<int>(t.samples.size());
    const Trajectory sim = simulate(t.controller, candidate, world, body, t.start, steps, t.step_cfg);
    const std::size_t n = std::min(sim.size(), t.samples.size());
    if (sim.size() != t.samples.size()) {
      d.warnings.push_back("TraceMismatch: controller " + std::to_string(t.controller_id) + " has " +
                           std::to_string(t.samples.size()) + " observed and " + std::to_string(sim.size()) +
                           " simulated steps; truncated to " + std::to_string(n));
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) sum += sample_distance(t.samples[k], sim[k], body.omega_max);
    const double term = n == 0 ? 0.0 : sum / (static_cast<double>(n) * kDiscrepancyChannels);
    d.per_controller.push_back(term);
  }
  double total = 0.0;
  for (double term : d.per_controller) total += term;
  d.value = total / static_cast<double>(traces.size());
  return d;
}

namespace {

struct SearchSpace {
  const std::vector<SensorTrace>* traces;
  const World* world;
  const RobotBody* body;
  int max_onset = 0;
  int n_hidden = 0;

  double score(const SimParams& p) const { return discrepancy(*traces, p, *world, *body).value; }
};

// Coordinate pass over the discrete failure genes and severity until no move helps.
void polish(const SearchSpace& space, const GeneMask& mask, SimParams& best, double& best_d) {
  for (int round = 0; round < 20 && best_d > 0.0; ++round) {
    std::vector<SimParams> moves;
    if (mask[kGeneOnset]) {
      for (int delta : {-1, 1, -2, 2, -5, 5, -20, 20}) {
        SimParams p = best;
        p.failure.onset_step = std::clamp(best.failure.onset_step + delta, 0, space.max_onset);
        moves.push_back(p);
      }
    }
    if (mask[kGeneIndex]) {
      const int choices = failure_index_choices(best.failure.failure_case, space.n_hidden);
      for (int i = 0; i < choices; ++i) {
        SimParams p = best;
        p.failure.index = i;
        moves.push_back(p);
      }
    }
    if (mask[kGeneSeverity]) {
      for (double delta : {-0.1, 0.1, -0.02, 0.02, -0.005, 0.005}) {
        SimParams p = best;
        p.failure.severity = std::clamp(best.failure.severity + delta, 0.0, 1.0);
        moves.push_back(p);
      }
    }
    bool improved = false;
    for (const SimParams& p : moves) {
      if (p == best) continue;
      const double d = space.score(p);
      if (d < best_d) {
        best_d = d;
        best = p;
        improved = true;
      }
    }
    if (!improved) break;
  }
}

}  // namespace

EstimationResult estimation_phase(const std::vector<SensorTrace>& traces, const World& world, const RobotBody& body,
                                  const EstimationConfig& cfg, const std::vector<SimParams>& seeds) {
  if (traces.empty()) throw TraceError("estimation needs at least one trace");
  SearchSpace space{&traces, &world, &body, 0, traces.front().controller.topology().n_hidden()};
  for (const auto& t : traces) space.max_onset = std::max(space.max_onset, static_cast<int>(t.samples.size()));

  EstimationResult result;
  result.warnings = discrepancy(traces, cfg.base, world, body).warnings;

  GeneticAlgorithm<WeightVectorOps> ga(cfg.evo, sim_param_ops(cfg.evo, space.max_onset));
  std::vector<std::vector<double>> seed_genomes;
  for (const auto& s : seeds) seed_genomes.push_back(encode_params(s, space.max_onset, space.n_hidden));
  const auto decode = [&](const std::vector<double>& g) {
    return decode_params(g, cfg.mask, cfg.base, space.max_onset, space.n_hidden);
  };
  const std::function<double(const std::vector<double>&)> eval = [&](const std::vector<double>& g) {
    return -space.score(decode(g));
  };

  ga.initialize(seed_genomes);
  ga.evaluate(eval);
  while (ga.generation() < cfg.evo.generations && *ga.best().fitness < 0.0) {
    ga.advance();
    ga.evaluate(eval);
  }
  result.params = decode(ga.best().genome);
  result.discrepancy = -*ga.best().fitness;
  if (cfg.polish) polish(space, cfg.mask, result.params, result.discrepancy);
  result.log = ga.log();
  return result;
}

namespace {

bool uses_severity(FailureCase c) { return c == FailureCase::kMotorWeak || c == FailureCase::kBodyDamage; }

}  // namespace

std::vector<DiagnosisEntry> diagnose(const std::vector<SensorTrace>& traces, const World& world,
                                     const RobotBody& body, const EstimationConfig& cfg) {
  if (traces.empty()) throw TraceError("diagnosis needs at least one trace");
  const int n_hidden = traces.front().controller.topology().n_hidden();
  std::vector<DiagnosisEntry> ranking;
  std::vector<FailureCase> order = {FailureCase::kNothingFail};
  for (FailureCase c : kAllFailureCases) {
    if (c != FailureCase::kNothingFail) order.push_back(c);
  }
  for (FailureCase c : order) {
    EstimationConfig ec = cfg;
    ec.base.failure = FailureInjection{};
    ec.base.failure.failure_case = c;
    ec.base.failure.index = 0;
    ec.mask = GeneMask{};
    if (c != FailureCase::kNothingFail) ec.mask[kGeneOnset] = true;
    if (uses_severity(c)) ec.mask[kGeneSeverity] = true;
    if (failure_index_choices(c, n_hidden) > 1) ec.mask[kGeneIndex] = true;
    ec.evo.seed = cfg.evo.seed * 31 + static_cast<std::uint64_t>(c);

    DiagnosisEntry e;
    e.failure_case = c;
    if (c == FailureCase::kNothingFail) {
      e.params = ec.base;
      e.score = discrepancy(traces, ec.base, world, body).value;
    } else {
      const EstimationResult r = estimation_phase(traces, world, body, ec);
      e.params = r.params;
      e.score = r.discrepancy;
    }
    ranking.push_back(e);
  }
  std::stable_sort(ranking.begin(), ranking.end(),
                   [](const DiagnosisEntry& a, const DiagnosisEntry& b) { return a.score < b.score; });
  return ranking;
}

void write_diagnosis_csv(std::ostream& out, const std::vector<DiagnosisEntry>& ranking) {
  out << "rank,case,score,severity,index,onset\n";
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    const auto& e = ranking[i];
    out << i + 1 << ',' << to_string(e.failure_case) << ',' << csv::num(e.score) << ','
        << csv::num(e.params.failure.severity) << ',' << e.params.failure.index << ','
        << e.params.failure.onset_step << '\n';
  }
}

void write_diagnosis_text(std::ostream& out, const std::vector<DiagnosisEntry>& ranking) {
  out << "Failure diagnosis (lower discrepancy explains the traces better)\n";
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    const auto& e = ranking[i];
    char line[160];
    std::snprintf(line, sizeof(line), "%2zu. %-20s discrepancy %.6g  severity %.3f  index %d  onset %d\n", i + 1,
                  to_string(e.failure_case), e.score, e.params.failure.severity, e.params.failure.index,
                  e.params.failure.onset_step);
    out << line;
  }
}

ControllerEvaluation with_params(const ControllerEvaluation& task, const SimParams& params) {
  ControllerEvaluation ev = task;
  ev.actuation.gain_left *= params.motor_gain_left;
  ev.actuation.gain_right *= params.motor_gain_right;
  ev.sensors.gains = params.sensor_gains;
  ev.body.slope_gain = params.slope_gain;
  ev.failure = params.failure;
  return ev;
}

Controller exploration_phase(const SimParams& params, const EvoConfig& evo, const ControllerEvaluation& task) {
  params.validate();
  const ControllerEvaluation ev = with_params(task, params);
  const auto result = evolve_controller(evo, ev);
  ControllerEvaluation plain = ev;
  plain.failure.reset();
  plain.lifetime_learning = evo.lifetime_learning;
  return decode_controller(result.best.genome, plain);
}

LoopResult estimation_exploration(const SimParams& true_params, const SimParams& approx,
                                  const ControllerEvaluation& task, const LoopConfig& cfg) {
  true_params.validate();
  approx.validate();
  LoopResult r;
  r.start = approx;
  SimParams working = approx;
  const std::vector<Pose> starts = task.starts.empty() ? std::vector<Pose>{task.world.start()} : task.starts;
  for (int cycle = 0; cycle < cfg.cycles; ++cycle) {
    EvoConfig explore = cfg.explore;
    explore.seed = cfg.explore.seed + static_cast<std::uint64_t>(cycle);
    const Controller c = exploration_phase(working, explore, task);
    const Pose& start = starts[static_cast<std::size_t>(cycle) % starts.size()];
    r.traces.push_back(
        run_reference(c, true_params, task.world, task.body, start, cfg.trace_steps, task.fitness.step_cfg, cycle));
    EstimationConfig est = cfg.estimate;
    est.base = working;
    est.evo.seed = cfg.estimate.evo.seed + static_cast<std::uint64_t>(cycle);
    working = estimation_phase(r.traces, task.world, task.body, est, {working}).params;
  }
  r.final = working;
  r.start_discrepancy = discrepancy(r.traces, approx, task.world, task.body).value;
  r.final_discrepancy = discrepancy(r.traces, working, task.world, task.body).value;
  return r;
}

}  // namespace evobot
