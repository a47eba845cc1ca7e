// Acceptance run: one PASS/FAIL line per primary criterion. Exit status is
// 0 only when every selected criterion passes.
//
//   acceptance [--only 1,3,5] [--workers N]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "evobot/estimation.hpp"
#include "evobot/evolution.hpp"
#include "evobot/experiments.hpp"
#include "evobot/genotype.hpp"
#include "support/random_genotype.hpp"

namespace evobot {
namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 3) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

int g_workers = 1;
double g_eta = 0.003;

// ---- 1 and 2: the environment matrix ----

const Report& matrix_report() {
  static const Report report = [] {
    ExperimentPlan plan;
    plan.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    plan.trials_per_env = 25;
    plan.evo.pop_size = 20;
    plan.evo.generations = 100;
    plan.workers = g_workers;
    return run_matrix(plan);
  }();
  return report;
}

double cell_value(const Report& r, const std::string& env, std::uint64_t seed,
                  const std::function<double(const CellResult&)>& f) {
  for (const CellResult& c : r.cells) {
    if (c.env.name() == env && c.seed == seed) return f(c);
  }
  return std::nan("");
}

Outcome environment_ordering() {
  const Report& r = matrix_report();
  const std::vector<std::string> chain = {"flat/no_obs", "flat/obs", "bumpy/no_obs", "bumpy/obs"};
  const std::string last = "combined/obs";
  int ordered = 0;
  int chain_only = 0;
  int last_min = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    std::map<std::string, double> best;
    for (const Environment& e : default_environments()) {
      best[e.name()] = cell_value(r, e.name(), seed, [](const CellResult& c) { return c.best_fitness; });
    }
    bool in_chain = true;
    for (std::size_t i = 0; i + 1 < chain.size(); ++i) in_chain = in_chain && best[chain[i]] > best[chain[i + 1]];
    bool minimum = true;
    for (const auto& [env, v] : best) minimum = minimum && (env == last || best[last] < v);
    chain_only += in_chain ? 1 : 0;
    last_min += minimum ? 1 : 0;
    ordered += in_chain && minimum ? 1 : 0;
  }
  std::map<std::string, double> mean;
  for (const TableRow& row : r.table) mean[row.env] = row.mean_best_fitness;
  bool mean_ok = true;
  for (std::size_t i = 0; i + 1 < chain.size(); ++i) mean_ok = mean_ok && mean[chain[i]] > mean[chain[i + 1]];
  for (const auto& [env, v] : mean) mean_ok = mean_ok && (env == last || mean[last] < v);
  std::string detail = "strict order in " + std::to_string(ordered) + "/10 seeds (need 8); terrain chain " +
                       std::to_string(chain_only) + "/10, combined/obs minimum " + std::to_string(last_min) +
                       "/10; means";
  for (const TableRow& row : r.table) detail += " " + row.env + "=" + fmt(row.mean_best_fitness);
  return {ordered >= 8 && mean_ok, detail};
}

// `obstacles`: -1 pools both obstacle conditions.
double pooled_rotations(const Report& r, TerrainKind terrain, std::uint64_t seed, int obstacles = -1) {
  double sum = 0.0;
  int n = 0;
  for (const CellResult& c : r.cells) {
    if (c.env.terrain != terrain || c.seed != seed) continue;
    if (obstacles >= 0 && c.env.obstacles != (obstacles == 1)) continue;
    for (const TrialRecord& t : c.trials) {
      if (!t.result.reached) continue;
      sum += t.result.rotations_left + t.result.rotations_right;
      ++n;
    }
  }
  return n == 0 ? std::nan("") : sum / n;
}

Outcome rotation_ordering() {
  const Report& r = matrix_report();
  int higher = 0;
  int higher_no_obs = 0;
  int higher_obs = 0;
  double flat_sum = 0.0;
  double bumpy_sum = 0.0;
  int flat_n = 0;
  int bumpy_n = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const double flat = pooled_rotations(r, TerrainKind::kFlat, seed);
    const double bumpy = pooled_rotations(r, TerrainKind::kBumpy, seed);
    higher += bumpy > flat ? 1 : 0;  // NaN compares false
    higher_no_obs += pooled_rotations(r, TerrainKind::kBumpy, seed, 0) > pooled_rotations(r, TerrainKind::kFlat, seed, 0);
    higher_obs += pooled_rotations(r, TerrainKind::kBumpy, seed, 1) > pooled_rotations(r, TerrainKind::kFlat, seed, 1);
    if (!std::isnan(flat)) flat_sum += flat, ++flat_n;
    if (!std::isnan(bumpy)) bumpy_sum += bumpy, ++bumpy_n;
  }
  return {higher >= 8, "bumpy > flat in " + std::to_string(higher) + "/10 seeds (need 8); mean rotations per reached trial flat=" +
                           fmt(flat_n ? flat_sum / flat_n : 0.0, 2) + " bumpy=" + fmt(bumpy_n ? bumpy_sum / bumpy_n : 0.0, 2) +
                           "; by obstacle condition: no_obs " + std::to_string(higher_no_obs) + "/10, obs " +
                           std::to_string(higher_obs) + "/10"};
}

// ---- 3: discrepancy identity ----

SimParams random_params(std::mt19937_64& rng, int n_hidden, int steps) {
  std::uniform_real_distribution<double> gain(0.0, kMaxGain);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SimParams p;
  p.motor_gain_left = gain(rng);
  p.motor_gain_right = gain(rng);
  for (auto& g : p.sensor_gains) g = gain(rng);
  p.slope_gain = gain(rng);
  p.failure.failure_case = kAllFailureCases[rng() % kAllFailureCases.size()];
  p.failure.severity = unit(rng);
  p.failure.onset_step = static_cast<int>(rng() % static_cast<std::uint64_t>(steps));
  p.failure.index = static_cast<int>(rng() % static_cast<std::uint64_t>(failure_index_choices(p.failure.failure_case, n_hidden)));
  return p;
}

Outcome discrepancy_identity() {
  const auto t0 = std::chrono::steady_clock::now();
  const World world = make_world(TerrainKind::kBumpy, 5, 3);
  std::mt19937_64 rng(2024);
  int zero = 0;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const SimParams p = random_params(rng, 2, 300);
    std::vector<SensorTrace> traces;
    for (int k = 0; k < 2; ++k) {
      traces.push_back(run_reference(Controller::random(2, static_cast<std::uint64_t>(i * 10 + k)), p, world,
                                     RobotBody{}, world.starts[static_cast<std::size_t>(k)], 300));
    }
    const double d = discrepancy(traces, p, world, RobotBody{}).value;
    zero += d == 0.0 ? 1 : 0;
    worst = std::max(worst, d);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {zero == 100, std::to_string(zero) + "/100 exactly zero, max " + fmt(worst, 6) + ", " + fmt(secs, 2) + " s"};
}

// ---- 4: diagnosis accuracy ----

Outcome diagnosis_accuracy() {
  const auto t0 = std::chrono::steady_clock::now();
  constexpr int kHidden = 2;
  constexpr int kSteps = 300;
  int total = 0;
  int top1 = 0;
  int top2 = 0;
  int missed_as_nothing = 0;
  std::map<FailureCase, int> correct_by_case;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const World world = make_world(TerrainKind::kBumpy, 5, seed);
    std::mt19937_64 rng(seed * 7919);
    for (FailureCase fc : kAllFailureCases) {
      SimParams truth;
      truth.failure.failure_case = fc;
      truth.failure.severity = std::uniform_real_distribution<double>(0.5, 1.0)(rng);
      truth.failure.onset_step = static_cast<int>(rng() % 50);
      truth.failure.index = static_cast<int>(rng() % static_cast<std::uint64_t>(failure_index_choices(fc, kHidden)));
      std::vector<SensorTrace> traces;
      for (int k = 0; k < 4; ++k) {
        const Controller c = Controller::random(kHidden, seed * 1000 + static_cast<std::uint64_t>(fc) * 10 + k);
        traces.push_back(run_reference(c, truth, world, RobotBody{}, world.starts[static_cast<std::size_t>(k)], kSteps));
      }
      EstimationConfig cfg;
      cfg.evo.pop_size = 16;
      cfg.evo.generations = 30;
      cfg.evo.seed = seed;
      cfg.evo.workers = g_workers;
      const auto ranking = diagnose(traces, world, RobotBody{}, cfg);
      ++total;
      if (ranking[0].failure_case == fc) ++top1, ++correct_by_case[fc];
      if (ranking[0].failure_case == fc || ranking[1].failure_case == fc) ++top2;
      if (fc != FailureCase::kNothingFail && ranking[0].failure_case == FailureCase::kNothingFail) ++missed_as_nothing;
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::string detail = "top-1 " + std::to_string(top1) + "/" + std::to_string(total) + " (need 60%), top-2 " +
                       std::to_string(top2) + "/" + std::to_string(total) + " (need 80%), real failures read as nothing_fail " +
                       std::to_string(missed_as_nothing) + "; per case top-1:";
  for (FailureCase fc : kAllFailureCases) detail += " " + std::string(to_string(fc)) + "=" + std::to_string(correct_by_case[fc]);
  detail += "; " + fmt(secs, 0) + " s";
  return {top1 >= 0.6 * total && top2 >= 0.8 * total && missed_as_nothing == 0, detail};
}

// ---- 5: NothingFail equivalence ----

Outcome nothing_fail_equivalence() {
  int identical = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const World world = make_world(seed % 2 ? TerrainKind::kBumpy : TerrainKind::kCombined, 5, seed + 1);
    const FitnessConfig fc;
    TrialSetup setup = default_setup(world, fc);
    setup.start = world.starts[seed % world.starts.size()];
    setup.sensors.noise_sigma = 0.05;
    Controller base = Controller::random(static_cast<int>(seed % 4), seed);
    Controller injected = base;
    injected.set_failure(FailureInjection{FailureCase::kNothingFail, static_cast<int>(seed % 200), 0.5 + 0.005 * static_cast<double>(seed), seed, -1});
    const TrialRun a = run_trial(world, RobotBody{}, base, setup, seed);
    const TrialRun b = run_trial(world, RobotBody{}, injected, setup, seed);
    std::ostringstream sa;
    std::ostringstream sb;
    write_trajectory_csv(sa, a.trajectory);
    write_trajectory_csv(sb, b.trajectory);
    identical += sa.str() == sb.str() && a.final_state == b.final_state ? 1 : 0;
  }
  return {identical == 100, std::to_string(identical) + "/100 trajectories byte-identical"};
}

// ---- 6: genotype suite ----

Outcome genotype_suite() {
  const Genotype khepera{std::string(kKheperaGenotype)};
  bool khepera_ok = false;
  try {
    const BodyPlan bp = parse(khepera);
    khepera_ok = bp.satisfies_invariants() && isomorphic(bp, parse(serialize(bp)));
  } catch (const GenotypeError&) {
  }
  testing_support::RandomGenotype gen(97);
  int round_trips = 0;
  int mutations = 0;
  int crosses = 0;
  constexpr int kN = 10000;
  Genotype walk = khepera;
  for (int i = 0; i < kN; ++i) {
    const Genotype g{gen.make()};
    try {
      const BodyPlan bp = parse(g);
      round_trips += isomorphic(bp, parse(serialize(bp))) ? 1 : 0;
    } catch (const GenotypeError&) {
    }
    const auto s = static_cast<std::uint64_t>(i);
    try {
      const Genotype m = mutate(i % 2 ? g : walk, {}, s);
      mutations += parse(m).satisfies_invariants() ? 1 : 0;
      walk = m.text.size() < 400 ? m : khepera;
    } catch (const GenotypeError&) {
    }
    try {
      crosses += parse(crossover(g, i % 3 ? walk : khepera, s)).satisfies_invariants() ? 1 : 0;
    } catch (const GenotypeError&) {
    }
  }
  return {khepera_ok && round_trips == kN && mutations == kN && crosses == kN,
          std::string("Khepera genotype ") + (khepera_ok ? "parses and round-trips" : "FAILS") + "; round-trip " +
              std::to_string(round_trips) + "/" + std::to_string(kN) + ", mutation closure " + std::to_string(mutations) +
              "/" + std::to_string(kN) + ", crossover closure " + std::to_string(crosses) + "/" + std::to_string(kN)};
}

// ---- 7: GA engine ----

ControllerEvaluation small_task(std::uint64_t seed) {
  ControllerEvaluation ev;
  ev.world = make_world(TerrainKind::kFlat, 3, seed);
  ev.fitness.max_steps = 300;
  ev.n_hidden = 1;
  return ev;
}

Outcome ga_engine() {
  int monotone = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    EvoConfig cfg;
    cfg.pop_size = 12;
    cfg.generations = 15;
    cfg.seed = seed;
    const auto r = evolve_controller(cfg, small_task(seed));
    bool ok = true;
    for (std::size_t g = 1; g < r.log.generations.size(); ++g) ok = ok && r.log.generations[g].best >= r.log.generations[g - 1].best;
    monotone += ok ? 1 : 0;
  }
  std::string reference;
  bool equal = true;
  for (int workers : {1, 4, 8}) {
    EvoConfig cfg;
    cfg.pop_size = 16;
    cfg.generations = 10;
    cfg.seed = 5;
    cfg.workers = workers;
    std::ostringstream csv;
    evolve_controller(cfg, small_task(5)).log.write_csv(csv);
    if (workers == 1) {
      reference = csv.str();
    } else {
      equal = equal && csv.str() == reference;
    }
  }
  return {monotone == 20 && equal, "monotone best in " + std::to_string(monotone) + "/20 runs; RunLog CSV across 1/4/8 workers " +
                                       (equal ? "byte-equal" : "DIFFERS")};
}

// ---- 8: lifetime learning ----

Outcome lifetime_learning() {
  // eta = 0 leaves every weight bit-identical.
  int untouched = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const World world = make_world(TerrainKind::kFlat, 5, seed + 1);
    Controller c = Controller::random(2, seed);
    const std::vector<double> before = c.weights();
    c.set_plasticity({PlasticityRule::kHebbian, 0.0, 4.0});
    run_trial(world, RobotBody{}, c, default_setup(world, FitnessConfig{}), seed);
    untouched += c.weights() == before ? 1 : 0;
  }

  const double kEta = g_eta;
  double sum_off = 0.0;
  double sum_on = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    ControllerEvaluation ev;
    ev.world = make_world(TerrainKind::kFlat, 5, seed);
    ev.starts = ev.world.starts;
    ev.n_hidden = 2;
    EvoConfig cfg;
    cfg.pop_size = 20;
    cfg.generations = 30;
    cfg.seed = seed;
    cfg.workers = g_workers;
    cfg.lifetime_learning = true;
    ev.plasticity = {PlasticityRule::kHebbian, 0.0, 4.0};
    sum_off += evolve_controller(cfg, ev).best.fitness.value_or(0.0);
    ev.plasticity = {PlasticityRule::kHebbian, kEta, 4.0};
    sum_on += evolve_controller(cfg, ev).best.fitness.value_or(0.0);
  }
  const double off = sum_off / 10;
  const double on = sum_on / 10;
  return {untouched == 20 && on >= off, "eta=0 no-op in " + std::to_string(untouched) + "/20 trials; mean final fitness eta=" +
                                            fmt(kEta, 4) + ": " + fmt(on, 4) + " vs eta=0: " + fmt(off, 4)};
}

// ---- 9: estimation loop ----

Outcome estimation_loop() {
  int reduced = 0;
  std::string worst;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 rng(seed * 31);
    std::uniform_real_distribution<double> gain(0.5, 1.5);
    SimParams truth;
    truth.motor_gain_left = gain(rng);
    truth.motor_gain_right = gain(rng);
    for (auto& g : truth.sensor_gains) g = gain(rng);
    if (seed % 2 == 0) {
      truth.failure = {kAllFailureCases[rng() % 8], static_cast<int>(rng() % 100), 0.5, 0,
                       static_cast<int>(rng() % 2)};
    }
    ControllerEvaluation task;
    task.world = make_world(TerrainKind::kFlat, 5, seed);
    task.fitness.max_steps = 300;
    task.n_hidden = 1;
    LoopConfig cfg;
    cfg.explore.pop_size = 12;
    cfg.explore.generations = 10;
    cfg.explore.seed = seed;
    cfg.explore.workers = g_workers;
    cfg.estimate.evo.pop_size = 16;
    cfg.estimate.evo.generations = 20;
    cfg.estimate.evo.seed = seed;
    cfg.estimate.evo.workers = g_workers;
    const LoopResult r = estimation_exploration(truth, SimParams{}, task, cfg);
    if (r.final_discrepancy < r.start_discrepancy) {
      ++reduced;
    } else {
      worst += " seed " + std::to_string(seed) + ": " + fmt(r.start_discrepancy, 5) + " -> " + fmt(r.final_discrepancy, 5);
    }
  }
  return {reduced >= 16, "discrepancy reduced in " + std::to_string(reduced) + "/20 trials (need 16)" +
                             (worst.empty() ? "" : ";" + worst)};
}

}  // namespace
}  // namespace evobot

int main(int argc, char** argv) {
  using namespace evobot;
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  app.add_option("--only", only, "criteria to run")->delimiter(',');
  app.add_option("--workers", g_workers, "worker threads");
  app.add_option("--eta", g_eta, "learning rate for the lifetime-learning criterion");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"environment-difficulty ordering", environment_ordering},
      {"rotation-effort ordering", rotation_ordering},
      {"discrepancy identity", discrepancy_identity},
      {"diagnosis accuracy", diagnosis_accuracy},
      {"NothingFail bit-equivalence", nothing_fail_equivalence},
      {"genotype suite", genotype_suite},
      {"GA engine", ga_engine},
      {"lifetime learning", lifetime_learning},
      {"estimation loop contract", estimation_loop},
  };
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const Outcome o = criteria[i].second();
    all = all && o.pass;
    std::cout << "criterion " << id << " " << criteria[i].first << ": " << (o.pass ? "PASS" : "FAIL") << " | "
              << o.detail << std::endl;
  }
  return all ? 0 : 1;
}
