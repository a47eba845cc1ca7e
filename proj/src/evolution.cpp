#include "evobot/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "evobot/csv.hpp"

namespace evobot {

const char* to_string(EvoMode m) {
  switch (m) {
    case EvoMode::kStandard: return "standard";
    case EvoMode::kCoEvolution: return "coevolution";
    case EvoMode::kVirtualEcology: return "ecology";
    case EvoMode::kUserGuided: return "user_guided";
  }
  return "standard";
}

EvoMode evo_mode_from_string(const std::string& s) {
  for (EvoMode m : {EvoMode::kStandard, EvoMode::kCoEvolution, EvoMode::kVirtualEcology, EvoMode::kUserGuided}) {
    if (s == to_string(m)) return m;
  }
  throw ConfigError("unknown evolution mode '" + s + "'");
}

void EvoConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (pop_size < 2) fail("evolution.pop_size must be >= 2 (got " + std::to_string(pop_size) + ")");
  if (generations < 0) fail("evolution.generations must be >= 0");
  if (tournament_k < 1) fail("evolution.tournament_k must be >= 1");
  if (elitism_count < 1 || elitism_count > pop_size) fail("evolution.elitism_count must be in [1, pop_size]");
  if (!(mutation_sigma >= 0.0)) fail("evolution.mutation_sigma must be >= 0");
  if (!(mutation_rate >= 0.0 && mutation_rate <= 1.0)) fail("evolution.mutation_rate must be in [0, 1]");
  if (!(crossover_prob >= 0.0 && crossover_prob <= 1.0)) fail("evolution.crossover_prob must be in [0, 1]");
  if (workers < 1) fail("evolution.workers must be >= 1");
  if (stagnation_generations < 1) fail("evolution.stagnation_generations must be >= 1");
}

void RunLog::write_csv(std::ostream& out) const {
  out << "generation,best,mean,min,evaluations,best_id\n";
  for (const auto& g : generations) {
    out << g.generation << ',' << csv::num(g.best) << ',' << csv::num(g.mean) << ',' << csv::num(g.min) << ','
        << g.evaluations << ',' << g.best_id << '\n';
  }
}

void RunLog::write_snapshots(std::ostream& out) const {
  for (const auto& s : snapshots) out << s << '\n';
}

namespace {

double reflect(double v, double lo, double hi) {
  const double span = hi - lo;
  if (span <= 0.0) return lo;
  double u = std::fmod(v - lo, 2.0 * span);
  if (u < 0.0) u += 2.0 * span;
  return u <= span ? lo + u : hi - (u - span);
}

}  // namespace

WeightVectorOps::Genome WeightVectorOps::random(std::mt19937_64& rng) const {
  Genome g(dimension);
  for (std::size_t i = 0; i < dimension; ++i) {
    const double a = lo.empty() ? -init_range : lo[i];
    const double b = hi.empty() ? init_range : hi[i];
    g[i] = std::uniform_real_distribution<double>(a, b)(rng);
  }
  return g;
}

WeightVectorOps::Genome WeightVectorOps::mutate(const Genome& g, std::mt19937_64& rng) const {
  Genome out = g;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (unit(rng) >= rate) continue;
    out[i] += sigma * (scale.empty() ? 1.0 : scale[i]) * gauss(rng);
    if (!lo.empty()) out[i] = reflect(out[i], lo[i], hi[i]);
  }
  return out;
}

WeightVectorOps::Genome WeightVectorOps::crossover(const Genome& a, const Genome& b, std::mt19937_64& rng) const {
  Genome out = a;
  std::bernoulli_distribution coin(0.5);
  for (std::size_t i = 0; i < out.size() && i < b.size(); ++i) {
    if (coin(rng)) out[i] = b[i];
  }
  return out;
}

GenotypeOps::Genome GenotypeOps::random(std::mt19937_64& rng) const {
  Genome g = origin;
  for (int i = 0; i < initial_mutations; ++i) g = evobot::mutate(g, rates, rng());
  return g;
}

std::string rng_state(const std::mt19937_64& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

void set_rng_state(std::mt19937_64& rng, const std::string& state) {
  std::istringstream in(state);
  in >> rng;
  if (!in) throw ConfigError("corrupt RNG state in checkpoint");
}

// ---- controllers ----

WeightVectorOps controller_ops(int n_hidden, const EvoConfig& cfg) {
  WeightVectorOps ops;
  ops.dimension = Topology(n_hidden).edges().size();
  ops.sigma = cfg.mutation_sigma;
  ops.rate = cfg.mutation_rate;
  return ops;
}

Controller decode_controller(const std::vector<double>& genome, const ControllerEvaluation& ev) {
  Topology topology(ev.n_hidden);
  if (genome.size() != topology.edges().size()) {
    throw ConfigError("genome length " + std::to_string(genome.size()) + " does not match topology edge count " +
                      std::to_string(topology.edges().size()));
  }
  return Controller(std::move(topology), genome, ev.fitness.threshold,
                    ev.lifetime_learning ? ev.plasticity : PlasticityConfig{}, ev.failure);
}

double evaluate_controller(const std::vector<double>& genome, const ControllerEvaluation& ev) {
  const Controller proto = decode_controller(genome, ev);
  const std::vector<Pose> starts = ev.starts.empty() ? std::vector<Pose>{ev.world.start()} : ev.starts;
  double sum = 0.0;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    TrialSetup setup;
    setup.start = starts[i];
    setup.actuation = ev.actuation;
    setup.sensors = ev.sensors;
    setup.max_steps = ev.fitness.max_steps;
    setup.step_cfg = ev.fitness.step_cfg;
    Controller c = proto;
    const TrialRun run = run_trial(ev.world, ev.body, c, setup, ev.seed + i, ev.fitness.clearance_floor);
    sum += score_trial(ev.world, ev.body, setup.start, run, ev.fitness).fitness;
  }
  return sum / static_cast<double>(starts.size());
}

EvolutionResult<std::vector<double>> evolve_controller(const EvoConfig& cfg, const ControllerEvaluation& ev,
                                                       const std::string& resume_path) {
  ControllerEvaluation e = ev;
  e.lifetime_learning = cfg.lifetime_learning;
  const std::function<double(const std::vector<double>&)> eval = [&e](const std::vector<double>& g) {
    return evaluate_controller(g, e);
  };
  return evolve(cfg, controller_ops(ev.n_hidden, cfg), eval, {}, resume_path);
}

// ---- co-evolution ----

namespace {

constexpr double kLayoutRadiusMin = 0.3;
constexpr double kLayoutRadiusMax = 0.7;

double dist(double ax, double ay, double bx, double by) { return std::hypot(ax - bx, ay - by); }

}  // namespace

WeightVectorOps layout_ops(const EvoConfig& cfg) {
  WeightVectorOps ops;
  ops.dimension = kLayoutSlots * kLayoutGenes;
  ops.sigma = cfg.mutation_sigma;
  ops.rate = cfg.mutation_rate;
  ops.lo.assign(ops.dimension, 0.0);
  ops.hi.assign(ops.dimension, 1.0);
  return ops;
}

std::vector<double> empty_layout() { return std::vector<double>(kLayoutSlots * kLayoutGenes, 0.0); }

World decode_layout(const World& base, const RobotBody& body, const std::vector<double>& genome) {
  if (genome.size() != static_cast<std::size_t>(kLayoutSlots * kLayoutGenes)) {
    throw ConfigError("layout genome must have " + std::to_string(kLayoutSlots * kLayoutGenes) + " genes");
  }
  World w = base;
  const Bounds& b = w.bounds;
  for (int s = 0; s < kLayoutSlots; ++s) {
    const double* g = &genome[static_cast<std::size_t>(s * kLayoutGenes)];
    if (g[3] <= 0.5) continue;
    Obstacle o;
    o.radius = kLayoutRadiusMin + std::clamp(g[2], 0.0, 1.0) * (kLayoutRadiusMax - kLayoutRadiusMin);
    o.center.x = b.x_min + o.radius + std::clamp(g[0], 0.0, 1.0) * (b.width() - 2.0 * o.radius);
    o.center.y = b.y_min + o.radius + std::clamp(g[1], 0.0, 1.0) * (b.height() - 2.0 * o.radius);
    bool ok = dist(o.center.x, o.center.y, w.target.center.x, w.target.center.y) >=
              o.radius + w.target.radius + body.body_radius;
    for (const Pose& p : w.starts) {
      ok = ok && dist(o.center.x, o.center.y, p.x, p.y) >= o.radius + 2.0 * body.body_radius;
    }
    for (const Obstacle& e : w.obstacles) {
      ok = ok && dist(o.center.x, o.center.y, e.center.x, e.center.y) >= o.radius + e.radius;
    }
    if (ok) w.obstacles.push_back(o);
  }
  return w;
}

CrossEvaluation cross_evaluate(const std::vector<double>& robot, const std::vector<double>& layout,
                               const ControllerEvaluation& ev) {
  ControllerEvaluation e = ev;
  e.world = decode_layout(ev.world, ev.body, layout);
  CrossEvaluation r;
  r.robot = evaluate_controller(robot, e);
  r.layout = 1.0 - r.robot;
  return r;
}

CoevolutionResult coevolve(const EvoConfig& robot_cfg, const EvoConfig& layout_cfg, const ControllerEvaluation& ev,
                           const std::optional<std::vector<double>>& frozen_layout) {
  ControllerEvaluation e = ev;
  e.lifetime_learning = robot_cfg.lifetime_learning;
  GeneticAlgorithm<WeightVectorOps> robots(robot_cfg, controller_ops(ev.n_hidden, robot_cfg));
  GeneticAlgorithm<WeightVectorOps> layouts(layout_cfg, layout_ops(layout_cfg));

  std::vector<double> opponent = frozen_layout ? *frozen_layout : empty_layout();
  World arena = decode_layout(e.world, e.body, opponent);
  auto robot_eval = [&](const std::vector<double>& g) {
    ControllerEvaluation x = e;
    x.world = arena;
    return evaluate_controller(g, x);
  };
  std::vector<double> champion;
  auto layout_eval = [&](const std::vector<double>& g) { return cross_evaluate(champion, g, e).layout; };

  robots.initialize();
  robots.evaluate(robot_eval);
  if (!frozen_layout) {
    layouts.initialize();
    champion = robots.best().genome;
    layouts.evaluate(layout_eval);
  }
  for (int gen = 1; gen <= robot_cfg.generations; ++gen) {
    bool opponent_changed = false;
    if (!frozen_layout && layouts.best().genome != opponent) {
      opponent = layouts.best().genome;
      arena = decode_layout(e.world, e.body, opponent);
      opponent_changed = true;
    }
    robots.advance();
    robots.evaluate(robot_eval, opponent_changed);
    if (!frozen_layout && gen <= layout_cfg.generations) {
      const bool champion_changed = robots.best().genome != champion;
      champion = robots.best().genome;
      layouts.advance();
      layouts.evaluate(layout_eval, champion_changed);
    }
  }

  CoevolutionResult r;
  r.best_robot = robots.best();
  r.robot_log = robots.log();
  if (frozen_layout) {
    r.best_layout.genome = *frozen_layout;
  } else {
    r.best_layout = layouts.best();
    r.layout_log = layouts.log();
  }
  return r;
}

// ---- virtual ecology ----

namespace {

struct EcologyWorld {
  World world;
  std::size_t static_obstacles = 0;

  // Every other living robot becomes an obstacle of body size.
  void place_others(const std::vector<EcologyAgent>& agents, const std::vector<std::size_t>& alive, std::size_t self,
                    double body_radius) {
    world.obstacles.resize(static_obstacles);
    for (std::size_t i : alive) {
      if (i == self) continue;
      world.obstacles.push_back({{agents[i].state.x, agents[i].state.y}, body_radius});
    }
  }
};

// Corner `slot` first, then the other corners, then positions stepped from
// each corner toward the target until one is free.
RobotState spawn(EcologyWorld& eco, const RobotBody& body, const std::vector<EcologyAgent>& agents,
                 const std::vector<std::size_t>& alive, std::size_t self, int slot) {
  eco.place_others(agents, alive, self, body.body_radius);
  const auto& starts = eco.world.starts;
  const int n = static_cast<int>(starts.size());
  for (int k = 0; k < 12; ++k) {
    for (int c = 0; c < n; ++c) {
      const Pose& p = starts[static_cast<std::size_t>((slot + c) % n)];
      const double d = k * 2.5 * body.body_radius;
      Pose q{p.x + d * std::cos(p.heading), p.y + d * std::sin(p.heading), p.heading};
      if (!collides(eco.world, body, q.x, q.y) && !reached_target(eco.world, body, {q.x, q.y, q.heading})) {
        return initial_state(eco.world, body, q);
      }
    }
  }
  return initial_state(eco.world, body, starts[static_cast<std::size_t>(slot % n)]);
}

}  // namespace

EcologyLog ecology_run(const EcologyConfig& cfg, const World& world, const RobotBody& body, int generations,
                       std::vector<EcologyBrain> initial) {
  if (cfg.n_robots < 2) throw ConfigError("ecology.n_robots must be >= 2");
  if (cfg.energy_init <= 0.0 || cfg.energy_drain < 0.0 || cfg.energy_gain < 0.0) {
    throw ConfigError("ecology energies must be positive (drain and gain may be 0)");
  }
  if (cfg.steps_per_generation < 1 || cfg.tournament_k < 1) {
    throw ConfigError("ecology.steps_per_generation and ecology.tournament_k must be >= 1");
  }
  if (!initial.empty() && static_cast<int>(initial.size()) != cfg.n_robots) {
    throw ConfigError("ecology initial brains must number n_robots");
  }
  if (world.starts.empty()) throw ConfigError("ecology world has no start poses");

  std::mt19937_64 rng(cfg.seed);
  EcologyWorld eco{world, world.obstacles.size()};
  EcologyLog log;
  std::vector<EcologyAgent>& agents = log.agents;
  std::vector<std::size_t> alive;
  long long next_id = 0;
  const int corners = static_cast<int>(world.starts.size());

  for (int i = 0; i < cfg.n_robots; ++i) {
    EcologyAgent a;
    a.id = next_id++;
    a.brain = initial.empty() ? EcologyBrain(Controller::random(cfg.n_hidden, rng())) : initial[i];
    a.energy = cfg.energy_init;
    a.start_slot = i % corners;
    agents.push_back(std::move(a));
    agents.back().state = spawn(eco, body, agents, alive, agents.size() - 1, agents.back().start_slot);
    alive.push_back(agents.size() - 1);
  }

  int deaths = 0;
  int respawns = 0;
  std::vector<std::size_t> dead_this_generation;
  const int total_steps = generations * cfg.steps_per_generation;
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (int t = 0; t < total_steps; ++t) {
    std::vector<std::size_t> survivors;
    for (std::size_t i : alive) {
      EcologyAgent& a = agents[i];
      eco.place_others(agents, alive, i, body.body_radius);
      const SensorReading reading = sense(eco.world, body, a.state);
      MotorCommand cmd;
      if (auto* c = std::get_if<Controller>(&a.brain)) {
        cmd = c->activate(reading);
      } else {
        cmd = primitive_command(std::get<Primitive>(a.brain), eco.world, body, a.state, reading);
      }
      a.state = step(eco.world, body, a.state, cmd, cfg.step_cfg);
      a.energy -= cfg.energy_drain;
      if (reached_target(eco.world, body, a.state)) {
        a.energy += cfg.energy_gain;
        ++a.targets_reached;
        a.start_slot = (a.start_slot + 1) % corners;
        a.state = spawn(eco, body, agents, alive, i, a.start_slot);
      }
      if (a.energy <= 0.0) {
        a.energy = 0.0;
        a.death_step = t;
        ++deaths;
        dead_this_generation.push_back(i);
      } else {
        survivors.push_back(i);
      }
    }
    alive = std::move(survivors);

    if (alive.empty()) {
      log.census.push_back({t, 0, deaths, respawns});
      log.extinct = true;
      log.extinction_step = t;
      log.steps = t + 1;
      return log;
    }

    if ((t + 1) % cfg.steps_per_generation == 0) {
      for (std::size_t dead : dead_this_generation) {
        std::uniform_int_distribution<std::size_t> pick(0, alive.size() - 1);
        std::size_t w = pick(rng);
        for (int k = 1; k < cfg.tournament_k; ++k) {
          const std::size_t c = pick(rng);
          const double ec = agents[alive[c]].energy;
          const double ew = agents[alive[w]].energy;
          if (ec > ew || (ec == ew && c < w)) w = c;
        }
        const EcologyAgent& parent = agents[alive[w]];
        EcologyAgent child;
        child.id = next_id++;
        child.parent = parent.id;
        child.brain = parent.brain;
        if (auto* c = std::get_if<Controller>(&child.brain)) {
          c->reset();
          for (double& x : c->mutable_weights()) {
            if (unit(rng) < cfg.mutation_rate) x += cfg.mutation_sigma * gauss(rng);
          }
        }
        child.energy = cfg.energy_init;
        child.start_slot = agents[dead].start_slot;
        child.birth_step = t + 1;
        agents.push_back(std::move(child));
        agents.back().state = spawn(eco, body, agents, alive, agents.size() - 1, agents.back().start_slot);
        alive.push_back(agents.size() - 1);
        ++respawns;
      }
      dead_this_generation.clear();
    }
    log.census.push_back({t, static_cast<int>(alive.size()), deaths, respawns});
  }
  log.steps = total_steps;
  return log;
}

void write_ecology_csv(std::ostream& out, const EcologyLog& log) {
  out << "id,parent,brain,birth_step,death_step,targets_reached,energy\n";
  for (const auto& a : log.agents) {
    const std::string brain =
        std::holds_alternative<Controller>(a.brain) ? "controller" : to_string(std::get<Primitive>(a.brain));
    out << a.id << ',' << a.parent << ',' << brain << ',' << a.birth_step << ',' << a.death_step << ','
        << a.targets_reached << ',' << csv::num(a.energy) << '\n';
  }
}

void write_census_csv(std::ostream& out, const EcologyLog& log) {
  out << "step,alive,deaths,respawns\n";
  for (const auto& c : log.census) out << c.step << ',' << c.alive << ',' << c.deaths << ',' << c.respawns << '\n';
}

}  // namespace evobot
