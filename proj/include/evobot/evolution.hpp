#pragma once

// Generational genetic algorithm plus the co-evolution, virtual-ecology and
// lifetime-learning regimes built on it. Randomness lives only in the
// breeding step on the calling thread; evaluations are pure and may run on
// any number of workers without changing a single logged value.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "evobot/controller.hpp"
#include "evobot/fitness.hpp"
#include "evobot/genotype.hpp"
#include "evobot/parallel.hpp"
#include "evobot/world.hpp"

namespace evobot {

enum class EvoMode { kStandard, kCoEvolution, kVirtualEcology, kUserGuided };

const char* to_string(EvoMode m);
EvoMode evo_mode_from_string(const std::string& s);

struct EvoConfig {
  int pop_size = 20;
  int generations = 50;
  int tournament_k = 3;
  int elitism_count = 1;
  double mutation_sigma = 0.3;
  double mutation_rate = 0.2;  // per-gene probability for weight genomes
  MutationRates genotype_rates;
  double crossover_prob = 0.5;
  std::uint64_t seed = 1;
  EvoMode mode = EvoMode::kStandard;
  bool lifetime_learning = false;
  int workers = 1;
  int stagnation_generations = 25;

  // Throws ConfigError.
  void validate() const;
};

struct GenerationStats {
  int generation = 0;
  double best = 0.0;
  double mean = 0.0;
  double min = 0.0;
  long long evaluations = 0;  // cumulative
  long long best_id = 0;
  bool operator==(const GenerationStats&) const = default;
};

struct RunLog {
  std::vector<GenerationStats> generations;
  std::vector<std::string> snapshots;  // one JSON record per generation
  std::vector<std::string> warnings;

  // generation,best,mean,min,evaluations,best_id
  void write_csv(std::ostream& out) const;
  void write_snapshots(std::ostream& out) const;
  bool operator==(const RunLog&) const = default;
};

template <class Genome>
struct Individual {
  Genome genome;
  std::optional<double> fitness;
  long long id = 0;
  long long parent_a = -1;
  long long parent_b = -1;
};

// Real-valued genome with Gaussian mutation and uniform crossover. Genes are
// reflected back into [lo, hi] when bounds are given; `scale` multiplies
// sigma per gene.
struct WeightVectorOps {
  using Genome = std::vector<double>;

  std::size_t dimension = 0;
  double init_range = 1.0;
  double sigma = 0.3;
  double rate = 0.2;
  std::vector<double> lo;
  std::vector<double> hi;
  std::vector<double> scale;

  Genome random(std::mt19937_64& rng) const;
  Genome mutate(const Genome& g, std::mt19937_64& rng) const;
  Genome crossover(const Genome& a, const Genome& b, std::mt19937_64& rng) const;
  nlohmann::json to_json(const Genome& g) const { return g; }
  Genome from_json(const nlohmann::json& j) const { return j.get<Genome>(); }
};

// Stick genotypes evolved with the grammar-closed operators.
struct GenotypeOps {
  using Genome = Genotype;

  Genotype origin{std::string(kKheperaGenotype)};
  MutationRates rates;
  int initial_mutations = 3;

  Genome random(std::mt19937_64& rng) const;
  Genome mutate(const Genome& g, std::mt19937_64& rng) const { return evobot::mutate(g, rates, rng()); }
  Genome crossover(const Genome& a, const Genome& b, std::mt19937_64& rng) const {
    return evobot::crossover(a, b, rng());
  }
  nlohmann::json to_json(const Genome& g) const { return g.text; }
  Genome from_json(const nlohmann::json& j) const { return {j.get<std::string>()}; }
};

std::string rng_state(const std::mt19937_64& rng);
void set_rng_state(std::mt19937_64& rng, const std::string& state);

template <class Ops>
class GeneticAlgorithm {
 public:
  using Genome = typename Ops::Genome;
  using Evaluator = std::function<double(const Genome&)>;

  GeneticAlgorithm(EvoConfig cfg, Ops ops) : cfg_(std::move(cfg)), ops_(std::move(ops)), rng_(cfg_.seed) {
    cfg_.validate();
  }

  // Generation 0: `seeds` first (truncated to pop_size), random genomes after.
  void initialize(const std::vector<Genome>& seeds = {}) {
    population_.clear();
    generation_ = 0;
    for (int i = 0; i < cfg_.pop_size; ++i) {
      Individual<Genome> ind;
      ind.genome = i < static_cast<int>(seeds.size()) ? seeds[i] : ops_.random(rng_);
      ind.id = next_id_++;
      population_.push_back(std::move(ind));
    }
  }

  // Scores every individual without a fitness (all of them when
  // `reevaluate_all`) and appends this generation's stats to the log.
  void evaluate(const Evaluator& eval, bool reevaluate_all = false) {
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < population_.size(); ++i) {
      if (reevaluate_all || !population_[i].fitness) todo.push_back(i);
    }
    std::vector<Genome> genomes;
    genomes.reserve(todo.size());
    for (std::size_t i : todo) genomes.push_back(population_[i].genome);
    const std::vector<double> scores =
        evaluate_population(std::span<const Genome>(genomes), eval, cfg_.workers);
    for (std::size_t k = 0; k < todo.size(); ++k) population_[todo[k]].fitness = scores[k];
    evaluations_ += static_cast<long long>(todo.size());
    record();
  }

  // Fitness computed elsewhere, one value per individual in population order.
  void set_fitness(const std::vector<double>& fitness, long long evaluations) {
    for (std::size_t i = 0; i < population_.size(); ++i) population_[i].fitness = fitness.at(i);
    evaluations_ += evaluations;
    record();
  }

  // Breeds the next generation from the evaluated one.
  void advance() {
    const std::vector<std::size_t> order = ranking();
    std::vector<Individual<Genome>> next;
    next.reserve(population_.size());
    const int elites = std::min(cfg_.elitism_count, cfg_.pop_size);
    for (int e = 0; e < elites; ++e) next.push_back(population_[order[e]]);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    while (static_cast<int>(next.size()) < cfg_.pop_size) {
      const auto& pa = population_[tournament()];
      Individual<Genome> child;
      child.parent_a = pa.id;
      if (unit(rng_) < cfg_.crossover_prob) {
        const auto& pb = population_[tournament()];
        child.parent_b = pb.id;
        child.genome = ops_.crossover(pa.genome, pb.genome, rng_);
      } else {
        child.genome = pa.genome;
      }
      child.genome = ops_.mutate(child.genome, rng_);
      child.id = next_id_++;
      next.push_back(std::move(child));
    }
    population_ = std::move(next);
    ++generation_;
  }

  const std::vector<Individual<Genome>>& population() const { return population_; }
  std::vector<Individual<Genome>>& mutable_population() { return population_; }
  const Individual<Genome>& best() const { return population_[ranking().front()]; }
  const RunLog& log() const { return log_; }
  RunLog& mutable_log() { return log_; }
  int generation() const { return generation_; }
  const EvoConfig& config() const { return cfg_; }
  const Ops& ops() const { return ops_; }
  std::mt19937_64& rng() { return rng_; }
  long long take_id() { return next_id_++; }
  // Installs an externally bred population as the next generation.
  void replace_population(std::vector<Individual<Genome>> next) {
    population_ = std::move(next);
    ++generation_;
  }

  // Indices sorted by fitness, best first; ties keep population order.
  std::vector<std::size_t> ranking() const {
    std::vector<std::size_t> idx(population_.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [this](std::size_t a, std::size_t b) {
      return population_[a].fitness.value_or(-INFINITY) > population_[b].fitness.value_or(-INFINITY);
    });
    return idx;
  }

  nlohmann::json checkpoint() const {
    nlohmann::json j;
    j["generation"] = generation_;
    j["next_id"] = next_id_;
    j["evaluations"] = evaluations_;
    j["rng"] = rng_state(rng_);
    j["stagnant_for"] = stagnant_for_;
    j["best_so_far"] = best_so_far_;
    for (const auto& ind : population_) {
      nlohmann::json p;
      p["id"] = ind.id;
      p["parent_a"] = ind.parent_a;
      p["parent_b"] = ind.parent_b;
      p["genome"] = ops_.to_json(ind.genome);
      if (ind.fitness) p["fitness"] = *ind.fitness;
      j["population"].push_back(p);
    }
    for (const auto& g : log_.generations) {
      j["log"].push_back({g.generation, g.best, g.mean, g.min, g.evaluations, g.best_id});
    }
    j["snapshots"] = log_.snapshots;
    j["warnings"] = log_.warnings;
    return j;
  }

  void restore(const nlohmann::json& j) {
    generation_ = j.at("generation").get<int>();
    next_id_ = j.at("next_id").get<long long>();
    evaluations_ = j.at("evaluations").get<long long>();
    set_rng_state(rng_, j.at("rng").get<std::string>());
    stagnant_for_ = j.at("stagnant_for").get<int>();
    best_so_far_ = j.at("best_so_far").get<double>();
    population_.clear();
    for (const auto& p : j.at("population")) {
      Individual<Genome> ind;
      ind.id = p.at("id").get<long long>();
      ind.parent_a = p.at("parent_a").get<long long>();
      ind.parent_b = p.at("parent_b").get<long long>();
      ind.genome = ops_.from_json(p.at("genome"));
      if (p.contains("fitness")) ind.fitness = p.at("fitness").get<double>();
      population_.push_back(std::move(ind));
    }
    log_ = {};
    if (j.contains("log")) {
      for (const auto& r : j.at("log")) {
        log_.generations.push_back({r[0].get<int>(), r[1].get<double>(), r[2].get<double>(), r[3].get<double>(),
                                    r[4].get<long long>(), r[5].get<long long>()});
      }
    }
    log_.snapshots = j.at("snapshots").get<std::vector<std::string>>();
    log_.warnings = j.at("warnings").get<std::vector<std::string>>();
  }

 private:
  std::size_t tournament() {
    std::uniform_int_distribution<std::size_t> pick(0, population_.size() - 1);
    std::size_t best = pick(rng_);
    for (int k = 1; k < cfg_.tournament_k; ++k) {
      const std::size_t c = pick(rng_);
      const double fc = population_[c].fitness.value_or(-INFINITY);
      const double fb = population_[best].fitness.value_or(-INFINITY);
      if (fc > fb || (fc == fb && c < best)) best = c;
    }
    return best;
  }

  void record() {
    GenerationStats s;
    s.generation = generation_;
    s.evaluations = evaluations_;
    double sum = 0.0;
    s.best = -INFINITY;
    s.min = INFINITY;
    for (const auto& ind : population_) {
      const double f = *ind.fitness;
      sum += f;
      if (f > s.best) {
        s.best = f;
        s.best_id = ind.id;
      }
      s.min = std::min(s.min, f);
    }
    s.mean = sum / static_cast<double>(population_.size());
    // Re-evaluation within one generation replaces that generation's row.
    if (!log_.generations.empty() && log_.generations.back().generation == generation_) {
      log_.generations.pop_back();
      log_.snapshots.pop_back();
    }
    log_.generations.push_back(s);
    nlohmann::json snap;
    snap["generation"] = s.generation;
    snap["best_id"] = s.best_id;
    snap["fitness"] = s.best;
    snap["genome"] = ops_.to_json(best().genome);
    log_.snapshots.push_back(snap.dump());

    if (s.best > best_so_far_) {
      best_so_far_ = s.best;
      stagnant_for_ = 0;
    } else if (++stagnant_for_ == cfg_.stagnation_generations) {
      log_.warnings.push_back("StagnationWarning: best fitness flat for " +
                              std::to_string(cfg_.stagnation_generations) + " generations at generation " +
                              std::to_string(generation_));
    }
  }

  EvoConfig cfg_;
  Ops ops_;
  std::mt19937_64 rng_;
  std::vector<Individual<Genome>> population_;
  RunLog log_;
  int generation_ = 0;
  long long next_id_ = 0;
  long long evaluations_ = 0;
  double best_so_far_ = -INFINITY;
  int stagnant_for_ = 0;
};

template <class Genome>
struct EvolutionResult {
  Individual<Genome> best;
  RunLog log;
};

// Full generational run: gen 0 plus cfg.generations breeding steps. With a
// `resume_path`, state is checkpointed there after every generation and an
// existing checkpoint is continued instead of starting over.
template <class Ops>
EvolutionResult<typename Ops::Genome> evolve(const EvoConfig& cfg, const Ops& ops,
                                             const std::function<double(const typename Ops::Genome&)>& eval,
                                             const std::vector<typename Ops::Genome>& seeds = {},
                                             const std::string& resume_path = {}) {
  GeneticAlgorithm<Ops> ga(cfg, ops);
  bool resumed = false;
  if (!resume_path.empty()) {
    std::ifstream in(resume_path);
    if (in) {
      ga.restore(nlohmann::json::parse(in));
      resumed = true;
    }
  }
  auto save = [&] {
    if (resume_path.empty()) return;
    std::ofstream out(resume_path);
    out << ga.checkpoint().dump();
  };
  if (!resumed) {
    ga.initialize(seeds);
    ga.evaluate(eval);
    save();
  }
  while (ga.generation() < cfg.generations) {
    ga.advance();
    ga.evaluate(eval);
    save();
  }
  return {ga.best(), ga.log()};
}

// ---- controller genomes ----

// Genome for a fixed topology: one weight per edge.
WeightVectorOps controller_ops(int n_hidden, const EvoConfig& cfg);

struct ControllerEvaluation {
  World world;
  RobotBody body;
  FitnessConfig fitness;
  int n_hidden = 0;
  PlasticityConfig plasticity;  // used when lifetime learning is on
  std::vector<Pose> starts;     // empty: world.start()
  Actuation actuation;
  SensorModel sensors;
  std::optional<FailureInjection> failure;
  bool lifetime_learning = false;
  std::uint64_t seed = 0;
};

Controller decode_controller(const std::vector<double>& genome, const ControllerEvaluation& ev);

// Mean trial fitness over the evaluation starts; start i uses seed + i.
double evaluate_controller(const std::vector<double>& genome, const ControllerEvaluation& ev);

// Lifetime learning follows cfg.lifetime_learning.
EvolutionResult<std::vector<double>> evolve_controller(const EvoConfig& cfg, const ControllerEvaluation& ev,
                                                       const std::string& resume_path = {});

// ---- co-evolution: controllers against obstacle layouts ----

inline constexpr int kLayoutSlots = 6;
inline constexpr int kLayoutGenes = 4;  // x, y, radius, active; all in [0, 1]

WeightVectorOps layout_ops(const EvoConfig& cfg);

// Applies a layout genome to `base`: active slots become obstacles unless
// they would overlap a start pose, the target or an earlier obstacle.
World decode_layout(const World& base, const RobotBody& body, const std::vector<double>& genome);
std::vector<double> empty_layout();

struct CrossEvaluation {
  double robot = 0.0;
  double layout = 0.0;  // always 1 - robot
};

CrossEvaluation cross_evaluate(const std::vector<double>& robot, const std::vector<double>& layout,
                               const ControllerEvaluation& ev);

struct CoevolutionResult {
  Individual<std::vector<double>> best_robot;
  Individual<std::vector<double>> best_layout;
  RunLog robot_log;
  RunLog layout_log;
};

// Alternating generations: robots scored against the current best layout,
// then layouts scored against the current best robot. A `frozen_layout`
// disables the layout population.
CoevolutionResult coevolve(const EvoConfig& robot_cfg, const EvoConfig& layout_cfg, const ControllerEvaluation& ev,
                           const std::optional<std::vector<double>>& frozen_layout = std::nullopt);

// ---- virtual ecology ----

struct EcologyConfig {
  int n_robots = 8;
  double energy_init = 100.0;
  double energy_drain = 1.0;
  double energy_gain = 60.0;
  int steps_per_generation = 300;
  int tournament_k = 2;
  double mutation_sigma = 0.3;
  double mutation_rate = 0.2;
  int n_hidden = 0;
  std::uint64_t seed = 1;
  StepConfig step_cfg;
};

// An ecology agent is driven by an evolved controller or by a fixed primitive.
using EcologyBrain = std::variant<Controller, Primitive>;

struct EcologyAgent {
  long long id = 0;
  long long parent = -1;
  EcologyBrain brain;
  double energy = 0.0;
  RobotState state;
  int start_slot = 0;
  int birth_step = 0;
  int death_step = -1;
  int targets_reached = 0;
};

struct EcologyCensus {
  int step = 0;
  int alive = 0;
  int deaths = 0;    // cumulative
  int respawns = 0;  // cumulative
};

struct EcologyLog {
  std::vector<EcologyAgent> agents;  // every agent that ever lived, by id
  std::vector<EcologyCensus> census;  // one row per step
  bool extinct = false;
  int extinction_step = -1;
  int steps = 0;
};

// All robots share one world and see each other as obstacles. Every step
// drains energy, reaching the target pays energy_gain and relocates the
// robot to its next start corner, and robots at zero energy die. At each
// generation boundary the dead are replaced by mutated copies of tournament
// winners among the living.
EcologyLog ecology_run(const EcologyConfig& cfg, const World& world, const RobotBody& body, int generations,
                       std::vector<EcologyBrain> initial = {});

// id,parent,brain,birth_step,death_step,targets_reached,energy
void write_ecology_csv(std::ostream& out, const EcologyLog& log);
// step,alive,deaths,respawns
void write_census_csv(std::ostream& out, const EcologyLog& log);

}  // namespace evobot
