// Serial reference vs OpenMP population evaluation. On a single-core host
// the OpenMP rows only show the threading overhead.

#include <benchmark/benchmark.h>

#include <vector>

#include "evobot/estimation.hpp"
#include "evobot/evolution.hpp"
#include "evobot/parallel.hpp"

namespace evobot {
namespace {

ControllerEvaluation task() {
  ControllerEvaluation ev;
  ev.world = make_world(TerrainKind::kBumpy, 5, 1);
  ev.n_hidden = 4;
  ev.fitness.max_steps = 500;
  return ev;
}

std::vector<std::vector<double>> population(const ControllerEvaluation& ev, int n) {
  std::vector<std::vector<double>> pop;
  for (int i = 0; i < n; ++i) pop.push_back(Controller::random(ev.n_hidden, static_cast<std::uint64_t>(i)).weights());
  return pop;
}

void BM_PopulationSerial(benchmark::State& state) {
  const ControllerEvaluation ev = task();
  const auto pop = population(ev, static_cast<int>(state.range(0)));
  auto eval = [&](const std::vector<double>& g) { return evaluate_controller(g, ev); };
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluate_population_serial(std::span<const std::vector<double>>(pop), eval));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PopulationSerial)->Arg(20)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_PopulationOmp(benchmark::State& state) {
  const ControllerEvaluation ev = task();
  const auto pop = population(ev, static_cast<int>(state.range(0)));
  auto eval = [&](const std::vector<double>& g) { return evaluate_controller(g, ev); };
  const int workers = static_cast<int>(state.range(1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluate_population_omp(std::span<const std::vector<double>>(pop), eval, workers));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PopulationOmp)->ArgsProduct({{20}, {2, 4, 8}})->Unit(benchmark::kMillisecond)->UseRealTime();

// Candidate scoring during estimation: one discrepancy per simulator guess.
void BM_DiscrepancyPopulation(benchmark::State& state) {
  const World world = make_world(TerrainKind::kBumpy, 5, 2);
  std::vector<SensorTrace> traces;
  for (int i = 0; i < 2; ++i) {
    traces.push_back(run_reference(Controller::random(2, static_cast<std::uint64_t>(i)), SimParams{}, world,
                                   RobotBody{}, world.starts[static_cast<std::size_t>(i)], 300));
  }
  std::vector<SimParams> guesses(16);
  for (std::size_t i = 0; i < guesses.size(); ++i) guesses[i].motor_gain_left = 0.5 + 0.05 * static_cast<double>(i);
  auto eval = [&](const SimParams& p) { return discrepancy(traces, p, world, RobotBody{}).value; };
  const int workers = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluate_population(std::span<const SimParams>(guesses), eval, workers));
  }
}
BENCHMARK(BM_DiscrepancyPopulation)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_Step(benchmark::State& state) {
  const World world = make_world(TerrainKind::kBumpy, 5, 3);
  const RobotBody body;
  const StepConfig cfg;
  RobotState s = initial_state(world, body, world.start());
  for (auto _ : state) {
    s = step(world, body, s, {0.6, 0.5}, cfg, Actuation{});
    benchmark::DoNotOptimize(s);
    if (s.contact) s = initial_state(world, body, world.start());
  }
}
BENCHMARK(BM_Step);

void BM_Sense(benchmark::State& state) {
  const World world = make_world(TerrainKind::kFlat, 8, 4);
  const RobotBody body;
  const RobotState s = initial_state(world, body, world.start());
  for (auto _ : state) benchmark::DoNotOptimize(sense(world, body, s));
}
BENCHMARK(BM_Sense);

}  // namespace
}  // namespace evobot

BENCHMARK_MAIN();
