#include "evobot/experiments.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "evobot/csv.hpp"
#include "gtest/gtest.h"

namespace evobot {
namespace {

ExperimentPlan small_plan() {
  ExperimentPlan plan;
  plan.seeds = {1, 2};
  plan.trials_per_env = 4;
  plan.fitness.max_steps = 200;
  plan.evo.pop_size = 6;
  plan.evo.generations = 3;
  return plan;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("evobot_experiments_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

TEST(Environment, NamesRoundTrip) {
  for (const Environment& e : default_environments()) EXPECT_EQ(environment_from_string(e.name()), e);
  EXPECT_EQ(default_environments().size(), 6u);
  EXPECT_THROW(environment_from_string("flat"), ConfigError);
  EXPECT_THROW(environment_from_string("flat/some"), ConfigError);
  EXPECT_THROW(environment_from_string("icy/obs"), ConfigError);
}

TEST(ExperimentPlan, Validation) {
  ExperimentPlan plan = small_plan();
  EXPECT_NO_THROW(plan.validate());
  plan.trials_per_env = 0;
  EXPECT_THROW(plan.validate(), ConfigError);
  plan = small_plan();
  plan.seeds.clear();
  EXPECT_THROW(plan.validate(), ConfigError);
  plan = small_plan();
  plan.evo.pop_size = 1;
  EXPECT_THROW(plan.validate(), ConfigError);
}

TEST(RunMatrix, RepeatedEnvironmentGivesIdenticalRows) {
  ExperimentPlan plan = small_plan();
  plan.environments = {{TerrainKind::kBumpy, true}, {TerrainKind::kBumpy, true}};
  const Report r = run_matrix(plan);
  ASSERT_EQ(r.cells.size(), 4u);
  EXPECT_EQ(r.cells[0].trials.size(), 4u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(r.cells[i].log, r.cells[i + 2].log);
    for (std::size_t t = 0; t < r.cells[i].trials.size(); ++t) {
      EXPECT_EQ(r.cells[i].trials[t].result, r.cells[i + 2].trials[t].result);
    }
  }
  ASSERT_EQ(r.table.size(), 2u);
  EXPECT_EQ(r.table[0].mean_fitness, r.table[1].mean_fitness);
}

TEST(RunMatrix, SixCellSmokeRun) {
  const Report r = run_matrix(small_plan());
  ASSERT_EQ(r.table.size(), 6u);
  for (const TableRow& row : r.table) {
    EXPECT_EQ(row.seeds, 2);
    EXPECT_EQ(row.trials, 8);
    EXPECT_GE(row.max_fitness, row.mean_fitness);
    EXPECT_GE(row.mean_sensor_performance, 0.0);
    EXPECT_LE(row.mean_sensor_performance, 1.0);
  }
}

TEST(RunMatrix, TrialsCycleCorners) {
  const Report r = run_matrix(small_plan());
  for (std::size_t t = 0; t < r.cells[0].trials.size(); ++t) EXPECT_EQ(r.cells[0].trials[t].corner, static_cast<int>(t % 4));
}

TEST(RunMatrix, WorkerCountDoesNotChangeResults) {
  ExperimentPlan plan = small_plan();
  plan.environments = {{TerrainKind::kFlat, true}, {TerrainKind::kCombined, false}};
  const Report a = run_matrix(plan);
  plan.workers = 3;
  const Report b = run_matrix(plan);
  ASSERT_EQ(a.cells.size(), b.cells.size());
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    EXPECT_EQ(a.cells[i].log, b.cells[i].log);
    EXPECT_EQ(a.cells[i].best_fitness, b.cells[i].best_fitness);
  }
}

// Table means recomputed from the exported per-trial rows.
TEST(Export, TableMeansMatchTrialRows) {
  Report r = run_matrix(small_plan());
  const auto dir = scratch("means");
  export_report(r, dir);

  std::map<std::string, std::vector<std::vector<std::string>>> by_env;
  std::istringstream trials(slurp(dir / "trials.csv"));
  std::string line;
  std::getline(trials, line);
  while (std::getline(trials, line)) {
    const auto f = csv::split(line);
    by_env[f[1]].push_back(f);
  }
  std::istringstream table(slurp(dir / "table.csv"));
  std::getline(table, line);
  int rows = 0;
  while (std::getline(table, line)) {
    const auto f = csv::split(line);
    const auto& t = by_env.at(f[0]);
    ASSERT_EQ(static_cast<std::size_t>(std::stoi(f[2])), t.size());
    auto mean_of = [&](int col) {
      double s = 0;
      for (const auto& row : t) s += csv::to_double(row[static_cast<std::size_t>(col)]);
      return s / static_cast<double>(t.size());
    };
    EXPECT_NEAR(csv::to_double(f[4]), mean_of(4), 1e-12) << f[0];
    EXPECT_NEAR(csv::to_double(f[6]), mean_of(5), 1e-12) << f[0];
    EXPECT_NEAR(csv::to_double(f[7]), mean_of(6), 1e-12) << f[0];
    EXPECT_NEAR(csv::to_double(f[8]), mean_of(8), 1e-12) << f[0];
    EXPECT_NEAR(csv::to_double(f[9]), mean_of(7), 1e-12) << f[0];
    ++rows;
  }
  EXPECT_EQ(rows, 6);
}

TEST(Export, RerunsAreByteIdentical) {
  ExperimentPlan plan = small_plan();
  plan.environments = {{TerrainKind::kBumpy, false}, {TerrainKind::kFlat, true}};
  Report a = run_matrix(plan);
  a.failures = run_failure_distribution(plan, 3, &a.baseline_failures);
  Report b = run_matrix(plan);
  b.failures = run_failure_distribution(plan, 3, &b.baseline_failures);
  const auto da = scratch("rerun_a");
  const auto db = scratch("rerun_b");
  const auto files = export_report(a, da, true);
  export_report(b, db, true);
  ASSERT_EQ(files.size(), 5u);
  for (const auto& f : files) {
    const std::string content = slurp(f);
    EXPECT_FALSE(content.empty()) << f;
    EXPECT_EQ(content, slurp(db / f.filename())) << f.filename();
  }
}

TEST(Export, CurvesHaveOneColumnPerEnvironment) {
  ExperimentPlan plan = small_plan();
  plan.environments = {{TerrainKind::kFlat, false}, {TerrainKind::kBumpy, true}};
  const auto dir = scratch("curves");
  export_report(run_matrix(plan), dir);
  std::istringstream curves(slurp(dir / "curves.csv"));
  std::string line;
  std::getline(curves, line);
  EXPECT_EQ(line, "generation,evaluations,flat/no_obs,bumpy/obs");
  int gens = 0;
  while (std::getline(curves, line)) ++gens;
  EXPECT_EQ(gens, plan.evo.generations + 1);
}

TEST(FailureDistribution, AccountingAndBaseline) {
  ExperimentPlan plan = small_plan();
  int baseline = -1;
  const auto rows = run_failure_distribution(plan, 6, &baseline);
  ASSERT_EQ(rows.size(), 9u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].failure_case, kAllFailureCases[i]);
    EXPECT_EQ(rows[i].trials, 6);
    EXPECT_GE(rows[i].task_failures, 0);
    EXPECT_LE(rows[i].task_failures, 6);
  }
  EXPECT_EQ(rows.back().failure_case, FailureCase::kNothingFail);
  EXPECT_EQ(rows.back().task_failures, baseline);
  EXPECT_THROW(run_failure_distribution(plan, 0), ConfigError);
}

// The empty flat world is symmetric about each corner's diagonal, which
// swaps the wheels; with corners cycled the two damage rows should agree
// within binomial noise.
TEST(FailureDistribution, WheelDamageRowsAreSymmetric) {
  ExperimentPlan plan = small_plan();
  plan.failure_env = {TerrainKind::kFlat, false};
  plan.evo.generations = 10;
  plan.fitness.max_steps = 600;
  const int n = 40;
  const auto rows = run_failure_distribution(plan, n);
  const int left = rows[1].task_failures;
  const int right = rows[2].task_failures;
  ASSERT_EQ(rows[1].failure_case, FailureCase::kLeftWheelDamage);
  const double p = (left + right) / (2.0 * n);
  const double sd = std::sqrt(2.0 * n * p * (1 - p));
  EXPECT_LE(std::abs(left - right), 3 * sd + 1) << left << " vs " << right;
}

}  // namespace
}  // namespace evobot
