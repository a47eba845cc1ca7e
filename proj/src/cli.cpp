#include "evobot/cli.hpp"

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "evobot/config.hpp"
#include "evobot/csv.hpp"
#include "evobot/genotype.hpp"
#include "evobot/server.hpp"

namespace evobot {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Options {
  std::string config_file;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  bool dump_config = false;
  std::string out_dir = "out";

  std::string genotype_file;
  std::string controller_file;
  std::string failure;
  std::string trace_file;
  std::string checkpoint;
  std::vector<std::string> trace_files;
  bool plot_data = false;
  bool skip_failures = false;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string session_file;
};

void error_line(std::ostream& err, const std::string& kind, const std::string& message) {
  err << json{{"error", kind}, {"message", message}}.dump() << '\n';
}

Config effective_config(const Options& o) {
  Config cfg;
  if (!o.config_file.empty()) {
    std::ifstream in(o.config_file);
    if (!in) throw ConfigError("cannot read config file " + o.config_file);
    read_config(in, cfg);
  }
  for (const std::string& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
  if (o.seed) apply_seed(cfg, *o.seed);
  if (o.workers) cfg.evolution.workers = *o.workers;
  validate(cfg);
  return cfg;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

fs::path prepare_out(const Options& o, const Config& cfg) {
  const fs::path dir(o.out_dir);
  fs::create_directories(dir);
  auto out = open_out(dir / "config.txt");
  write_config(out, cfg);
  return dir;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// case[:index[:severity[:onset]]]
FailureInjection parse_failure(const std::string& spec) {
  const auto parts = csv::split(spec, ':');
  FailureInjection f;
  try {
    f.failure_case = failure_case_from_string(parts[0]);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  try {
    if (parts.size() > 1 && !parts[1].empty()) f.index = std::stoi(parts[1]);
    if (parts.size() > 2 && !parts[2].empty()) f.severity = csv::to_double(parts[2]);
    if (parts.size() > 3 && !parts[3].empty()) f.onset_step = std::stoi(parts[3]);
  } catch (const std::exception&) {
    throw ConfigError("--failure expects case[:index[:severity[:onset]]], got '" + spec + "'");
  }
  if (parts.size() > 4 || f.severity < 0 || f.severity > 1 || f.onset_step < 0) {
    throw ConfigError("--failure expects case[:index[:severity[:onset]]], got '" + spec + "'");
  }
  return f;
}

json result_json(const TrialResult& r) {
  return {{"fitness", r.fitness},
          {"reached", r.reached},
          {"rotations_l", r.rotations_left},
          {"rotations_r", r.rotations_right},
          {"steps", r.steps_used},
          {"sensor_performance", r.sensor_performance},
          {"penalty_steps", r.penalty_steps}};
}

void print_warnings(std::ostream& err, const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) err << json{{"warning", w}}.dump() << '\n';
}

// ---- commands ----

int cmd_parse(const Options& o, std::ostream& out, std::ostream& err) {
  const auto lines = read_genotype_lines(read_file(o.genotype_file));
  int failures = 0;
  for (const GenotypeLine& line : lines) {
    json row{{"line", line.line_number}};
    try {
      const BodyPlan bp = parse(line.genotype);
      row["parts"] = bp.parts.size();
      row["joints"] = bp.joints.size();
      row["neurons"] = bp.neurons.size();
      row["touch"] = bp.count_neurons(NeuronKind::kTouch);
      row["motor"] = bp.count_neurons(NeuronKind::kMotor);
      row["hidden"] = bp.count_neurons(NeuronKind::kHidden);
      row["connections"] = bp.connections.size();
      row["round_trip"] = isomorphic(parse(serialize(bp)), bp);
    } catch (const GenotypeError& e) {
      ++failures;
      row["error"] = e.what();
    }
    out << row.dump() << '\n';
  }
  if (failures > 0) {
    error_line(err, "GenotypeError", std::to_string(failures) + " of " + std::to_string(lines.size()) +
                                         " genotypes failed to parse");
    return kExitRuntime;
  }
  return kExitOk;
}

int cmd_evolve(const Options& o, std::ostream& out, std::ostream& err) {
  const Config cfg = effective_config(o);
  const fs::path dir = prepare_out(o, cfg);
  const ControllerEvaluation ev = build_evaluation(cfg);
  json summary{{"mode", to_string(cfg.evolution.mode)}};

  switch (cfg.evolution.mode) {
    case EvoMode::kStandard: {
      const auto r = evolve_controller(cfg.evolution, ev, o.checkpoint);
      auto log = open_out(dir / "run_log.csv");
      r.log.write_csv(log);
      auto snaps = open_out(dir / "snapshots.jsonl");
      r.log.write_snapshots(snaps);
      auto ctl = open_out(dir / "best_controller.txt");
      save_controller(ctl, decode_controller(r.best.genome, ev));
      print_warnings(err, r.log.warnings);
      summary["best_fitness"] = r.best.fitness.value_or(0.0);
      summary["generations"] = r.log.generations.size();
      break;
    }
    case EvoMode::kCoEvolution: {
      EvoConfig layout_cfg = cfg.evolution;
      layout_cfg.seed = cfg.evolution.seed + 1;
      const auto r = coevolve(cfg.evolution, layout_cfg, ev);
      auto rl = open_out(dir / "robot_log.csv");
      r.robot_log.write_csv(rl);
      auto ll = open_out(dir / "layout_log.csv");
      r.layout_log.write_csv(ll);
      auto ctl = open_out(dir / "best_controller.txt");
      save_controller(ctl, decode_controller(r.best_robot.genome, ev));
      auto layout = open_out(dir / "best_layout.csv");
      layout << "x,y,r\n";
      for (const Obstacle& ob : decode_layout(ev.world, ev.body, r.best_layout.genome).obstacles) {
        layout << csv::num(ob.center.x) << ',' << csv::num(ob.center.y) << ',' << csv::num(ob.radius) << '\n';
      }
      summary["best_robot_fitness"] = r.best_robot.fitness.value_or(0.0);
      summary["best_layout_fitness"] = r.best_layout.fitness.value_or(0.0);
      break;
    }
    case EvoMode::kVirtualEcology: {
      const EcologyLog log = ecology_run(build_ecology(cfg), ev.world, ev.body, cfg.evolution.generations);
      auto agents = open_out(dir / "agents.csv");
      write_ecology_csv(agents, log);
      auto census = open_out(dir / "census.csv");
      write_census_csv(census, log);
      summary["agents"] = log.agents.size();
      summary["extinct"] = log.extinct;
      summary["steps"] = log.steps;
      break;
    }
    case EvoMode::kUserGuided:
      throw ConfigError("user_guided evolution runs under `evobot serve`");
  }
  out << summary.dump() << '\n';
  return kExitOk;
}

Controller load_cli_controller(const Options& o, const Config& cfg) {
  if (!o.controller_file.empty() && !o.genotype_file.empty()) {
    throw ConfigError("give either --controller or --genotype, not both");
  }
  if (!o.genotype_file.empty()) {
    const auto lines = read_genotype_lines(read_file(o.genotype_file));
    if (lines.empty()) throw std::runtime_error("no genotype in " + o.genotype_file);
    return controller_from_bodyplan(parse(lines.front().genotype), cfg.evolution.seed, cfg.fitness.threshold);
  }
  std::istringstream in(read_file(o.controller_file));
  return load_controller(in);
}

int cmd_simulate(const Options& o, std::ostream& out, std::ostream&) {
  const Config cfg = effective_config(o);
  Controller controller = load_cli_controller(o, cfg);
  std::optional<FailureInjection> failure;
  if (!o.failure.empty()) failure = parse_failure(o.failure);
  const fs::path dir = prepare_out(o, cfg);
  const World world = build_world(cfg);

  Controller run_copy = controller;
  run_copy.set_failure(failure);
  const TrialSetup setup = default_setup(world, cfg.fitness);
  const TrialRun run = run_trial(world, cfg.body, run_copy, setup, cfg.evolution.seed, cfg.fitness.clearance_floor);
  auto traj = open_out(dir / "trajectory.csv");
  write_trajectory_csv(traj, run.trajectory);
  out << result_json(score_trial(world, cfg.body, setup.start, run, cfg.fitness)).dump() << '\n';

  if (!o.trace_file.empty()) {
    controller.set_failure(std::nullopt);
    SimParams truth;
    if (failure) truth.failure = *failure;
    const SensorTrace trace =
        run_reference(controller, truth, world, cfg.body, world.start(), cfg.estimation.trace_steps, cfg.fitness.step_cfg);
    auto t = open_out(o.trace_file);
    write_sensor_trace(t, trace);
  }
  return kExitOk;
}

int cmd_diagnose(const Options& o, std::ostream& out, std::ostream& err) {
  Config cfg = effective_config(o);
  std::vector<SensorTrace> traces;
  for (const std::string& path : o.trace_files) {
    std::istringstream in(read_file(path));
    traces.push_back(read_sensor_trace(in));
  }
  for (const SensorTrace& t : traces) {
    if (t.world_seed != traces.front().world_seed) throw TraceError("traces come from different worlds");
  }
  if (cfg.world.seed != traces.front().world_seed) {
    print_warnings(err, {"world seed taken from the traces: " + std::to_string(traces.front().world_seed)});
    cfg.world.seed = traces.front().world_seed;
  }
  const fs::path dir = prepare_out(o, cfg);
  const auto ranking = diagnose(traces, build_world(cfg), cfg.body, build_estimation(cfg));
  auto csv_out = open_out(dir / "diagnosis.csv");
  write_diagnosis_csv(csv_out, ranking);
  write_diagnosis_text(out, ranking);
  return kExitOk;
}

int cmd_experiment(const Options& o, std::ostream& out, std::ostream&) {
  const Config cfg = effective_config(o);
  const fs::path dir = prepare_out(o, cfg);
  const ExperimentPlan plan = build_plan(cfg);
  Report report = run_matrix(plan);
  if (!o.skip_failures) {
    report.failures = run_failure_distribution(plan, cfg.experiment.failures_per_case, &report.baseline_failures);
  }
  json written = json::array();
  for (const auto& p : export_report(report, dir, o.plot_data)) written.push_back(p.filename().string());
  out << json{{"cells", report.cells.size()}, {"files", written}}.dump() << '\n';
  return kExitOk;
}

SessionServer* g_server = nullptr;

extern "C" void on_signal(int) {
  if (g_server) g_server->stop();
}

int cmd_serve(const Options& o, std::ostream& out, std::ostream&) {
  const Config cfg = effective_config(o);
  prepare_out(o, cfg);
  UserGuidedSession session(build_session(cfg));
  if (!o.session_file.empty() && fs::exists(o.session_file)) {
    std::ifstream in(o.session_file);
    session.load(in);
  }
  SessionServer server(session, session.config().eval.world);
  const int port = server.bind(o.host, o.port);
  session.start();
  out << json{{"listening", "http://" + o.host + ":" + std::to_string(port)}}.dump() << std::endl;
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.listen();
  g_server = nullptr;
  session.stop();
  if (!o.session_file.empty()) {
    std::ofstream save(o.session_file);
    session.save(save);
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Evolutionary robotics simulator", "evobot"};
  app.require_subcommand(0, 1);
  app.fallthrough();
  app.add_option("-c,--config", o.config_file, "config file (section.key = value lines)");
  app.add_option("--set", o.sets, "override one setting, key=value; repeatable");
  app.add_option("--seed", o.seed, "seed for evolution and world generation");
  app.add_option("--workers", o.workers, "evaluation worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--dump-config", o.dump_config, "print the effective config and exit");
  app.add_option("-o,--out", o.out_dir, "output directory");

  auto* parse_cmd = app.add_subcommand("parse", "validate genotype strings and print their statistics");
  parse_cmd->add_option("file", o.genotype_file, "genotype file, one per line")->required();

  auto* evolve_cmd = app.add_subcommand("evolve", "standard, co-evolution or ecology run (evolution.mode)");
  evolve_cmd->add_option("--checkpoint", o.checkpoint, "checkpoint file; resumed if it exists");

  auto* sim_cmd = app.add_subcommand("simulate", "run one trial and write its trajectory");
  sim_cmd->add_option("--controller", o.controller_file, "controller file");
  sim_cmd->add_option("--genotype", o.genotype_file, "genotype file; the first genotype builds the controller");
  sim_cmd->add_option("--failure", o.failure, "inject case[:index[:severity[:onset]]]");
  sim_cmd->add_option("--trace", o.trace_file, "also write a sensor trace for diagnosis");

  auto* diag_cmd = app.add_subcommand("diagnose", "rank failure hypotheses for observed sensor traces");
  diag_cmd->add_option("traces", o.trace_files, "sensor trace files")->required();

  auto* exp_cmd = app.add_subcommand("experiment", "environment matrix and failure distribution");
  exp_cmd->add_option("--plan", o.config_file, "plan file (same format as --config)");
  exp_cmd->add_flag("--plot-data", o.plot_data, "also write curves_long.csv");
  exp_cmd->add_flag("--no-failures", o.skip_failures, "skip the failure distribution");

  auto* serve_cmd = app.add_subcommand("serve", "user-guided evolution session server");
  serve_cmd->add_option("--host", o.host, "bind address");
  serve_cmd->add_option("--port", o.port, "port, 0 picks a free one")->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--session", o.session_file, "session file, loaded at start and saved on exit");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    error_line(err, "UsageError", e.what());
    return kExitUsage;
  }

  try {
    if (o.dump_config) {
      write_config(out, effective_config(o));
      return kExitOk;
    }
    if (parse_cmd->parsed()) return cmd_parse(o, out, err);
    if (evolve_cmd->parsed()) return cmd_evolve(o, out, err);
    if (sim_cmd->parsed()) {
      if (o.controller_file.empty() && o.genotype_file.empty()) {
        error_line(err, "UsageError", "simulate needs --controller or --genotype");
        return kExitUsage;
      }
      return cmd_simulate(o, out, err);
    }
    if (diag_cmd->parsed()) return cmd_diagnose(o, out, err);
    if (exp_cmd->parsed()) return cmd_experiment(o, out, err);
    if (serve_cmd->parsed()) return cmd_serve(o, out, err);
    error_line(err, "UsageError", "no command given; see --help");
    return kExitUsage;
  } catch (const ConfigError& e) {
    error_line(err, "ConfigError", e.what());
    return kExitConfig;
  } catch (const TraceError& e) {
    error_line(err, "TraceError", e.what());
    return kExitRuntime;
  } catch (const GenotypeError& e) {
    error_line(err, "GenotypeError", e.what());
    return kExitRuntime;
  } catch (const std::exception& e) {
    error_line(err, "RuntimeError", e.what());
    return kExitRuntime;
  }
}

}  // namespace evobot
