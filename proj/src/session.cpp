#include "evobot/session.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <istream>
#include <ostream>

namespace evobot {

const char* to_string(SessionStatus s) {
  switch (s) {
    case SessionStatus::kEvaluating: return "evaluating";
    case SessionStatus::kAwaitingSelection: return "awaiting_selection";
    case SessionStatus::kPaused: return "paused";
  }
  return "paused";
}

std::vector<Vec2> downsample(const Trajectory& trace, const RobotState& final_state, std::size_t max_points) {
  std::vector<Vec2> all;
  all.reserve(trace.size() + 1);
  for (const auto& s : trace) all.push_back({s.state.x, s.state.y});
  all.push_back({final_state.x, final_state.y});
  if (all.size() <= max_points || max_points < 2) return all;
  std::vector<Vec2> out;
  out.reserve(max_points);
  const double stride = static_cast<double>(all.size() - 1) / static_cast<double>(max_points - 1);
  for (std::size_t i = 0; i < max_points; ++i) {
    out.push_back(all[static_cast<std::size_t>(std::llround(static_cast<double>(i) * stride))]);
  }
  return out;
}

UserGuidedSession::UserGuidedSession(SessionConfig cfg)
    : cfg_(std::move(cfg)), ga_(cfg_.evo, controller_ops(cfg_.eval.n_hidden, cfg_.evo)) {
  cfg_.eval.lifetime_learning = cfg_.evo.lifetime_learning;
}

UserGuidedSession::~UserGuidedSession() { stop(); }

void UserGuidedSession::start() {
  std::lock_guard lk(mu_);
  if (started_) return;
  if (!initialized_) {
    ga_.initialize();
    initialized_ = true;
  }
  pending_evaluation_ = true;
  status_ = SessionStatus::kEvaluating;
  stopping_ = false;
  started_ = true;
  worker_ = std::thread([this] { worker_loop(); });
}

void UserGuidedSession::stop() {
  {
    std::lock_guard lk(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  if (worker_.joinable()) worker_.join();
  std::lock_guard lk(mu_);
  started_ = false;
}

SessionStatus UserGuidedSession::status() const {
  std::lock_guard lk(mu_);
  return status_;
}

int UserGuidedSession::generation() const {
  std::lock_guard lk(mu_);
  return ga_.generation();
}

std::vector<CandidateSummary> UserGuidedSession::candidates() const {
  std::lock_guard lk(mu_);
  return summaries_;
}

void UserGuidedSession::push_event(const std::string& type, nlohmann::json data) {
  events_.push_back({next_seq_++, type, std::move(data)});
  cv_.notify_all();
}

void UserGuidedSession::worker_loop() {
  std::unique_lock lk(mu_);
  while (true) {
    auto wake = [this] { return stopping_ || pending_evaluation_; };
    if (status_ == SessionStatus::kAwaitingSelection) {
      cv_.wait_until(lk, awaiting_since_ + cfg_.selection_timeout, wake);
    } else {
      cv_.wait(lk, wake);
    }
    if (stopping_) return;
    if (pending_evaluation_) {
      pending_evaluation_ = false;
      lk.unlock();
      evaluate_current();
      lk.lock();
      continue;
    }
    if (status_ == SessionStatus::kAwaitingSelection &&
        std::chrono::steady_clock::now() >= awaiting_since_ + cfg_.selection_timeout) {
      status_ = SessionStatus::kPaused;
      push_event("selection_timeout", {{"generation", ga_.generation()}});
      push_event("session_paused", {{"generation", ga_.generation()}});
    }
  }
}

void UserGuidedSession::evaluate_current() {
  std::vector<std::vector<double>> genomes;
  std::vector<Individual<std::vector<double>>> members;
  int gen = 0;
  {
    std::lock_guard lk(mu_);
    members = ga_.population();
    gen = ga_.generation();
  }
  for (const auto& m : members) genomes.push_back(m.genome);

  const ControllerEvaluation& ev = cfg_.eval;
  const Pose start = ev.starts.empty() ? ev.world.start() : ev.starts.front();
  std::vector<CandidateSummary> summaries(genomes.size());
  std::atomic<int> done{0};
  const int total = static_cast<int>(genomes.size());
  parallel_for_index(genomes.size(), cfg_.evo.workers, [&](std::size_t i) {
    Controller c = decode_controller(genomes[i], ev);
    TrialSetup setup;
    setup.start = start;
    setup.actuation = ev.actuation;
    setup.sensors = ev.sensors;
    setup.max_steps = ev.fitness.max_steps;
    setup.step_cfg = ev.fitness.step_cfg;
    const TrialRun run = run_trial(ev.world, ev.body, c, setup, ev.seed, ev.fitness.clearance_floor);
    CandidateSummary& s = summaries[i];
    s.id = members[i].id;
    s.parent_a = members[i].parent_a;
    s.parent_b = members[i].parent_b;
    s.result = score_trial(ev.world, ev.body, start, run, ev.fitness);
    s.result.sensor_performance = sensor_performance(run.trajectory, ev.world, ev.body);
    s.trajectory = downsample(run.trajectory, run.final_state, kMaxPolylinePoints);
    const int d = ++done;
    std::lock_guard lk(mu_);
    push_event("evaluation_progress", {{"generation", gen}, {"done", d}, {"total", total}});
  });

  std::vector<double> fitness;
  for (const auto& s : summaries) fitness.push_back(s.result.fitness);

  std::lock_guard lk(mu_);
  ga_.set_fitness(fitness, static_cast<long long>(fitness.size()));
  summaries_ = std::move(summaries);
  const GenerationStats& st = ga_.log().generations.back();
  nlohmann::json row = {{"generation", gen}, {"best", st.best}, {"mean", st.mean}, {"min", st.min}};
  for (const auto& s : summaries_) {
    row["members"].push_back({{"id", s.id}, {"parent_a", s.parent_a}, {"parent_b", s.parent_b}});
  }
  if (!history_.empty() && history_.back().at("generation").get<int>() == gen) history_.erase(history_.size() - 1);
  history_.push_back(std::move(row));
  status_ = SessionStatus::kAwaitingSelection;
  awaiting_since_ = std::chrono::steady_clock::now();
  ready_generation_ = gen;
  push_event("generation_ready", {{"generation", gen}});
}

int UserGuidedSession::select(const std::vector<long long>& ids) {
  std::unique_lock lk(mu_);
  if (status_ == SessionStatus::kEvaluating) throw InvalidSelection("generation is still being evaluated");
  if (ids.empty()) throw InvalidSelection("selection is empty");
  const auto& pop = ga_.population();
  std::vector<std::size_t> chosen;
  for (long long id : ids) {
    auto it = std::find_if(pop.begin(), pop.end(), [id](const auto& ind) { return ind.id == id; });
    if (it == pop.end()) throw InvalidSelection("unknown id " + std::to_string(id));
    const auto idx = static_cast<std::size_t>(it - pop.begin());
    if (std::find(chosen.begin(), chosen.end(), idx) == chosen.end()) chosen.push_back(idx);
  }

  const EvoConfig& ec = cfg_.evo;
  std::mt19937_64& rng = ga_.rng();
  std::vector<Individual<std::vector<double>>> next;
  const int elites = std::min<int>(ec.elitism_count, static_cast<int>(chosen.size()));
  for (int e = 0; e < elites; ++e) {
    Individual<std::vector<double>> keep = pop[chosen[e]];
    keep.fitness.reset();
    next.push_back(std::move(keep));
  }
  std::uniform_int_distribution<std::size_t> pick(0, chosen.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (static_cast<int>(next.size()) < ec.pop_size) {
    const auto& pa = pop[chosen[pick(rng)]];
    Individual<std::vector<double>> child;
    child.parent_a = pa.id;
    if (unit(rng) < ec.crossover_prob) {
      const auto& pb = pop[chosen[pick(rng)]];
      child.parent_b = pb.id;
      child.genome = ga_.ops().crossover(pa.genome, pb.genome, rng);
    } else {
      child.genome = pa.genome;
    }
    child.genome = ga_.ops().mutate(child.genome, rng);
    child.id = ga_.take_id();
    next.push_back(std::move(child));
  }
  ga_.replace_population(std::move(next));
  status_ = SessionStatus::kEvaluating;
  pending_evaluation_ = true;
  const int gen = ga_.generation();
  lk.unlock();
  cv_.notify_all();
  return gen;
}

bool UserGuidedSession::wait_for_generation(int g, std::chrono::milliseconds timeout) const {
  std::unique_lock lk(mu_);
  return cv_.wait_for(lk, timeout, [&] { return ready_generation_ >= g; });
}

std::vector<SessionEvent> UserGuidedSession::events_after(long long after_seq,
                                                         std::chrono::milliseconds timeout) const {
  std::unique_lock lk(mu_);
  cv_.wait_for(lk, timeout, [&] { return stopping_ || (!events_.empty() && events_.back().seq > after_seq); });
  std::vector<SessionEvent> out;
  for (const auto& e : events_) {
    if (e.seq > after_seq) out.push_back(e);
  }
  return out;
}

nlohmann::json UserGuidedSession::info() const {
  std::lock_guard lk(mu_);
  return {{"session_id", cfg_.session_id},
          {"generation", ga_.generation()},
          {"pop_size", cfg_.evo.pop_size},
          {"mode", to_string(EvoMode::kUserGuided)},
          {"status", to_string(status_)}};
}

nlohmann::json UserGuidedSession::generation_json() const {
  std::lock_guard lk(mu_);
  nlohmann::json out = nlohmann::json::array();
  for (const auto& s : summaries_) {
    nlohmann::json poly = nlohmann::json::array();
    for (const auto& p : s.trajectory) poly.push_back({p.x, p.y});
    out.push_back({{"id", s.id},
                   {"parent_a", s.parent_a},
                   {"parent_b", s.parent_b},
                   {"fitness", s.result.fitness},
                   {"reached", s.result.reached},
                   {"rotations_l", s.result.rotations_left},
                   {"rotations_r", s.result.rotations_right},
                   {"sensor_performance", s.result.sensor_performance},
                   {"trajectory", std::move(poly)}});
  }
  return out;
}

nlohmann::json UserGuidedSession::history() const {
  std::lock_guard lk(mu_);
  return history_;
}

void UserGuidedSession::save(std::ostream& out) const {
  std::lock_guard lk(mu_);
  nlohmann::json j;
  j["session_id"] = cfg_.session_id;
  j["ga"] = ga_.checkpoint();
  j["history"] = history_;
  out << j.dump() << '\n';
}

void UserGuidedSession::load(std::istream& in) {
  const nlohmann::json j = nlohmann::json::parse(in);
  std::lock_guard lk(mu_);
  if (started_) throw std::logic_error("load() on a running session");
  cfg_.session_id = j.at("session_id").get<std::string>();
  ga_.restore(j.at("ga"));
  history_ = j.at("history");
  summaries_.clear();
  ready_generation_ = -1;
  initialized_ = true;
}

}  // namespace evobot
