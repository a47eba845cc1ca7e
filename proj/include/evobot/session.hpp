#pragma once

// User-guided evolution: each generation is evaluated on a worker thread,
// then the session waits for a person to pick favourites, which seed the
// next generation. One producer (the worker) and any number of readers may
// use a session concurrently.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <iosfwd>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "evobot/evolution.hpp"

namespace evobot {

class InvalidSelection : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SessionStatus { kEvaluating, kAwaitingSelection, kPaused };

const char* to_string(SessionStatus s);

struct CandidateSummary {
  long long id = 0;
  long long parent_a = -1;
  long long parent_b = -1;
  TrialResult result;
  std::vector<Vec2> trajectory;  // at most kMaxPolylinePoints
};

inline constexpr std::size_t kMaxPolylinePoints = 200;

// Keeps the first and last point and evenly spaced samples between.
std::vector<Vec2> downsample(const Trajectory& trace, const RobotState& final_state, std::size_t max_points);

struct SessionEvent {
  long long seq = 0;
  std::string type;  // generation_ready, evaluation_progress, session_paused, selection_timeout
  nlohmann::json data;
};

struct SessionConfig {
  EvoConfig evo;
  ControllerEvaluation eval;
  std::chrono::milliseconds selection_timeout{std::chrono::minutes(10)};
  std::string session_id = "session-1";
};

class UserGuidedSession {
 public:
  explicit UserGuidedSession(SessionConfig cfg);
  ~UserGuidedSession();
  UserGuidedSession(const UserGuidedSession&) = delete;
  UserGuidedSession& operator=(const UserGuidedSession&) = delete;

  // Evaluates generation 0 (or the restored generation) on the worker.
  void start();
  void stop();

  SessionStatus status() const;
  int generation() const;
  std::vector<CandidateSummary> candidates() const;

  // Breeds the next generation from the selected ids and starts evaluating
  // it. Throws InvalidSelection on an empty list, unknown ids, or when the
  // current generation is still being evaluated; the session is unchanged.
  // Returns the new generation number.
  int select(const std::vector<long long>& ids);

  // Blocks until generation `g` has been evaluated or `timeout` passes.
  bool wait_for_generation(int g, std::chrono::milliseconds timeout) const;

  // Events with seq > after_seq, waiting up to `timeout` for the first one.
  std::vector<SessionEvent> events_after(long long after_seq, std::chrono::milliseconds timeout) const;

  nlohmann::json info() const;
  nlohmann::json generation_json() const;
  // Per generation: best and mean fitness plus every member's id and parents.
  nlohmann::json history() const;

  void save(std::ostream& out) const;
  // Restores a saved session; call start() afterwards.
  void load(std::istream& in);

  const SessionConfig& config() const { return cfg_; }

 private:
  void worker_loop();
  void evaluate_current();
  void push_event(const std::string& type, nlohmann::json data);

  SessionConfig cfg_;
  GeneticAlgorithm<WeightVectorOps> ga_;
  std::vector<CandidateSummary> summaries_;
  nlohmann::json history_ = nlohmann::json::array();
  SessionStatus status_ = SessionStatus::kEvaluating;
  bool pending_evaluation_ = false;
  bool stopping_ = false;
  bool started_ = false;
  bool initialized_ = false;
  int ready_generation_ = -1;
  std::chrono::steady_clock::time_point awaiting_since_;
  std::vector<SessionEvent> events_;
  long long next_seq_ = 1;

  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  std::thread worker_;
};

}  // namespace evobot
