#pragma once

// HTTP front end for a user-guided session.
//
//   GET  /api/session     {session_id, generation, pop_size, mode, status}
//   GET  /api/generation  candidates of the current generation
//   POST /api/selection   {"ids": [...]} -> 200 {generation} | 400 {error, message}
//   GET  /api/stream      newline-delimited events; ?after=<seq> skips older ones
//   GET  /api/history     per-generation best/mean fitness and lineage
//   GET  /api/world       bounds, target, obstacles and terrain kind

#include <atomic>
#include <memory>
#include <string>

#include "json.hpp"

#include "evobot/session.hpp"
#include "evobot/world.hpp"

namespace evobot {

nlohmann::json world_json(const World& world);

class SessionServer {
 public:
  SessionServer(UserGuidedSession& session, World world);
  ~SessionServer();
  SessionServer(const SessionServer&) = delete;
  SessionServer& operator=(const SessionServer&) = delete;

  // Port 0 picks a free port. Returns the bound port; throws std::runtime_error.
  int bind(const std::string& host, int port);
  // Serves until stop(); call after bind().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace evobot
