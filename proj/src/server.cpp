#include "evobot/server.hpp"

#include <stdexcept>

#include "httplib.h"

namespace evobot {

namespace {

constexpr const char* kJson = "application/json";

}  // namespace

nlohmann::json world_json(const World& world) {
  nlohmann::json obstacles = nlohmann::json::array();
  for (const Obstacle& o : world.obstacles) obstacles.push_back({{"x", o.center.x}, {"y", o.center.y}, {"r", o.radius}});
  nlohmann::json starts = nlohmann::json::array();
  for (const Pose& p : world.starts) starts.push_back({{"x", p.x}, {"y", p.y}, {"heading", p.heading}});
  return {{"bounds",
           {{"x_min", world.bounds.x_min},
            {"y_min", world.bounds.y_min},
            {"x_max", world.bounds.x_max},
            {"y_max", world.bounds.y_max}}},
          {"target", {{"x", world.target.center.x}, {"y", world.target.center.y}, {"r", world.target.radius}}},
          {"obstacles", obstacles},
          {"starts", starts},
          {"terrain", to_string(world.terrain.kind())},
          {"seed", world.seed}};
}

struct SessionServer::Impl {
  UserGuidedSession& session;
  World world;
  httplib::Server http;
  std::atomic<bool> stopping{false};

  Impl(UserGuidedSession& s, World w) : session(s), world(std::move(w)) { routes(); }

  static void send(httplib::Response& res, const nlohmann::json& j, int status = 200) {
    res.status = status;
    res.set_content(j.dump(), kJson);
  }

  void routes() {
    http.Get("/api/session", [this](const httplib::Request&, httplib::Response& res) { send(res, session.info()); });
    http.Get("/api/generation",
             [this](const httplib::Request&, httplib::Response& res) { send(res, session.generation_json()); });
    http.Get("/api/history", [this](const httplib::Request&, httplib::Response& res) { send(res, session.history()); });
    http.Get("/api/world", [this](const httplib::Request&, httplib::Response& res) { send(res, world_json(world)); });

    http.Post("/api/selection", [this](const httplib::Request& req, httplib::Response& res) {
      std::vector<long long> ids;
      try {
        const auto body = nlohmann::json::parse(req.body);
        ids = body.at("ids").get<std::vector<long long>>();
      } catch (const nlohmann::json::exception& e) {
        send(res, {{"error", "InvalidSelection"}, {"message", std::string("malformed body: ") + e.what()}}, 400);
        return;
      }
      try {
        send(res, {{"generation", session.select(ids)}});
      } catch (const InvalidSelection& e) {
        send(res, {{"error", "InvalidSelection"}, {"message", e.what()}}, 400);
      }
    });

    http.Get("/api/stream", [this](const httplib::Request& req, httplib::Response& res) {
      long long after = 0;
      if (req.has_param("after")) {
        try {
          after = std::stoll(req.get_param_value("after"));
        } catch (const std::exception&) {
          send(res, {{"error", "BadRequest"}, {"message", "after must be an integer"}}, 400);
          return;
        }
      }
      res.set_chunked_content_provider("application/x-ndjson", [this, after](std::size_t, httplib::DataSink& sink) mutable {
        while (!stopping && sink.is_writable()) {
          for (const SessionEvent& e : session.events_after(after, std::chrono::milliseconds(200))) {
            const std::string line = nlohmann::json{{"seq", e.seq}, {"type", e.type}, {"data", e.data}}.dump() + "\n";
            if (!sink.write(line.data(), line.size())) return false;
            after = e.seq;
          }
        }
        sink.done();
        return true;
      });
    });

    http.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      std::string msg = "internal error";
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        msg = e.what();
      } catch (...) {
      }
      send(res, {{"error", "InternalError"}, {"message", msg}}, 500);
    });
  }
};

SessionServer::SessionServer(UserGuidedSession& session, World world)
    : impl_(std::make_unique<Impl>(session, std::move(world))) {}

SessionServer::~SessionServer() { stop(); }

int SessionServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->http.bind_to_any_port(host) : (impl_->http.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void SessionServer::listen() { impl_->http.listen_after_bind(); }

void SessionServer::stop() {
  impl_->stopping = true;
  impl_->http.stop();
}

}  // namespace evobot
