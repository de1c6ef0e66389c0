#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "json.hpp"
#include "sentinel/episode_log.hpp"
#include "sentinel/pipeline.hpp"

namespace httplib {
class Server;
}

namespace sentinel {

struct ServeConfig {
  RunConfig run;
  std::string host = "127.0.0.1";
  int port = 8080;    // 0 picks a free port
  int tick_ms = 100;  // wall-clock pacing per simulated tick; 0 runs flat out
};

/// Live session behind the HTTP API. One loop thread owns the simulator and
/// the reasoning session; handlers talk to it through a command queue and
/// read immutable snapshots it publishes.
class SessionHost {
 public:
  explicit SessionHost(ServeConfig cfg);  // ConfigError, IoError, SchemaError
  ~SessionHost();
  SessionHost(const SessionHost&) = delete;
  SessionHost& operator=(const SessionHost&) = delete;

  /// Binds, then starts the loop and the HTTP server. Returns the bound
  /// port. Throws BindError.
  int start();
  /// Blocks until stop() (or the server failing).
  void wait();
  void stop();

  bool finished() const { return finished_.load(); }
  nlohmann::json state() const;
  nlohmann::json report() const;

 private:
  struct Query {
    std::string text;
  };
  struct Threshold {
    double value;
  };
  using Command = std::variant<Query, Threshold>;

  void loop();
  void apply_commands(ReasoningSession& session);
  void publish(const json& record, const ReasoningSession& session);
  void routes();

  ServeConfig cfg_;
  Scenario scenario_;
  std::unique_ptr<httplib::Server> server_;
  std::thread loop_thread_;
  std::thread http_thread_;
  std::atomic<bool> stopping_{false};
  std::atomic<bool> finished_{false};

  std::mutex cmd_mu_;
  std::deque<Command> commands_;

  // Published by the loop, read by handlers.
  mutable std::mutex snap_mu_;
  std::condition_variable events_cv_;
  std::shared_ptr<const json> state_;
  std::shared_ptr<const json> bev_;
  std::shared_ptr<const json> report_;
  std::vector<StreamEvent> events_;  // append-only
};

/// Serves until the process is interrupted. Throws BindError.
int cmd_serve(const ServeConfig& cfg);

}  // namespace sentinel
