#pragma once

// Websocket transport around Session. One io thread owns every socket; the
// application either runs in-process on an AppHost or connects as a websocket
// client with a hello {"role":"app"} and then receives `admitted`, `context`
// and `hello` frames.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "crowdinput/apps.hpp"
#include "crowdinput/policy.hpp"
#include "crowdinput/relay.hpp"

namespace crowdinput {

struct ServerConfig {
  std::string address = "127.0.0.1";
  std::uint16_t port = 9870;  // 0 picks a free port
  Bounds bounds;
  /// Relay clock in ms. Defaults to a steady clock starting at 0.
  std::function<std::int64_t()> clock;
  /// Real-time interval at which the in-process app is ticked up to clock().
  std::int64_t poll_interval_ms = 20;
};

class RelayServer {
 public:
  explicit RelayServer(ServerConfig config, std::unique_ptr<apps::App> app = nullptr,
                       std::optional<policy::ListWatcher> lists = std::nullopt);
  ~RelayServer();

  RelayServer(const RelayServer&) = delete;
  RelayServer& operator=(const RelayServer&) = delete;

  /// Binds and starts the io thread.
  void start();
  void stop();
  std::uint16_t port() const;

  /// Waits until the app host is idle and the io thread has handled
  /// everything it produced.
  void drain();

  SessionStats stats() const;
  /// In-process app verdicts on delivered events.
  std::uint64_t app_admitted() const;
  std::uint64_t app_rejected() const;
  std::size_t open_connections() const;
  std::string export_replay() const;
  /// Final state of the in-process app; empty when the app is external.
  std::string app_state();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace crowdinput
