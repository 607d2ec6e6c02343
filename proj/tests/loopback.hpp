#pragma once

// Real websocket relay plus in-process arena app, driven by scripted clients
// against a virtual relay clock.

#include <atomic>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "crowdinput/apps.hpp"
#include "crowdinput/relay_server.hpp"
#include "ws_client.hpp"

namespace testsupport {

struct LoopbackResult {
  std::uint64_t sent = 0;
  std::uint64_t received = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped = 0;
  std::uint64_t admitted = 0;
  std::uint64_t rejected = 0;
  std::uint64_t protocol_errors = 0;
  std::uint64_t error_frames = 0;   // seen by clients
  std::uint64_t update_frames = 0;  // seen by clients
  std::uint64_t undecodable = 0;    // frames clients could not decode
  std::string final_state;
};

inline LoopbackResult run_loopback(int clients = 5, std::int64_t duration_ms = 60000, std::uint64_t seed = 7) {
  using namespace crowdinput;
  std::atomic<std::int64_t> now{0};
  ServerConfig cfg;
  cfg.port = 0;
  cfg.clock = [&now] { return now.load(); };
  cfg.poll_interval_ms = 5;
  auto app = apps::make_app(nlohmann::json::parse(R"({
      "kind": "arena",
      "camera": {"velocity_per_tick": [0.5, 0.0]},
      "gate": {"cooldown_ms": 300},
      "arena": {"initial_funds": 5.0}})"));
  RelayServer server(cfg, std::move(app));
  server.start();

  std::vector<std::unique_ptr<WsClient>> conns;
  std::vector<std::uint64_t> seq(clients, 1);
  const char* items[] = {"zombie", "slime", "torch", "potion", "skeleton"};
  for (int c = 0; c < clients; ++c) {
    conns.push_back(std::make_unique<WsClient>("127.0.0.1", server.port()));
    conns[c]->send(encode(Envelope{seq[c]++, Hello{Role::Viewer, "client" + std::to_string(c)}}));
    conns[c]->send(encode(Envelope{seq[c]++, ContextPayload{"client" + std::to_string(c), {{"item", items[c % 5]}}}}));
  }
  server.drain();

  LoopbackResult r;
  std::mt19937_64 rng(seed);
  for (std::int64_t t = 100; t <= duration_ms; t += 100) {
    now = t;
    for (int c = 0; c < clients; ++c) {
      const std::string user = "client" + std::to_string(c);
      // Each client acts every ~500 ms, staggered.
      if ((t / 100 + c) % 5 != 0) continue;
      if (t % 7000 == 0) {
        conns[c]->send(encode(Envelope{seq[c]++, ContextPayload{user, {{"message", "hi from " + user}}}}));
      }
      ViewerEvent ev{user,
                     EventKind::Click,
                     {{double(rng() % 1001) / 1000.0, double(rng() % 1001) / 1000.0}},
                     {0},
                     std::int64_t(200 + rng() % 1800),
                     t};
      conns[c]->send(encode(Envelope{seq[c]++, ev}));
      ++r.sent;
    }
    // Let the relay read this step's frames at this clock reading.
    for (int spin = 0; spin < 200 && server.stats().events_received < r.sent; ++spin) {
      std::this_thread::sleep_for(std::chrono::microseconds(200));
    }
  }
  server.drain();
  std::this_thread::sleep_for(std::chrono::milliseconds(50));
  server.drain();

  auto stats = server.stats();
  r.received = stats.events_received;
  r.delivered = stats.events_delivered;
  r.dropped = stats.events_dropped;
  r.protocol_errors = stats.protocol_errors;
  r.admitted = server.app_admitted();
  r.rejected = server.app_rejected();
  r.final_state = server.app_state();
  for (auto& c : conns) {
    for (const auto& f : c->frames()) {
      try {
        auto env = decode(f);
        if (env.type() == MsgType::Error) ++r.error_frames;
        if (env.type() == MsgType::AppUpdate) ++r.update_frames;
      } catch (const Error&) {
        ++r.undecodable;
      }
    }
    c->close();
  }
  server.stop();
  return r;
}

}  // namespace testsupport
