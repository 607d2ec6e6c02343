#pragma once

// Relay session plus one in-process application on a virtual clock. Used by
// the simulation harness and by log replay, so both share one code path.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "crowdinput/apps.hpp"
#include "crowdinput/relay.hpp"

namespace crowdinput {

enum class Disposition { Admitted, Rejected, Dropped, None };

struct SubmitResult {
  Disposition disposition = Disposition::None;
  std::string reason;
};

class LocalDeployment {
 public:
  explicit LocalDeployment(std::unique_ptr<apps::App> app, Bounds bounds = {});

  /// New transport-level connection (no role until it says hello).
  ConnectionId open();

  /// Ticks the app through every tick time <= ts, then lets the session
  /// receive the envelope and forwards app inputs to the app. Events the app
  /// rejects are answered with an `error` frame carrying the reason.
  SubmitResult submit(ConnectionId from, const Envelope& envelope, std::int64_t ts);

  void advance_to(std::int64_t ts);
  /// Ticks through end_ts and broadcasts {"session":"end"}, which marks the
  /// end of the timeline in the receive log.
  void finish(std::int64_t end_ts);

  Session& session() { return session_; }
  const Session& session() const { return session_; }
  apps::App& app() { return *app_; }
  const apps::App& app() const { return *app_; }
  std::int64_t next_tick_ms() const { return next_tick_; }

  /// Frames addressed to viewer connections since the last call.
  std::vector<Outbound> take_frames();

 private:
  void flush_updates(std::int64_t ts);
  SubmitResult deliver(ConnectionId from, Dispatch dispatch);

  Session session_;
  std::unique_ptr<apps::App> app_;
  ConnectionId app_conn_ = 1;
  ConnectionId next_conn_ = 2;
  std::uint64_t app_seq_ = 1;
  std::int64_t next_tick_ = 0;
  std::vector<Outbound> frames_;
};

/// Re-drives a deployment (built with a fresh app) from a receive log.
/// Throws CorruptLog.
void replay_into(LocalDeployment& deployment, const std::vector<ReceiveEntry>& entries);

}  // namespace crowdinput
