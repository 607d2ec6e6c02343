#pragma once

// Transport-independent hub state: one streamer application, any number of
// viewers. Every mutation goes through Session, which serializes callers with
// an internal mutex and returns a Dispatch describing what the transport must
// send. The websocket server (relay_server.hpp) and the in-process deployment
// (deployment.hpp) are both thin drivers around it.

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "crowdinput/protocol.hpp"

namespace crowdinput {

using ConnectionId = std::uint64_t;

/// A viewer event paired with the sender's context at admission time.
struct AdmittedEvent {
  ViewerEvent event;
  FlatMap context_snapshot;
  std::int64_t server_ts_ms = 0;  // relay clock, never the client's

  friend bool operator==(const AdmittedEvent&, const AdmittedEvent&) = default;
};

struct ContextUpdate {
  ContextPayload payload;
  std::int64_t server_ts_ms = 0;

  friend bool operator==(const ContextUpdate&, const ContextUpdate&) = default;
};

struct ViewerJoined {
  std::string user;
  std::int64_t server_ts_ms = 0;

  friend bool operator==(const ViewerJoined&, const ViewerJoined&) = default;
};

/// What the relay hands to the application connection.
using AppInput = std::variant<AdmittedEvent, ContextUpdate, ViewerJoined>;

struct Outbound {
  ConnectionId to = 0;
  Envelope message;
};

/// Side effects of one session call, in the order they must be performed.
struct Dispatch {
  std::vector<Outbound> frames;
  std::optional<ConnectionId> app;     // recipient of app_inputs
  std::vector<AppInput> app_inputs;
  std::vector<ConnectionId> close;
};

struct ReceiveEntry {
  std::int64_t server_ts_ms = 0;
  Envelope envelope;

  friend bool operator==(const ReceiveEntry&, const ReceiveEntry&) = default;
};

struct SessionStats {
  std::uint64_t events_received = 0;
  std::uint64_t events_delivered = 0;
  std::uint64_t events_dropped = 0;
  std::uint64_t contexts = 0;
  std::uint64_t app_updates = 0;
  std::uint64_t update_frames = 0;
  std::uint64_t protocol_errors = 0;
};

class Session {
 public:
  explicit Session(Bounds bounds = {});

  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  /// Transport-level open; the connection has no role until it says hello.
  void connect(ConnectionId id);
  Dispatch disconnect(ConnectionId id);

  /// Dispatches by message type. Domain failures become an `error` frame to
  /// the sender instead of an exception.
  Dispatch receive(ConnectionId from, const Envelope& envelope, std::int64_t server_ts_ms);
  /// Decodes first; undecodable frames are answered with an `error` frame.
  Dispatch receive_frame(ConnectionId from, std::string_view frame, std::int64_t server_ts_ms);

  // Typed operations. These throw Error on contract violations.
  Dispatch register_connection(ConnectionId from, const Hello& hello, std::int64_t server_ts_ms,
                               std::uint64_t seq = 0);
  Dispatch ingest_context(ConnectionId from, const ContextPayload& payload, std::int64_t server_ts_ms,
                          std::uint64_t seq = 0);
  Dispatch ingest_event(ConnectionId from, const ViewerEvent& event, std::int64_t server_ts_ms,
                        std::uint64_t seq = 0);
  Dispatch push_app_update(ConnectionId from, const AppUpdate& update, std::int64_t server_ts_ms,
                           std::uint64_t seq = 0);

  /// One `{"ts":int,"envelope":{...}}` line per receive-log entry.
  std::string export_replay() const;
  /// Re-drives a log into this (fresh) session using pseudo-connections.
  /// Throws CorruptLog with the offending line number.
  void ingest_replay(std::string_view jsonl);

  /// Next outbound sequence number for a connection; used by transports that
  /// frame app inputs themselves.
  std::uint64_t next_outbound_seq(ConnectionId id);

  FlatMap context_of(const std::string& user) const;
  bool app_connected() const;
  std::optional<ConnectionId> app_connection() const;
  std::optional<ConnectionId> connection_of(const std::string& user) const;
  std::size_t viewer_count() const;
  std::vector<ReceiveEntry> receive_log() const;
  SessionStats stats() const;
  const Bounds& bounds() const { return bounds_; }

 private:
  struct Member {
    std::optional<Role> role;
    std::optional<std::string> user;
    std::optional<std::uint64_t> last_seq;
    std::uint64_t next_out_seq = 1;
  };

  // Unlocked internals.
  std::int64_t stamp(std::int64_t ts);
  void check_seq(ConnectionId from, std::uint64_t seq);
  Member& viewer_sender(ConnectionId from, const std::string& claimed_user);
  void append_frame(Dispatch& out, ConnectionId to, Body body);
  Dispatch register_locked(ConnectionId from, const Hello& hello, std::int64_t ts, std::uint64_t seq);
  Dispatch context_locked(ConnectionId from, const ContextPayload& payload, std::int64_t ts, std::uint64_t seq);
  Dispatch event_locked(ConnectionId from, const ViewerEvent& event, std::int64_t ts, std::uint64_t seq);
  Dispatch update_locked(ConnectionId from, const AppUpdate& update, std::int64_t ts, std::uint64_t seq);
  Dispatch receive_locked(ConnectionId from, const Envelope& envelope, std::int64_t ts);

  Bounds bounds_;
  mutable std::mutex mutex_;
  std::map<ConnectionId, Member> members_;
  std::map<std::string, ConnectionId> viewers_;
  std::optional<ConnectionId> app_;
  std::map<std::string, FlatMap> context_store_;
  std::vector<ReceiveEntry> log_;
  std::int64_t last_ts_ = 0;
  SessionStats stats_;
};

/// Parses an exported replay log. Throws CorruptLog naming the line.
std::vector<ReceiveEntry> parse_replay(std::string_view jsonl, const Bounds& bounds = {});
std::string format_replay_line(const ReceiveEntry& entry, const Bounds& bounds = {});

/// App-facing frame for an admitted event, used when the application is a
/// websocket client rather than in-process:
/// {"type":"admitted","seq":n,"server_ts_ms":t,"context":{...},"event":{mouse_event fields}}.
std::string encode_admitted(const AdmittedEvent& admitted, std::uint64_t seq);
AdmittedEvent decode_admitted(std::string_view frame, const Bounds& bounds = {});

}  // namespace crowdinput
