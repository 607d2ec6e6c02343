#pragma once

// Wire messages exchanged among viewer clients, the relay and the streamer
// application. One JSON object per websocket text frame.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "crowdinput/error.hpp"

namespace crowdinput {

/// Position on the video frame as fractions of its width and height, y down.
struct NormPoint {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const NormPoint&, const NormPoint&) = default;
};

enum class EventKind { Click, Gesture };

struct ViewerEvent {
  std::string user;
  EventKind kind = EventKind::Click;
  std::vector<NormPoint> points;
  std::vector<std::int64_t> offsets_ms;  // since stroke start, first is 0
  std::int64_t latency_ms = 0;
  std::int64_t client_ts_ms = 0;

  friend bool operator==(const ViewerEvent&, const ViewerEvent&) = default;
};

using FlatMap = std::map<std::string, std::string>;

struct ContextPayload {
  std::string user;
  FlatMap data;

  friend bool operator==(const ContextPayload&, const ContextPayload&) = default;
};

/// Recipients of an application update; an empty `user` means everyone.
struct Audience {
  std::optional<std::string> user;

  static Audience all() { return {}; }
  static Audience single(std::string name) { return {std::move(name)}; }
  bool is_all() const { return !user.has_value(); }

  friend bool operator==(const Audience&, const Audience&) = default;
};

struct AppUpdate {
  FlatMap payload;
  Audience audience;

  friend bool operator==(const AppUpdate&, const AppUpdate&) = default;
};

enum class Role { Viewer, App };

struct Hello {
  Role role = Role::Viewer;
  std::optional<std::string> user;

  friend bool operator==(const Hello&, const Hello&) = default;
};

struct ErrorBody {
  std::string code;
  std::string detail;

  friend bool operator==(const ErrorBody&, const ErrorBody&) = default;
};

enum class MsgType { MouseEvent, Context, AppUpdate, Hello, Error };

using Body = std::variant<ViewerEvent, ContextPayload, AppUpdate, Hello, ErrorBody>;

/// A framed message. The message type is carried by the body alternative, so
/// type and body shape cannot disagree.
struct Envelope {
  std::uint64_t seq = 0;
  Body body;

  MsgType type() const { return static_cast<MsgType>(body.index()); }

  friend bool operator==(const Envelope&, const Envelope&) = default;
};

std::string_view to_string(MsgType type);
std::string_view to_string(EventKind kind);

/// Size limits enforced on usernames and flat string maps.
struct Bounds {
  std::size_t max_username = 64;
  std::size_t max_entries = 16;
  std::size_t max_key = 32;
  std::size_t max_value = 256;
};

/// Throws Error{InvariantViolation} describing the first violated bound.
void validate(const Envelope& envelope, const Bounds& bounds = {});
void validate(const ViewerEvent& event, const Bounds& bounds = {});
void validate(const ContextPayload& payload, const Bounds& bounds = {});

/// Single-line UTF-8 JSON. Validates first.
std::string encode(const Envelope& envelope, const Bounds& bounds = {});

/// Throws MalformedMessage for bad JSON, unknown types, missing/extra fields or
/// wrong field types, and InvariantViolation for well-typed out-of-range data.
Envelope decode(std::string_view bytes, const Bounds& bounds = {});

/// Click versus gesture discrimination applied on mouse release.
struct ClassifyThresholds {
  double motion = 0.01;          // normalized units, Euclidean
  std::int64_t hold_ms = 250;
};

EventKind classify_raw_input(NormPoint press, NormPoint release, std::span<const NormPoint> trajectory,
                             std::int64_t hold_ms, const ClassifyThresholds& thresholds = {});

}  // namespace crowdinput
