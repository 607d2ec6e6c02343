#include "crowdinput/protocol.hpp"

#include <cmath>
#include <initializer_list>

#include <json.hpp>

namespace crowdinput {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::MalformedMessage: return "malformed_message";
    case Errc::InvariantViolation: return "invariant_violation";
    case Errc::DuplicateApp: return "duplicate_app";
    case Errc::MissingUsername: return "missing_username";
    case Errc::UserMismatch: return "user_mismatch";
    case Errc::NotRegistered: return "not_registered";
    case Errc::NoApp: return "no_app";
    case Errc::NotApp: return "not_app";
    case Errc::BadSequence: return "bad_sequence";
    case Errc::NonMonotonicTimestamp: return "non_monotonic_timestamp";
    case Errc::StaleIntent: return "stale_intent";
    case Errc::EmptyBuffer: return "empty_buffer";
    case Errc::RoundClosed: return "round_closed";
    case Errc::NoVotes: return "no_votes";
    case Errc::NoAnchor: return "no_anchor";
    case Errc::InvalidRegions: return "invalid_regions";
    case Errc::ClockRegression: return "clock_regression";
    case Errc::InsufficientFunds: return "insufficient_funds";
    case Errc::ConfigInvalid: return "config_invalid";
    case Errc::ScenarioInvalid: return "scenario_invalid";
    case Errc::CorruptLog: return "corrupt_log";
  }
  return "unknown";
}

std::string_view to_string(MsgType type) {
  switch (type) {
    case MsgType::MouseEvent: return "mouse_event";
    case MsgType::Context: return "context";
    case MsgType::AppUpdate: return "app_update";
    case MsgType::Hello: return "hello";
    case MsgType::Error: return "error";
  }
  return "unknown";
}

std::string_view to_string(EventKind kind) { return kind == EventKind::Click ? "click" : "gesture"; }

namespace {

[[noreturn]] void violation(const std::string& what) { throw Error(Errc::InvariantViolation, what); }
[[noreturn]] void malformed(const std::string& what) { throw Error(Errc::MalformedMessage, what); }

void check_username(const std::string& user, const Bounds& bounds, std::string_view field) {
  if (user.empty()) violation(std::string(field) + " is empty");
  if (user.size() > bounds.max_username) violation(std::string(field) + " longer than limit");
}

void check_map(const FlatMap& map, const Bounds& bounds, std::string_view field) {
  if (map.size() > bounds.max_entries) violation(std::string(field) + " has too many entries");
  for (const auto& [key, value] : map) {
    if (key.size() > bounds.max_key) violation(std::string(field) + " key too long: " + key);
    if (value.size() > bounds.max_value) violation(std::string(field) + " value too long for key " + key);
  }
}

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }  // false for NaN

// --- decoding helpers -------------------------------------------------------

void require_fields(const json& obj, std::initializer_list<std::string_view> required,
                    std::initializer_list<std::string_view> optional = {}) {
  for (auto name : required) {
    if (!obj.contains(name)) malformed("missing field '" + std::string(name) + "'");
  }
  for (const auto& item : obj.items()) {
    bool known = false;
    for (auto name : required) known = known || item.key() == name;
    for (auto name : optional) known = known || item.key() == name;
    if (!known) malformed("unexpected field '" + item.key() + "'");
  }
}

std::int64_t get_int(const json& obj, const char* field) {
  const auto& v = obj.at(field);
  if (v.is_number_unsigned()) {
    auto u = v.get<std::uint64_t>();
    if (u > static_cast<std::uint64_t>(INT64_MAX)) malformed(std::string(field) + " out of integer range");
    return static_cast<std::int64_t>(u);
  }
  if (!v.is_number_integer()) malformed(std::string(field) + " must be an integer");
  return v.get<std::int64_t>();
}

std::string get_string(const json& obj, const char* field) {
  const auto& v = obj.at(field);
  if (!v.is_string()) malformed(std::string(field) + " must be a string");
  return v.get<std::string>();
}

FlatMap get_flat_map(const json& obj, const char* field) {
  const auto& v = obj.at(field);
  if (!v.is_object()) malformed(std::string(field) + " must be an object");
  FlatMap out;
  for (const auto& item : v.items()) {
    if (!item.value().is_string()) malformed(std::string(field) + " values must be strings");
    out.emplace(item.key(), item.value().get<std::string>());
  }
  return out;
}

double get_coordinate(const json& v) {
  if (!v.is_number()) malformed("coordinates must be numbers");
  return v.get<double>();
}

ViewerEvent decode_mouse_event(const json& obj) {
  require_fields(obj, {"type", "seq", "user", "kind", "points", "offsets_ms", "latency_ms", "client_ts_ms"});
  ViewerEvent ev;
  ev.user = get_string(obj, "user");
  auto kind = get_string(obj, "kind");
  if (kind == "click") {
    ev.kind = EventKind::Click;
  } else if (kind == "gesture") {
    ev.kind = EventKind::Gesture;
  } else {
    malformed("unknown kind '" + kind + "'");
  }
  const auto& points = obj.at("points");
  if (!points.is_array()) malformed("points must be an array");
  for (const auto& p : points) {
    if (!p.is_array() || p.size() != 2) malformed("each point must be [x, y]");
    ev.points.push_back({get_coordinate(p[0]), get_coordinate(p[1])});
  }
  const auto& offsets = obj.at("offsets_ms");
  if (!offsets.is_array()) malformed("offsets_ms must be an array");
  for (const auto& o : offsets) {
    if (!o.is_number_integer()) malformed("offsets_ms entries must be integers");
    ev.offsets_ms.push_back(o.get<std::int64_t>());
  }
  ev.latency_ms = get_int(obj, "latency_ms");
  ev.client_ts_ms = get_int(obj, "client_ts_ms");
  return ev;
}

ContextPayload decode_context(const json& obj) {
  require_fields(obj, {"type", "seq", "user", "data"});
  return {get_string(obj, "user"), get_flat_map(obj, "data")};
}

AppUpdate decode_app_update(const json& obj) {
  require_fields(obj, {"type", "seq", "audience", "payload"});
  AppUpdate update;
  const auto& audience = obj.at("audience");
  if (audience.is_string()) {
    if (audience.get<std::string>() != "all") malformed("audience string must be \"all\"");
  } else if (audience.is_object()) {
    require_fields(audience, {"user"});
    update.audience.user = get_string(audience, "user");
  } else {
    malformed("audience must be \"all\" or {\"user\": name}");
  }
  update.payload = get_flat_map(obj, "payload");
  return update;
}

Hello decode_hello(const json& obj) {
  require_fields(obj, {"type", "seq", "role"}, {"user"});
  Hello hello;
  auto role = get_string(obj, "role");
  if (role == "viewer") {
    hello.role = Role::Viewer;
  } else if (role == "app") {
    hello.role = Role::App;
  } else {
    malformed("unknown role '" + role + "'");
  }
  if (obj.contains("user")) hello.user = get_string(obj, "user");
  return hello;
}

ErrorBody decode_error(const json& obj) {
  require_fields(obj, {"type", "seq", "code", "detail"});
  return {get_string(obj, "code"), get_string(obj, "detail")};
}

// --- encoding helpers -------------------------------------------------------

struct BodyEncoder {
  ojson& out;

  void operator()(const ViewerEvent& ev) const {
    out["user"] = ev.user;
    out["kind"] = to_string(ev.kind);
    auto points = ojson::array();
    for (const auto& p : ev.points) points.push_back(ojson::array({p.x, p.y}));
    out["points"] = std::move(points);
    out["offsets_ms"] = ev.offsets_ms;
    out["latency_ms"] = ev.latency_ms;
    out["client_ts_ms"] = ev.client_ts_ms;
  }
  void operator()(const ContextPayload& ctx) const {
    out["user"] = ctx.user;
    out["data"] = ctx.data;
  }
  void operator()(const AppUpdate& update) const {
    if (update.audience.is_all()) {
      out["audience"] = "all";
    } else {
      out["audience"] = ojson{{"user", *update.audience.user}};
    }
    out["payload"] = update.payload;
  }
  void operator()(const Hello& hello) const {
    out["role"] = hello.role == Role::App ? "app" : "viewer";
    if (hello.user) out["user"] = *hello.user;
  }
  void operator()(const ErrorBody& err) const {
    out["code"] = err.code;
    out["detail"] = err.detail;
  }
};

}  // namespace

void validate(const ViewerEvent& ev, const Bounds& bounds) {
  check_username(ev.user, bounds, "user");
  if (ev.kind == EventKind::Click && ev.points.size() != 1) violation("click must carry exactly one point");
  if (ev.kind == EventKind::Gesture && ev.points.size() < 2) violation("gesture must carry at least two points");
  if (ev.offsets_ms.size() != ev.points.size()) violation("offsets_ms length differs from points");
  for (const auto& p : ev.points) {
    if (!in_unit(p.x) || !in_unit(p.y)) violation("point outside the unit frame");
  }
  if (!ev.offsets_ms.empty() && ev.offsets_ms.front() != 0) violation("first offset must be 0");
  for (std::size_t i = 1; i < ev.offsets_ms.size(); ++i) {
    if (ev.offsets_ms[i] < ev.offsets_ms[i - 1]) violation("offsets_ms must be non-decreasing");
  }
  if (ev.latency_ms < 0) violation("latency_ms must be non-negative");
}

void validate(const ContextPayload& payload, const Bounds& bounds) {
  check_username(payload.user, bounds, "user");
  check_map(payload.data, bounds, "data");
}

void validate(const Envelope& envelope, const Bounds& bounds) {
  std::visit(
      [&](const auto& body) {
        using T = std::decay_t<decltype(body)>;
        if constexpr (std::is_same_v<T, ViewerEvent> || std::is_same_v<T, ContextPayload>) {
          validate(body, bounds);
        } else if constexpr (std::is_same_v<T, AppUpdate>) {
          if (body.audience.user) check_username(*body.audience.user, bounds, "audience.user");
          check_map(body.payload, bounds, "payload");
        } else if constexpr (std::is_same_v<T, Hello>) {
          if (body.user) check_username(*body.user, bounds, "user");
        }
      },
      envelope.body);
}

std::string encode(const Envelope& envelope, const Bounds& bounds) {
  validate(envelope, bounds);
  ojson out;
  out["type"] = to_string(envelope.type());
  out["seq"] = envelope.seq;
  std::visit(BodyEncoder{out}, envelope.body);
  return out.dump();
}

Envelope decode(std::string_view bytes, const Bounds& bounds) {
  json obj;
  try {
    obj = json::parse(bytes);
  } catch (const json::parse_error& e) {
    malformed(std::string("invalid JSON: ") + e.what());
  }
  if (!obj.is_object()) malformed("message must be a JSON object");
  if (!obj.contains("type")) malformed("missing field 'type'");
  if (!obj.contains("seq")) malformed("missing field 'seq'");
  auto type = get_string(obj, "type");
  auto seq = get_int(obj, "seq");
  if (seq < 0) malformed("seq must be non-negative");

  Envelope envelope;
  envelope.seq = static_cast<std::uint64_t>(seq);
  if (type == "mouse_event") {
    envelope.body = decode_mouse_event(obj);
  } else if (type == "context") {
    envelope.body = decode_context(obj);
  } else if (type == "app_update") {
    envelope.body = decode_app_update(obj);
  } else if (type == "hello") {
    envelope.body = decode_hello(obj);
  } else if (type == "error") {
    envelope.body = decode_error(obj);
  } else {
    malformed("unknown type '" + type + "'");
  }
  validate(envelope, bounds);
  return envelope;
}

EventKind classify_raw_input(NormPoint press, NormPoint release, std::span<const NormPoint> trajectory,
                             std::int64_t hold_ms, const ClassifyThresholds& thresholds) {
  if (hold_ms >= thresholds.hold_ms) return EventKind::Gesture;
  auto displacement = [&](NormPoint p) { return std::hypot(p.x - press.x, p.y - press.y); };
  double max_disp = displacement(release);
  for (const auto& p : trajectory) max_disp = std::max(max_disp, displacement(p));
  return max_disp >= thresholds.motion ? EventKind::Gesture : EventKind::Click;
}

}  // namespace crowdinput
