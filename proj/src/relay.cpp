#include "crowdinput/relay.hpp"

#include <algorithm>

#include <json.hpp>

namespace crowdinput {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

Session::Session(Bounds bounds) : bounds_(bounds) {}

std::int64_t Session::stamp(std::int64_t ts) {
  last_ts_ = std::max(last_ts_, ts);
  return last_ts_;
}

void Session::check_seq(ConnectionId from, std::uint64_t seq) {
  auto& member = members_[from];
  if (member.last_seq && seq <= *member.last_seq) {
    throw Error(Errc::BadSequence, "seq " + std::to_string(seq) + " does not follow " + std::to_string(*member.last_seq));
  }
  member.last_seq = seq;
}

Session::Member& Session::viewer_sender(ConnectionId from, const std::string& claimed_user) {
  auto it = members_.find(from);
  if (it == members_.end() || !it->second.role) throw Error(Errc::NotRegistered, "connection has not said hello");
  if (*it->second.role != Role::Viewer || it->second.user != claimed_user) {
    throw Error(Errc::UserMismatch, "connection does not own user '" + claimed_user + "'");
  }
  return it->second;
}

void Session::append_frame(Dispatch& out, ConnectionId to, Body body) {
  auto& member = members_[to];
  out.frames.push_back({to, Envelope{member.next_out_seq++, std::move(body)}});
}

void Session::connect(ConnectionId id) {
  std::lock_guard lock(mutex_);
  members_.try_emplace(id);
}

Dispatch Session::disconnect(ConnectionId id) {
  std::lock_guard lock(mutex_);
  Dispatch out;
  auto it = members_.find(id);
  if (it == members_.end()) return out;
  if (app_ == id) app_.reset();
  if (it->second.user) {
    auto owner = viewers_.find(*it->second.user);
    if (owner != viewers_.end() && owner->second == id) viewers_.erase(owner);
  }
  members_.erase(it);
  return out;
}

Dispatch Session::register_locked(ConnectionId from, const Hello& hello, std::int64_t ts, std::uint64_t seq) {
  Dispatch out;
  auto& member = members_[from];
  if (member.role) throw Error(Errc::InvariantViolation, "connection already said hello");
  if (hello.role == Role::App) {
    if (app_) throw Error(Errc::DuplicateApp, "an application is already connected");
    check_seq(from, seq);
    member.role = Role::App;
    app_ = from;
  } else {
    if (!hello.user || hello.user->empty()) throw Error(Errc::MissingUsername, "viewer hello needs a user");
    check_seq(from, seq);
    auto previous = viewers_.find(*hello.user);
    if (previous != viewers_.end() && previous->second != from) {
      out.close.push_back(previous->second);
      members_.erase(previous->second);
    }
    auto& fresh = members_[from];
    fresh.role = Role::Viewer;
    fresh.user = *hello.user;
    viewers_[*hello.user] = from;
    if (app_) {
      out.app = app_;
      out.app_inputs.emplace_back(ViewerJoined{*hello.user, ts});
    }
  }
  log_.push_back({ts, Envelope{seq, hello}});
  return out;
}

Dispatch Session::context_locked(ConnectionId from, const ContextPayload& payload, std::int64_t ts,
                                 std::uint64_t seq) {
  validate(payload, bounds_);
  viewer_sender(from, payload.user);
  check_seq(from, seq);
  Dispatch out;
  context_store_[payload.user] = payload.data;
  ++stats_.contexts;
  log_.push_back({ts, Envelope{seq, payload}});
  if (app_) {
    out.app = app_;
    out.app_inputs.emplace_back(ContextUpdate{payload, ts});
  }
  return out;
}

Dispatch Session::event_locked(ConnectionId from, const ViewerEvent& event, std::int64_t ts, std::uint64_t seq) {
  ++stats_.events_received;
  try {
    validate(event, bounds_);
    viewer_sender(from, event.user);
    check_seq(from, seq);
    if (!app_) throw Error(Errc::NoApp, "no application connected; event dropped");
  } catch (const Error&) {
    ++stats_.events_dropped;
    throw;
  }
  Dispatch out;
  auto ctx = context_store_.find(event.user);
  AdmittedEvent admitted{event, ctx == context_store_.end() ? FlatMap{} : ctx->second, ts};
  log_.push_back({ts, Envelope{seq, event}});
  ++stats_.events_delivered;
  out.app = app_;
  out.app_inputs.emplace_back(std::move(admitted));
  return out;
}

Dispatch Session::update_locked(ConnectionId from, const AppUpdate& update, std::int64_t ts, std::uint64_t seq) {
  if (app_ != from) throw Error(Errc::NotApp, "only the application may push updates");
  validate(Envelope{seq, update}, bounds_);
  check_seq(from, seq);
  Dispatch out;
  if (update.audience.is_all()) {
    for (const auto& [user, conn] : viewers_) append_frame(out, conn, update);
  } else if (auto it = viewers_.find(*update.audience.user); it != viewers_.end()) {
    append_frame(out, it->second, update);
  }
  ++stats_.app_updates;
  stats_.update_frames += out.frames.size();
  log_.push_back({ts, Envelope{seq, update}});
  return out;
}

Dispatch Session::register_connection(ConnectionId from, const Hello& hello, std::int64_t ts, std::uint64_t seq) {
  std::lock_guard lock(mutex_);
  return register_locked(from, hello, stamp(ts), seq);
}

Dispatch Session::ingest_context(ConnectionId from, const ContextPayload& payload, std::int64_t ts,
                                 std::uint64_t seq) {
  std::lock_guard lock(mutex_);
  return context_locked(from, payload, stamp(ts), seq);
}

Dispatch Session::ingest_event(ConnectionId from, const ViewerEvent& event, std::int64_t ts, std::uint64_t seq) {
  std::lock_guard lock(mutex_);
  return event_locked(from, event, stamp(ts), seq);
}

Dispatch Session::push_app_update(ConnectionId from, const AppUpdate& update, std::int64_t ts, std::uint64_t seq) {
  std::lock_guard lock(mutex_);
  return update_locked(from, update, stamp(ts), seq);
}

Dispatch Session::receive_locked(ConnectionId from, const Envelope& envelope, std::int64_t ts) {
  try {
    ts = stamp(ts);
    switch (envelope.type()) {
      case MsgType::Hello:
        return register_locked(from, std::get<Hello>(envelope.body), ts, envelope.seq);
      case MsgType::Context:
        return context_locked(from, std::get<ContextPayload>(envelope.body), ts, envelope.seq);
      case MsgType::MouseEvent:
        return event_locked(from, std::get<ViewerEvent>(envelope.body), ts, envelope.seq);
      case MsgType::AppUpdate:
        return update_locked(from, std::get<AppUpdate>(envelope.body), ts, envelope.seq);
      case MsgType::Error:
        return {};  // peers may report errors; nothing to route
    }
  } catch (const Error& e) {
    if (e.code() == Errc::MalformedMessage || e.code() == Errc::InvariantViolation) ++stats_.protocol_errors;
    Dispatch out;
    members_.try_emplace(from);
    append_frame(out, from, ErrorBody{std::string(to_string(e.code())), e.detail()});
    return out;
  }
  return {};
}

Dispatch Session::receive(ConnectionId from, const Envelope& envelope, std::int64_t ts) {
  std::lock_guard lock(mutex_);
  return receive_locked(from, envelope, ts);
}

Dispatch Session::receive_frame(ConnectionId from, std::string_view frame, std::int64_t ts) {
  Envelope envelope;
  try {
    envelope = decode(frame, bounds_);
  } catch (const Error& e) {
    std::lock_guard lock(mutex_);
    ++stats_.protocol_errors;
    Dispatch out;
    members_.try_emplace(from);
    append_frame(out, from, ErrorBody{std::string(to_string(e.code())), e.detail()});
    return out;
  }
  std::lock_guard lock(mutex_);
  return receive_locked(from, envelope, ts);
}

std::uint64_t Session::next_outbound_seq(ConnectionId id) {
  std::lock_guard lock(mutex_);
  return members_[id].next_out_seq++;
}

std::string format_replay_line(const ReceiveEntry& entry, const Bounds& bounds) {
  return "{\"ts\":" + std::to_string(entry.server_ts_ms) + ",\"envelope\":" + encode(entry.envelope, bounds) + "}";
}

std::string Session::export_replay() const {
  std::lock_guard lock(mutex_);
  std::string out;
  for (const auto& entry : log_) {
    out += format_replay_line(entry, bounds_);
    out += '\n';
  }
  return out;
}

std::vector<ReceiveEntry> parse_replay(std::string_view jsonl, const Bounds& bounds) {
  std::vector<ReceiveEntry> entries;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    auto end = jsonl.find('\n', pos);
    bool terminated = end != std::string_view::npos;
    if (!terminated) end = jsonl.size();
    auto line = jsonl.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    auto corrupt = [&](const std::string& why) {
      return Error(Errc::CorruptLog, "line " + std::to_string(line_no) + ": " + why);
    };
    try {
      auto obj = json::parse(line);
      if (!obj.is_object() || obj.size() != 2 || !obj.contains("ts") || !obj.contains("envelope")) {
        throw corrupt("expected {\"ts\":int,\"envelope\":{...}}");
      }
      if (!obj["ts"].is_number_integer()) throw corrupt("ts must be an integer");
      entries.push_back({obj["ts"].get<std::int64_t>(), decode(obj["envelope"].dump(), bounds)});
    } catch (const json::exception& e) {
      throw corrupt(e.what());
    } catch (const Error& e) {
      if (e.code() == Errc::CorruptLog) throw;
      throw corrupt(e.what());
    }
    if (!terminated) throw corrupt("truncated (no trailing newline)");
  }
  return entries;
}

void Session::ingest_replay(std::string_view jsonl) {
  auto entries = parse_replay(jsonl, bounds_);
  std::lock_guard lock(mutex_);
  // Pseudo-connection ids live far above anything a transport hands out.
  ConnectionId next_conn = ConnectionId{1} << 62;
  std::size_t line_no = 0;
  for (const auto& entry : entries) {
    ++line_no;
    auto fail = [&](const std::string& why) {
      return Error(Errc::CorruptLog, "entry " + std::to_string(line_no) + ": " + why);
    };
    ConnectionId from = 0;
    try {
      switch (entry.envelope.type()) {
        case MsgType::Hello: {
          from = next_conn++;
          members_.try_emplace(from);
          register_locked(from, std::get<Hello>(entry.envelope.body), stamp(entry.server_ts_ms), entry.envelope.seq);
          continue;
        }
        case MsgType::Context:
        case MsgType::MouseEvent: {
          const auto& user = entry.envelope.type() == MsgType::Context
                                 ? std::get<ContextPayload>(entry.envelope.body).user
                                 : std::get<ViewerEvent>(entry.envelope.body).user;
          auto it = viewers_.find(user);
          if (it == viewers_.end()) throw fail("message from unregistered user '" + user + "'");
          from = it->second;
          break;
        }
        case MsgType::AppUpdate:
          if (!app_) throw fail("app_update without an application");
          from = *app_;
          break;
        case MsgType::Error:
          throw fail("error frames are never logged");
      }
      auto ts = stamp(entry.server_ts_ms);
      if (entry.envelope.type() == MsgType::Context) {
        context_locked(from, std::get<ContextPayload>(entry.envelope.body), ts, entry.envelope.seq);
      } else if (entry.envelope.type() == MsgType::MouseEvent) {
        event_locked(from, std::get<ViewerEvent>(entry.envelope.body), ts, entry.envelope.seq);
      } else {
        update_locked(from, std::get<AppUpdate>(entry.envelope.body), ts, entry.envelope.seq);
      }
    } catch (const Error& e) {
      if (e.code() == Errc::CorruptLog) throw;
      throw fail(e.what());
    }
  }
}

FlatMap Session::context_of(const std::string& user) const {
  std::lock_guard lock(mutex_);
  auto it = context_store_.find(user);
  return it == context_store_.end() ? FlatMap{} : it->second;
}

bool Session::app_connected() const {
  std::lock_guard lock(mutex_);
  return app_.has_value();
}

std::optional<ConnectionId> Session::app_connection() const {
  std::lock_guard lock(mutex_);
  return app_;
}

std::optional<ConnectionId> Session::connection_of(const std::string& user) const {
  std::lock_guard lock(mutex_);
  auto it = viewers_.find(user);
  if (it == viewers_.end()) return std::nullopt;
  return it->second;
}

std::size_t Session::viewer_count() const {
  std::lock_guard lock(mutex_);
  return viewers_.size();
}

std::vector<ReceiveEntry> Session::receive_log() const {
  std::lock_guard lock(mutex_);
  return log_;
}

SessionStats Session::stats() const {
  std::lock_guard lock(mutex_);
  return stats_;
}

std::string encode_admitted(const AdmittedEvent& admitted, std::uint64_t seq) {
  auto body = json::parse(encode(Envelope{seq, admitted.event}));
  body.erase("type");
  body.erase("seq");
  ojson out;
  out["type"] = "admitted";
  out["seq"] = seq;
  out["server_ts_ms"] = admitted.server_ts_ms;
  out["context"] = admitted.context_snapshot;
  out["event"] = body;
  return out.dump();
}

AdmittedEvent decode_admitted(std::string_view frame, const Bounds& bounds) {
  try {
    auto obj = json::parse(frame);
    if (!obj.is_object() || obj.value("type", "") != "admitted") {
      throw Error(Errc::MalformedMessage, "not an admitted frame");
    }
    auto event_obj = obj.at("event");
    event_obj["type"] = "mouse_event";
    event_obj["seq"] = obj.at("seq");
    auto envelope = decode(event_obj.dump(), bounds);
    AdmittedEvent out;
    out.event = std::get<ViewerEvent>(envelope.body);
    out.server_ts_ms = obj.at("server_ts_ms").get<std::int64_t>();
    out.context_snapshot = obj.at("context").get<FlatMap>();
    return out;
  } catch (const json::exception& e) {
    throw Error(Errc::MalformedMessage, e.what());
  }
}

}  // namespace crowdinput
