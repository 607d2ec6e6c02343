#include "crowdinput/deployment.hpp"

namespace crowdinput {

LocalDeployment::LocalDeployment(std::unique_ptr<apps::App> app, Bounds bounds)
    : session_(bounds), app_(std::move(app)) {
  session_.connect(app_conn_);
  session_.register_connection(app_conn_, Hello{Role::App, std::nullopt}, 0, app_seq_);
}

ConnectionId LocalDeployment::open() {
  auto id = next_conn_++;
  session_.connect(id);
  return id;
}

void LocalDeployment::flush_updates(std::int64_t ts) {
  for (auto& update : app_->take_updates()) {
    auto dispatch = session_.push_app_update(app_conn_, update, ts, ++app_seq_);
    for (auto& f : dispatch.frames) frames_.push_back(std::move(f));
  }
}

void LocalDeployment::advance_to(std::int64_t ts) {
  const auto period = app_->common().camera_buffer.period_ms;
  while (next_tick_ <= ts) {
    app_->tick(next_tick_);
    flush_updates(next_tick_);
    next_tick_ += period;
  }
}

SubmitResult LocalDeployment::deliver(ConnectionId from, Dispatch dispatch) {
  SubmitResult result;
  for (auto& f : dispatch.frames) {
    if (f.to == from) {
      if (const auto* err = std::get_if<ErrorBody>(&f.message.body)) {
        result = {Disposition::Dropped, err->code};
      }
    }
    frames_.push_back(std::move(f));
  }
  for (const auto& input : dispatch.app_inputs) {
    if (const auto* admitted = std::get_if<AdmittedEvent>(&input)) {
      auto outcome = app_->handle_event(*admitted);
      if (outcome.admitted) {
        result = {Disposition::Admitted, {}};
      } else {
        result = {Disposition::Rejected, outcome.reason};
        auto seq = session_.next_outbound_seq(from);
        frames_.push_back({from, Envelope{seq, ErrorBody{outcome.reason, outcome.detail}}});
      }
      flush_updates(admitted->server_ts_ms);
    } else if (const auto* ctx = std::get_if<ContextUpdate>(&input)) {
      app_->handle_context(*ctx);
      flush_updates(ctx->server_ts_ms);
    } else if (const auto* joined = std::get_if<ViewerJoined>(&input)) {
      app_->viewer_joined(*joined);
      flush_updates(joined->server_ts_ms);
    }
  }
  return result;
}

SubmitResult LocalDeployment::submit(ConnectionId from, const Envelope& envelope, std::int64_t ts) {
  advance_to(ts);
  return deliver(from, session_.receive(from, envelope, ts));
}

void LocalDeployment::finish(std::int64_t end_ts) {
  advance_to(end_ts);
  auto dispatch = session_.push_app_update(app_conn_, AppUpdate{{{"session", "end"}}, Audience::all()}, end_ts,
                                           ++app_seq_);
  for (auto& f : dispatch.frames) frames_.push_back(std::move(f));
}

std::vector<Outbound> LocalDeployment::take_frames() {
  std::vector<Outbound> out;
  out.swap(frames_);
  return out;
}

void replay_into(LocalDeployment& deployment, const std::vector<ReceiveEntry>& entries) {
  std::size_t index = 0;
  for (const auto& entry : entries) {
    ++index;
    auto fail = [&](const std::string& why) {
      return Error(Errc::CorruptLog, "entry " + std::to_string(index) + ": " + why);
    };
    switch (entry.envelope.type()) {
      case MsgType::Hello: {
        const auto& hello = std::get<Hello>(entry.envelope.body);
        if (hello.role == Role::App) {
          deployment.advance_to(entry.server_ts_ms);
          break;  // the deployment's own app is already registered
        }
        auto conn = deployment.open();
        auto r = deployment.submit(conn, entry.envelope, entry.server_ts_ms);
        if (r.disposition == Disposition::Dropped) throw fail("hello rejected: " + r.reason);
        break;
      }
      case MsgType::Context:
      case MsgType::MouseEvent: {
        const auto& user = entry.envelope.type() == MsgType::Context
                               ? std::get<ContextPayload>(entry.envelope.body).user
                               : std::get<ViewerEvent>(entry.envelope.body).user;
        auto conn = deployment.session().connection_of(user);
        if (!conn) throw fail("message from unregistered user '" + user + "'");
        auto r = deployment.submit(*conn, entry.envelope, entry.server_ts_ms);
        if (r.disposition == Disposition::Dropped) throw fail("relay refused entry: " + r.reason);
        break;
      }
      case MsgType::AppUpdate: {
        // Outputs of the app; re-driving the app regenerates them. The end
        // marker comes from finish(), not the app.
        const auto& update = std::get<AppUpdate>(entry.envelope.body);
        if (update.payload == FlatMap{{"session", "end"}}) {
          deployment.finish(entry.server_ts_ms);
        } else {
          deployment.advance_to(entry.server_ts_ms);
        }
        break;
      }
      case MsgType::Error:
        throw fail("error frames are never logged");
    }
  }
  deployment.take_frames();
}

}  // namespace crowdinput
