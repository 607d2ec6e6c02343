#include "crowdinput/app_host.hpp"

#include <future>

namespace crowdinput {

AppHost::AppHost(std::unique_ptr<apps::App> app, Sink sink, std::optional<policy::ListWatcher> lists)
    : app_(std::move(app)), sink_(std::move(sink)), lists_(std::move(lists)) {
  worker_ = std::thread([this] { run(); });
}

AppHost::~AppHost() { stop(); }

void AppHost::post(AppInput input, std::int64_t ts_ms) {
  {
    std::lock_guard lock(mutex_);
    queue_.emplace_back(std::move(input), ts_ms);
  }
  wake_.notify_one();
}

void AppHost::advance_to(std::int64_t ts_ms) {
  {
    std::lock_guard lock(mutex_);
    queue_.emplace_back(Advance{ts_ms}, ts_ms);
  }
  wake_.notify_one();
}

void AppHost::drain() {
  std::unique_lock lock(mutex_);
  idle_.wait(lock, [&] { return (queue_.empty() && !busy_) || stopping_; });
}

void AppHost::stop() {
  {
    std::lock_guard lock(mutex_);
    if (stopping_) return;
    stopping_ = true;
  }
  wake_.notify_all();
  idle_.notify_all();
  if (worker_.joinable()) worker_.join();
}

std::string AppHost::state_json() {
  std::promise<std::string> result;
  auto future = result.get_future();
  {
    std::lock_guard lock(mutex_);
    queue_.emplace_back(Probe{[&](apps::App& app) { result.set_value(app.state_json().dump()); }}, 0);
  }
  wake_.notify_one();
  return future.get();
}

void AppHost::tick_through(std::int64_t ts_ms) {
  const auto period = app_->common().camera_buffer.period_ms;
  while (next_tick_ <= ts_ms) {
    if (lists_) {
      auto roles = app_->roles();
      auto banned = app_->gate().banned;
      if (lists_->poll(roles, banned)) {
        app_->roles() = std::move(roles);
        app_->gate().banned = std::move(banned);
      }
    }
    app_->tick(next_tick_);
    auto updates = app_->take_updates();
    if (!updates.empty()) sink_({next_tick_, std::move(updates), std::nullopt});
    next_tick_ += period;
  }
}

void AppHost::apply(const AppInput& input) {
  HostOutput out;
  if (const auto* admitted = std::get_if<AdmittedEvent>(&input)) {
    out.ts_ms = admitted->server_ts_ms;
    auto outcome = app_->handle_event(*admitted);
    if (outcome.admitted) {
      ++admitted_;
    } else {
      ++rejected_;
      out.rejection = Rejection{admitted->event.user, outcome.reason, outcome.detail};
    }
  } else if (const auto* ctx = std::get_if<ContextUpdate>(&input)) {
    out.ts_ms = ctx->server_ts_ms;
    app_->handle_context(*ctx);
  } else if (const auto* joined = std::get_if<ViewerJoined>(&input)) {
    out.ts_ms = joined->server_ts_ms;
    app_->viewer_joined(*joined);
  }
  out.updates = app_->take_updates();
  if (!out.updates.empty() || out.rejection) sink_(std::move(out));
}

void AppHost::run() {
  for (;;) {
    std::pair<Task, std::int64_t> item;
    {
      std::unique_lock lock(mutex_);
      wake_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      item = std::move(queue_.front());
      queue_.pop_front();
      busy_ = true;
    }
    if (auto* probe = std::get_if<Probe>(&item.first)) {
      probe->fn(*app_);
    } else {
      tick_through(item.second);
      if (auto* input = std::get_if<AppInput>(&item.first)) apply(*input);
    }
    {
      std::lock_guard lock(mutex_);
      busy_ = false;
      if (queue_.empty()) idle_.notify_all();
    }
  }
}

}  // namespace crowdinput
