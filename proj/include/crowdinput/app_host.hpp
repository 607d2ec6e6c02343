#pragma once

// Runs one application on its own thread. The transport posts app inputs and
// clock advances; the host ticks the app, applies them in order and hands
// updates and rejections back through a callback (invoked on the host thread).

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "crowdinput/apps.hpp"
#include "crowdinput/policy.hpp"
#include "crowdinput/relay.hpp"

namespace crowdinput {

struct Rejection {
  std::string user;
  std::string reason;
  std::string detail;
};

struct HostOutput {
  std::int64_t ts_ms = 0;
  std::vector<AppUpdate> updates;
  std::optional<Rejection> rejection;
};

class AppHost {
 public:
  using Sink = std::function<void(HostOutput)>;

  AppHost(std::unique_ptr<apps::App> app, Sink sink, std::optional<policy::ListWatcher> lists = std::nullopt);
  ~AppHost();

  AppHost(const AppHost&) = delete;
  AppHost& operator=(const AppHost&) = delete;

  /// Ticks through every tick time <= ts_ms, then applies the input.
  void post(AppInput input, std::int64_t ts_ms);
  void advance_to(std::int64_t ts_ms);
  /// Blocks until everything posted so far has been processed.
  void drain();
  void stop();

  /// Snapshot of the app state, taken on the host thread.
  std::string state_json();

  std::uint64_t admitted() const { return admitted_; }
  std::uint64_t rejected() const { return rejected_; }

 private:
  struct Advance {
    std::int64_t ts_ms;
  };
  struct Probe {
    std::function<void(apps::App&)> fn;
  };
  using Task = std::variant<AppInput, Advance, Probe>;

  void run();
  void tick_through(std::int64_t ts_ms);
  void apply(const AppInput& input);

  std::unique_ptr<apps::App> app_;
  Sink sink_;
  std::optional<policy::ListWatcher> lists_;
  std::int64_t next_tick_ = 0;

  std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable idle_;
  std::deque<std::pair<Task, std::int64_t>> queue_;
  std::atomic<std::uint64_t> admitted_{0};
  std::atomic<std::uint64_t> rejected_{0};
  bool busy_ = false;
  bool stopping_ = false;
  std::thread worker_;
};

}  // namespace crowdinput
