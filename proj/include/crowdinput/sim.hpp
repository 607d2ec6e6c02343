#pragma once

// Deterministic multi-viewer simulation on a virtual clock. Synthetic viewers
// watch the application through their own broadcast delay, act on what they
// see, and report a (possibly wrong) latency. The report compares where each
// action was meant to land against compensated and naive resolution.

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "crowdinput/aggregation.hpp"
#include "crowdinput/compensation.hpp"
#include "crowdinput/protocol.hpp"

namespace crowdinput::sim {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

/// mt19937_64 with hand-rolled transforms so draws are identical across
/// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform01();  // [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  double normal(double mean, double sd);  // Box-Muller

 private:
  std::mt19937_64 engine_;
};

struct Distribution {
  enum class Kind { Fixed, Uniform, Normal };

  Kind kind = Kind::Fixed;
  double a = 0.0;  // value | lo | mean
  double b = 0.0;  // -     | hi | sd

  static Distribution fixed(double v) { return {Kind::Fixed, v, 0.0}; }
  static Distribution uniform(double lo, double hi) { return {Kind::Uniform, lo, hi}; }
  static Distribution normal(double mean, double sd) { return {Kind::Normal, mean, sd}; }

  double sample(Rng& rng) const;
  double mean() const;
};

/// What a synthetic viewer aims at, evaluated against the camera it sees.
struct Target {
  enum class Kind { World, Screen, Follow, RandomWorld, RandomScreen };

  Kind kind = Kind::Screen;
  WorldPoint value;  // world point | screen point | offset from seen center
  Rect area;         // RandomWorld bounds
};

struct Action {
  enum class Kind { Context, Click, Gesture };

  Kind kind = Kind::Click;
  std::int64_t t_ms = 0;
  // Repetition: t, t+every, ... while < until; each occurrence shifted by a
  // seeded offset in [0, jitter).
  std::int64_t every_ms = 0;
  std::int64_t until_ms = 0;
  std::int64_t jitter_ms = 0;
  FlatMap context;
  std::vector<Target> path;  // 1 for clicks, >= 2 for gestures
  std::int64_t duration_ms = 0;
};

struct ViewerSpec {
  std::string user;
  std::string role = "everyone";
  Distribution latency = Distribution::fixed(1000.0);
  Distribution report_error = Distribution::fixed(0.0);
  std::int64_t join_ms = 0;
  std::vector<Action> script;
};

struct Scenario {
  std::string name = "scenario";
  std::uint64_t seed = 1;
  std::int64_t duration_ms = 10000;
  json app = json::object();
  std::vector<ViewerSpec> viewers;
};

/// Throws ScenarioInvalid.
Scenario parse_scenario(const json& doc);
Scenario load_scenario(const std::string& path);

/// Names accepted by builtin_scenario().
std::vector<std::string> builtin_names();
/// Throws ScenarioInvalid for unknown names.
Scenario builtin_scenario(std::string_view name);

/// Moving-camera click scenario used by the compensation checks: one viewer
/// per latency value clicking a fixed offset from the camera centre it sees,
/// every 500 ms (plus seeded jitter when jitter_ms > 0).
Scenario compensation_scenario(WorldPoint velocity_per_tick, Distribution latency, Distribution report_error,
                               std::int64_t jitter_ms = 0, std::int64_t duration_ms = 30000);

/// App config with scenario viewer roles merged into "roles".
json effective_app_config(const Scenario& scenario);

struct ErrorStats {
  std::size_t samples = 0;
  double mean = 0.0;
  double p95 = 0.0;
  double max = 0.0;
};

ErrorStats summarize(std::vector<double> errors);

struct RunResult {
  ojson report;
  std::string replay_log;
  std::string final_state;

  std::uint64_t sent() const { return report["events"]["sent"].get<std::uint64_t>(); }
  std::uint64_t admitted() const { return report["events"]["admitted"].get<std::uint64_t>(); }
  std::uint64_t rejected() const { return report["events"]["rejected"].get<std::uint64_t>(); }
  std::uint64_t dropped() const { return report["events"]["dropped"].get<std::uint64_t>(); }
  ErrorStats compensated() const;
  ErrorStats naive() const;
};

/// Throws ScenarioInvalid (e.g. a bad app config).
RunResult run_scenario(const Scenario& scenario);

/// Re-drives a fresh app built from `app_config` through a replay log and
/// returns its final state JSON. Throws CorruptLog.
std::string replay(std::string_view log, const json& app_config);

/// Invariant checks behind `simcli run --assert`; returns failure messages.
std::vector<std::string> check_invariants(const Scenario& scenario, const RunResult& result);

}  // namespace crowdinput::sim
