#pragma once

// Headless reference applications. Each is a single-threaded state machine
// driven by a fixed 100 ms tick plus the relay's app inputs.

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "crowdinput/aggregation.hpp"
#include "crowdinput/compensation.hpp"
#include "crowdinput/gesture.hpp"
#include "crowdinput/policy.hpp"
#include "crowdinput/relay.hpp"

namespace crowdinput::apps {

using ojson = nlohmann::ordered_json;

/// Viewport that pans at a constant velocity: center(t) = start + v * t / period.
struct CameraRig {
  WorldPoint start_center{0.0, 0.0};
  Extent extent{64.0, 32.0};
  WorldPoint velocity_per_tick{0.0, 0.0};

  WorldPoint center_at(double t_ms, std::int64_t period_ms) const;
};

struct CommonConfig {
  CameraBufferConfig camera_buffer;
  CameraRig camera;
  policy::GateConfig gate;
  policy::RoleTable roles;
};

struct EventOutcome {
  bool admitted = false;
  std::string reason;  // empty when admitted
  std::string detail;

  static EventOutcome ok() { return {true, {}, {}}; }
  static EventOutcome reject(std::string reason, std::string detail = {}) {
    return {false, std::move(reason), std::move(detail)};
  }
};

class App {
 public:
  explicit App(CommonConfig common);
  virtual ~App() = default;

  App(const App&) = delete;
  App& operator=(const App&) = delete;

  virtual std::string_view kind() const = 0;

  void viewer_joined(const ViewerJoined& joined);
  virtual void handle_context(const ContextUpdate& update);
  /// Resolves the event against the camera history, runs the admission
  /// pipeline, then the app-specific handler.
  EventOutcome handle_event(const AdmittedEvent& event);
  /// Records the camera snapshot for `now_ms`, then advances app state.
  void tick(std::int64_t now_ms);

  std::vector<AppUpdate> take_updates();
  ojson state_json() const;

  const CameraBuffer& camera() const { return camera_; }
  const CommonConfig& common() const { return common_; }
  std::int64_t now_ms() const { return now_ms_; }
  std::int64_t viewer_count() const { return static_cast<std::int64_t>(viewers_.size()); }
  void set_content_filter(policy::ContentFilter filter) { filter_ = std::move(filter); }
  policy::GateConfig& gate() { return common_.gate; }
  policy::RoleTable& roles() { return common_.roles; }

 protected:
  virtual void on_viewer_joined(const std::string& /*user*/, std::int64_t /*now_ms*/) {}
  virtual EventOutcome on_event(const AdmittedEvent& event, std::span<const WorldPoint> world) = 0;
  virtual void on_tick(std::int64_t now_ms) = 0;
  virtual ojson app_state_json() const = 0;

  void emit(AppUpdate update) { pending_updates_.push_back(std::move(update)); }
  CameraState live_camera() const { return camera_.latest(); }

 private:
  CommonConfig common_;
  CameraBuffer camera_;
  policy::CooldownState cooldowns_;
  policy::ContentFilter filter_;
  std::vector<std::string> viewers_;
  std::vector<AppUpdate> pending_updates_;
  std::int64_t now_ms_ = 0;
  bool ticked_ = false;
};

// --- canvas ---------------------------------------------------------------

struct CanvasConfig {
  std::string default_color = "#000000";
  double accept_threshold = 0.7;
  std::vector<gesture::Template> extra_templates;
};

struct CanvasStroke {
  std::uint64_t id = 0;
  std::string user;
  std::string color;
  std::vector<WorldPoint> points;
};

/// Shared annotation canvas. Gestures draw; the context keys "command"
/// (undo / clear) act on the sender's own strokes. With context "mode" set to
/// "control", gestures are decoded into next/previous commands instead.
class CanvasApp final : public App {
 public:
  CanvasApp(CommonConfig common, CanvasConfig config);

  std::string_view kind() const override { return "canvas"; }
  void handle_context(const ContextUpdate& update) override;

  const std::vector<CanvasStroke>& strokes() const { return strokes_; }
  const std::vector<gesture::GestureCommand>& commands() const { return commands_; }

 protected:
  EventOutcome on_event(const AdmittedEvent& event, std::span<const WorldPoint> world) override;
  void on_tick(std::int64_t) override {}
  ojson app_state_json() const override;

 private:
  void undo(const std::string& user);
  void clear(const std::string& user);

  CanvasConfig config_;
  gesture::Recognizer recognizer_;
  std::vector<CanvasStroke> strokes_;
  std::map<std::string, std::vector<std::uint64_t>> undo_stacks_;
  std::vector<gesture::GestureCommand> commands_;
  std::uint64_t next_id_ = 1;
};

// --- arena ----------------------------------------------------------------

struct EntityKind {
  double cost = 0.0;
  bool enemy = false;
};

struct ArenaConfig {
  std::map<std::string, EntityKind> catalog{
      {"zombie", {5.0, true}}, {"skeleton", {8.0, true}}, {"slime", {3.0, true}},
      {"potion", {2.0, false}}, {"torch", {1.0, false}}};
  double min_spawn_distance = 10.0;
  std::int64_t message_ttl_ms = 4000;
  policy::AccrualPolicy accrual = policy::AccrualPolicy::inverse_viewers(10.0);
  double initial_funds = 0.0;
  int kills_per_level = 10;
  double enemy_speed_per_tick = 0.5;
  double kill_radius = 2.0;
};

struct Entity {
  std::uint64_t id = 0;
  std::string kind;
  bool enemy = false;
  std::string spawner;
  WorldPoint pos;
  WorldPoint spawn_pos;
  WorldPoint streamer_at_spawn;
  std::int64_t spawned_at_ms = 0;
};

struct Marker {
  std::string user;
  std::string text;
  WorldPoint pos;
  std::int64_t expiry_ts_ms = 0;
};

/// Signed funds movement on one account, in the order applied.
struct LedgerEntry {
  std::int64_t ts_ms = 0;
  double amount = 0.0;  // +credit, -spend
};

/// Spawn-versus-streamer arena with a moving camera. Context "item" names a
/// catalog entry to spawn at the click; context "message" drops a short-lived
/// text marker. Enemies walk toward the streamer and are defeated on contact.
class ArenaApp final : public App {
 public:
  ArenaApp(CommonConfig common, ArenaConfig config);

  std::string_view kind() const override { return "arena"; }

  WorldPoint streamer_pos() const;
  const std::vector<Entity>& entities() const { return entities_; }
  const std::vector<Entity>& spawn_history() const { return spawn_history_; }
  const std::vector<Marker>& messages() const { return messages_; }
  const std::map<std::string, policy::FundsAccount>& accounts() const { return accounts_; }
  const std::map<std::string, std::vector<LedgerEntry>>& ledger() const { return ledger_; }
  double initial_funds() const { return config_.initial_funds; }
  int kills() const { return kills_; }
  int level() const { return 1 + kills_ / config_.kills_per_level; }
  const ArenaConfig& config() const { return config_; }

 protected:
  void on_viewer_joined(const std::string& user, std::int64_t now_ms) override;
  EventOutcome on_event(const AdmittedEvent& event, std::span<const WorldPoint> world) override;
  void on_tick(std::int64_t now_ms) override;
  ojson app_state_json() const override;

 private:
  policy::FundsAccount& account(const std::string& user, std::int64_t now_ms);

  ArenaConfig config_;
  std::vector<Entity> entities_;
  std::vector<Entity> spawn_history_;
  std::vector<Marker> messages_;
  std::map<std::string, policy::FundsAccount> accounts_;
  std::map<std::string, std::vector<LedgerEntry>> ledger_;
  std::uint64_t next_id_ = 1;
  int kills_ = 0;
};

// --- poll -----------------------------------------------------------------

struct PollConfig {
  enum class Mode { Grid, Labeled };

  Mode mode = Mode::Grid;
  std::string purpose = "tictactoe";   // "tictactoe", "upgrade", "npc", ...
  Rect area{-15.0, -15.0, 15.0, 15.0};  // grid mode
  std::size_t rows = 3;
  std::size_t cols = 3;
  std::vector<Rect> regions;            // labeled mode
  std::vector<std::string> labels;
  std::int64_t round_ms = 10000;
  std::int64_t gap_ms = 2000;
  bool lock_first = false;
  std::string symbol = "O";
};

struct PollResult {
  std::uint64_t round = 0;
  std::size_t region = 0;
  std::string label;
  std::int64_t closed_at_ms = 0;
};

/// Spatial poll on a schedule: grid mode places a symbol on the most-voted
/// free cell; labeled mode applies the winning option (upgrade or NPC pick).
class PollApp final : public App {
 public:
  PollApp(CommonConfig common, PollConfig config);

  std::string_view kind() const override { return "poll"; }

  const std::optional<PollRound>& round() const { return round_; }
  const std::vector<PollResult>& results() const { return results_; }
  const std::vector<std::string>& board() const { return board_; }
  const std::map<std::string, int>& applied() const { return applied_; }
  const RegionMap& regions() const { return regions_; }

  /// Opens a round immediately; throws InvariantViolation if one is active.
  void open_round(std::int64_t now_ms);

 protected:
  EventOutcome on_event(const AdmittedEvent& event, std::span<const WorldPoint> world) override;
  void on_tick(std::int64_t now_ms) override;
  ojson app_state_json() const override;

 private:
  void close_round(std::int64_t now_ms);
  std::string label_of(std::size_t region) const;

  PollConfig config_;
  RegionMap regions_;
  std::optional<PollRound> round_;
  std::uint64_t round_no_ = 0;
  std::int64_t next_open_ms_ = 0;
  std::vector<PollResult> results_;
  std::vector<std::string> board_;
  std::map<std::string, int> applied_;
};

// --- force ----------------------------------------------------------------

struct ForceConfig {
  std::vector<WorldPoint> balls{{-10.0, 0.0}, {10.0, 0.0}};
  double snap_radius = 2.0;
  std::int64_t round_ms = 8000;
  std::int64_t gap_ms = 2000;
  double max_impulse = 10.0;
  double damping = 0.95;  // velocity multiplier per tick
};

struct Ball {
  WorldPoint pos;
  WorldPoint vel;  // world units per tick
};

/// Rescales `v` to magnitude `max` when longer; direction is preserved.
WorldPoint clamp_magnitude(WorldPoint v, double max);

/// Ball-flick poll: viewers drag from a ball to prime a force; at round close
/// the clamped mean force of each ball is added to its velocity.
class ForceApp final : public App {
 public:
  ForceApp(CommonConfig common, ForceConfig config);

  std::string_view kind() const override { return "force"; }

  const std::vector<Ball>& balls() const { return balls_; }
  const std::optional<ForceRound>& round() const { return round_; }
  const std::vector<WorldPoint>& last_impulses() const { return last_impulses_; }

  void open_round(std::int64_t now_ms);

 protected:
  EventOutcome on_event(const AdmittedEvent& event, std::span<const WorldPoint> world) override;
  void on_tick(std::int64_t now_ms) override;
  ojson app_state_json() const override;

 private:
  void close_round(std::int64_t now_ms);

  ForceConfig config_;
  std::vector<Ball> balls_;
  std::optional<ForceRound> round_;
  std::uint64_t round_no_ = 0;
  std::int64_t next_open_ms_ = 0;
  std::vector<WorldPoint> last_impulses_;
};

// --- construction from config ---------------------------------------------

/// Builds an app from a JSON config object:
/// {"kind": "canvas"|"arena"|"poll"|"force", "camera_buffer": {...},
///  "camera": {...}, "gate": {...}, "roles": {...}, "<kind>": {...}}.
/// Throws ConfigInvalid.
std::unique_ptr<App> make_app(const nlohmann::json& config);

ojson to_json(WorldPoint p);

}  // namespace crowdinput::apps
