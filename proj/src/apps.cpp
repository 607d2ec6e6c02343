#include "crowdinput/apps.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace crowdinput::apps {

ojson to_json(WorldPoint p) { return ojson::array({p.x, p.y}); }

namespace {

std::string format_funds(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

const std::string* context_value(const AdmittedEvent& event, const std::string& key) {
  auto it = event.context_snapshot.find(key);
  return it == event.context_snapshot.end() || it->second.empty() ? nullptr : &it->second;
}

}  // namespace

WorldPoint CameraRig::center_at(double t_ms, std::int64_t period_ms) const {
  const double ticks = t_ms / static_cast<double>(period_ms);
  return {start_center.x + velocity_per_tick.x * ticks, start_center.y + velocity_per_tick.y * ticks};
}

// --- App ------------------------------------------------------------------

App::App(CommonConfig common) : common_(std::move(common)), camera_(common_.camera_buffer) {}

void App::viewer_joined(const ViewerJoined& joined) {
  if (std::find(viewers_.begin(), viewers_.end(), joined.user) == viewers_.end()) viewers_.push_back(joined.user);
  on_viewer_joined(joined.user, joined.server_ts_ms);
}

void App::handle_context(const ContextUpdate&) {}

EventOutcome App::handle_event(const AdmittedEvent& event) {
  std::vector<WorldPoint> world;
  try {
    world = resolve(camera_, event);
  } catch (const Error& e) {
    if (e.code() == Errc::StaleIntent) return EventOutcome::reject("stale_intent", e.detail());
    if (e.code() == Errc::EmptyBuffer) return EventOutcome::reject("no_camera", e.detail());
    throw;
  }
  auto verdict = policy::admit(event, common_.gate, common_.roles, cooldowns_, event.server_ts_ms, filter_);
  if (!verdict.admitted) return EventOutcome::reject(std::string(policy::to_string(verdict.reason)), verdict.detail);
  return on_event(event, world);
}

void App::tick(std::int64_t now_ms) {
  now_ms_ = now_ms;
  ticked_ = true;
  const auto period = common_.camera_buffer.period_ms;
  camera_.push({common_.camera.center_at(static_cast<double>(now_ms), period), common_.camera.extent, now_ms});
  on_tick(now_ms);
}

std::vector<AppUpdate> App::take_updates() {
  std::vector<AppUpdate> out;
  out.swap(pending_updates_);
  return out;
}

ojson App::state_json() const {
  ojson out;
  out["kind"] = kind();
  out["now_ms"] = now_ms_;
  if (ticked_) {
    auto cam = camera_.latest();
    out["camera"] = {{"center", to_json(cam.center)}, {"extent", ojson::array({cam.extent.w, cam.extent.h})}};
  }
  out["viewers"] = viewers_;
  ojson cooldowns = ojson::object();
  for (const auto& [user, ts] : cooldowns_.last_admit) cooldowns[user] = ts;
  out["last_admit"] = std::move(cooldowns);
  out["state"] = app_state_json();
  return out;
}

// --- CanvasApp --------------------------------------------------------------

CanvasApp::CanvasApp(CommonConfig common, CanvasConfig config)
    : App(std::move(common)), config_(std::move(config)), recognizer_(config_.accept_threshold) {
  for (const auto& t : config_.extra_templates) recognizer_.add_template(t);
}

void CanvasApp::handle_context(const ContextUpdate& update) {
  auto it = update.payload.data.find("command");
  if (it == update.payload.data.end()) return;
  if (it->second == "undo") {
    undo(update.payload.user);
  } else if (it->second == "clear") {
    clear(update.payload.user);
  }
}

void CanvasApp::undo(const std::string& user) {
  auto stack = undo_stacks_.find(user);
  if (stack == undo_stacks_.end() || stack->second.empty()) return;
  auto id = stack->second.back();
  stack->second.pop_back();
  std::erase_if(strokes_, [&](const CanvasStroke& s) { return s.id == id; });
}

void CanvasApp::clear(const std::string& user) {
  std::erase_if(strokes_, [&](const CanvasStroke& s) { return s.user == user; });
  undo_stacks_.erase(user);
}

EventOutcome CanvasApp::on_event(const AdmittedEvent& event, std::span<const WorldPoint> world) {
  if (event.event.kind != EventKind::Gesture) return EventOutcome::reject("unsupported_kind", "canvas takes strokes");
  if (auto mode = context_value(event, "mode"); mode && *mode == "control") {
    auto decoded = recognizer_.classify(std::span<const NormPoint>(event.event.points));
    commands_.push_back(decoded);
    if (decoded.command != gesture::Command::Unrecognized) {
      emit({{{"command", std::string(gesture::to_string(decoded.command))}, {"user", event.event.user}},
            Audience::all()});
    }
    return EventOutcome::ok();
  }
  const auto* color = context_value(event, "color");
  CanvasStroke stroke{next_id_++, event.event.user, color ? *color : config_.default_color,
                      std::vector<WorldPoint>(world.begin(), world.end())};
  undo_stacks_[stroke.user].push_back(stroke.id);
  strokes_.push_back(std::move(stroke));
  return EventOutcome::ok();
}

ojson CanvasApp::app_state_json() const {
  ojson strokes = ojson::array();
  for (const auto& s : strokes_) {
    ojson pts = ojson::array();
    for (const auto& p : s.points) pts.push_back(to_json(p));
    strokes.push_back({{"id", s.id}, {"user", s.user}, {"color", s.color}, {"points", std::move(pts)}});
  }
  ojson commands = ojson::array();
  for (const auto& c : commands_) {
    commands.push_back({{"command", gesture::to_string(c.command)}, {"score", c.score}});
  }
  return {{"strokes", std::move(strokes)}, {"commands", std::move(commands)}};
}

// --- ArenaApp ---------------------------------------------------------------

ArenaApp::ArenaApp(CommonConfig common, ArenaConfig config) : App(std::move(common)), config_(std::move(config)) {
  if (config_.kills_per_level < 1) throw Error(Errc::ConfigInvalid, "kills_per_level must be at least 1");
}

WorldPoint ArenaApp::streamer_pos() const { return camera().empty() ? common().camera.start_center : live_camera().center; }

policy::FundsAccount& ArenaApp::account(const std::string& user, std::int64_t now_ms) {
  auto [it, inserted] = accounts_.try_emplace(user, policy::FundsAccount{user, config_.initial_funds, now_ms});
  if (inserted) ledger_[user];
  return it->second;
}

void ArenaApp::on_viewer_joined(const std::string& user, std::int64_t now_ms) { account(user, now_ms); }

void ArenaApp::on_tick(std::int64_t now_ms) {
  const auto viewers = std::max<std::int64_t>(1, viewer_count());
  for (auto& [user, acc] : accounts_) {
    if (now_ms < acc.last_accrual_ts_ms) continue;  // joined after this tick's timestamp
    double credit = policy::accrual_credit(acc, config_.accrual, viewers, now_ms);
    acc = policy::accrue(acc, config_.accrual, viewers, now_ms);
    if (credit != 0.0) ledger_[user].push_back({now_ms, credit});
  }

  const auto streamer = streamer_pos();
  const int level_before = level();
  for (auto& e : entities_) {
    if (!e.enemy) continue;
    auto to_streamer = streamer - e.pos;
    double d = norm(to_streamer);
    if (d <= config_.enemy_speed_per_tick) {
      e.pos = streamer;
    } else {
      e.pos = e.pos + to_streamer * (config_.enemy_speed_per_tick / d);
    }
  }
  auto defeated = std::erase_if(entities_, [&](const Entity& e) {
    return e.enemy && distance(e.pos, streamer) <= config_.kill_radius;
  });
  kills_ += static_cast<int>(defeated);
  if (level() > level_before) emit({{{"level", std::to_string(level())}}, Audience::all()});

  std::erase_if(messages_, [&](const Marker& m) { return m.expiry_ts_ms <= now_ms; });
}

EventOutcome ArenaApp::on_event(const AdmittedEvent& event, std::span<const WorldPoint> world) {
  if (event.event.kind != EventKind::Click) return EventOutcome::reject("unsupported_kind", "arena takes clicks");
  const auto& user = event.event.user;
  const auto now = event.server_ts_ms;
  const auto pos = world.front();

  if (const auto* item = context_value(event, "item")) {
    auto kind = config_.catalog.find(*item);
    if (kind == config_.catalog.end()) return EventOutcome::reject("unknown_item", *item);
    const auto streamer = streamer_pos();
    // Checked before spending, so a rejected enemy costs nothing.
    if (kind->second.enemy && distance(pos, streamer) < config_.min_spawn_distance) {
      return EventOutcome::reject("too_close", "enemy " + std::to_string(distance(pos, streamer)) + " from streamer");
    }
    auto& acc = account(user, now);
    try {
      acc = policy::spend(acc, kind->second.cost);
    } catch (const Error& e) {
      return EventOutcome::reject("insufficient_funds", e.detail());
    }
    ledger_[user].push_back({now, -kind->second.cost});
    Entity entity{next_id_++, *item, kind->second.enemy, user, pos, pos, streamer, now};
    entities_.push_back(entity);
    spawn_history_.push_back(entity);
    emit({{{"balance", format_funds(acc.balance)}}, Audience::single(user)});
    return EventOutcome::ok();
  }
  if (const auto* text = context_value(event, "message")) {
    messages_.push_back({user, *text, pos, now + config_.message_ttl_ms});
    return EventOutcome::ok();
  }
  return EventOutcome::reject("no_action", "select an item or write a message first");
}

ojson ArenaApp::app_state_json() const {
  ojson entities = ojson::array();
  for (const auto& e : entities_) {
    entities.push_back({{"id", e.id},
                        {"kind", e.kind},
                        {"enemy", e.enemy},
                        {"spawner", e.spawner},
                        {"pos", to_json(e.pos)},
                        {"spawn_pos", to_json(e.spawn_pos)},
                        {"spawned_at_ms", e.spawned_at_ms}});
  }
  ojson messages = ojson::array();
  for (const auto& m : messages_) {
    messages.push_back({{"user", m.user}, {"text", m.text}, {"pos", to_json(m.pos)}, {"expiry_ts_ms", m.expiry_ts_ms}});
  }
  ojson accounts = ojson::object();
  for (const auto& [user, acc] : accounts_) {
    accounts[user] = {{"balance", acc.balance}, {"last_accrual_ts_ms", acc.last_accrual_ts_ms}};
  }
  return {{"streamer", to_json(streamer_pos())},
          {"kills", kills_},
          {"level", level()},
          {"spawned_total", spawn_history_.size()},
          {"entities", std::move(entities)},
          {"messages", std::move(messages)},
          {"accounts", std::move(accounts)}};
}

// --- PollApp ----------------------------------------------------------------

namespace {

RegionMap make_regions(const PollConfig& config) {
  if (config.mode == PollConfig::Mode::Grid) return RegionMap::grid(config.area, config.rows, config.cols);
  return RegionMap(config.regions, config.labels);
}

}  // namespace

PollApp::PollApp(CommonConfig common, PollConfig config)
    : App(std::move(common)), config_(std::move(config)), regions_(make_regions(config_)) {
  if (config_.round_ms <= 0) throw Error(Errc::ConfigInvalid, "poll round_ms must be positive");
  if (config_.mode == PollConfig::Mode::Grid) board_.assign(regions_.size(), "");
}

std::string PollApp::label_of(std::size_t region) const {
  if (region < regions_.labels().size()) return regions_.labels()[region];
  return std::to_string(region);
}

void PollApp::open_round(std::int64_t now_ms) {
  if (round_) throw Error(Errc::InvariantViolation, "a poll round is already active");
  if (config_.mode == PollConfig::Mode::Grid &&
      std::none_of(board_.begin(), board_.end(), [](const std::string& s) { return s.empty(); })) {
    std::fill(board_.begin(), board_.end(), "");
    emit({{{"board", "reset"}}, Audience::all()});
  }
  round_.emplace(regions_, now_ms + config_.round_ms, config_.lock_first);
  ++round_no_;
  emit({{{"round", "open"}, {"purpose", config_.purpose}}, Audience::all()});
}

void PollApp::close_round(std::int64_t now_ms) {
  try {
    auto winner = round_->close_poll();
    if (config_.mode == PollConfig::Mode::Grid) {
      board_[winner] = config_.symbol;
    } else {
      ++applied_[label_of(winner)];
    }
    results_.push_back({round_no_, winner, label_of(winner), now_ms});
    emit({{{"round", "closed"}, {"winner", std::to_string(winner)}, {"label", label_of(winner)}}, Audience::all()});
  } catch (const Error& e) {
    if (e.code() != Errc::NoVotes) throw;
    emit({{{"round", "closed"}}, Audience::all()});
  }
  round_.reset();
  next_open_ms_ = now_ms + config_.gap_ms;
}

void PollApp::on_tick(std::int64_t now_ms) {
  if (round_ && now_ms >= round_->deadline_ms()) close_round(now_ms);
  if (!round_ && now_ms >= next_open_ms_) open_round(now_ms);
}

EventOutcome PollApp::on_event(const AdmittedEvent& event, std::span<const WorldPoint> world) {
  if (event.event.kind != EventKind::Click) return EventOutcome::reject("unsupported_kind", "polls take clicks");
  if (!round_) return EventOutcome::reject("round_closed", "no poll is open");
  const auto point = world.front();
  if (config_.mode == PollConfig::Mode::Grid) {
    if (auto cell = regions_.region_at(point); cell && !board_[*cell].empty()) {
      return EventOutcome::reject("occupied", "cell " + std::to_string(*cell) + " is taken");
    }
  }
  try {
    switch (round_->cast_vote(event.event.user, point, event.server_ts_ms)) {
      case VoteOutcome::Counted: return EventOutcome::ok();
      case VoteOutcome::MissedRegion: return EventOutcome::reject("missed_region", "click outside every option");
      case VoteOutcome::Locked: return EventOutcome::reject("vote_locked", "first vote stands");
    }
  } catch (const Error& e) {
    if (e.code() == Errc::RoundClosed) return EventOutcome::reject("round_closed", e.detail());
    throw;
  }
  return EventOutcome::ok();
}

ojson PollApp::app_state_json() const {
  ojson out;
  out["purpose"] = config_.purpose;
  out["round_no"] = round_no_;
  if (round_) {
    out["round"] = {{"deadline_ms", round_->deadline_ms()}, {"counts", round_->counts()}, {"votes", round_->votes()}};
  } else {
    out["round"] = nullptr;
  }
  out["next_open_ms"] = next_open_ms_;
  if (!board_.empty()) out["board"] = board_;
  out["applied"] = applied_;
  ojson results = ojson::array();
  for (const auto& r : results_) {
    results.push_back({{"round", r.round}, {"region", r.region}, {"label", r.label}, {"closed_at_ms", r.closed_at_ms}});
  }
  out["results"] = std::move(results);
  return out;
}

// --- ForceApp ---------------------------------------------------------------

WorldPoint clamp_magnitude(WorldPoint v, double max) {
  double len = norm(v);
  if (len <= max || len == 0.0) return v;
  return {v.x * max / len, v.y * max / len};
}

ForceApp::ForceApp(CommonConfig common, ForceConfig config) : App(std::move(common)), config_(std::move(config)) {
  if (config_.balls.empty()) throw Error(Errc::ConfigInvalid, "force app needs at least one ball");
  if (!(config_.max_impulse > 0.0)) throw Error(Errc::ConfigInvalid, "max_impulse must be positive");
  for (const auto& p : config_.balls) balls_.push_back({p, {0.0, 0.0}});
  last_impulses_.assign(balls_.size(), {0.0, 0.0});
}

void ForceApp::open_round(std::int64_t now_ms) {
  if (round_) throw Error(Errc::InvariantViolation, "a force round is already active");
  std::vector<WorldPoint> anchors;
  for (const auto& b : balls_) anchors.push_back(b.pos);
  round_.emplace(std::move(anchors), config_.snap_radius, now_ms + config_.round_ms);
  ++round_no_;
  emit({{{"round", "open"}}, Audience::all()});
}

void ForceApp::close_round(std::int64_t now_ms) {
  auto outcome = round_->close_force();
  for (std::size_t i = 0; i < balls_.size(); ++i) {
    auto impulse = clamp_magnitude(outcome.mean[i], config_.max_impulse);
    balls_[i].vel = balls_[i].vel + impulse;
    last_impulses_[i] = impulse;
  }
  round_.reset();
  next_open_ms_ = now_ms + config_.gap_ms;
  emit({{{"round", "closed"}}, Audience::all()});
}

void ForceApp::on_tick(std::int64_t now_ms) {
  for (auto& b : balls_) {
    b.pos = b.pos + b.vel;
    b.vel = b.vel * config_.damping;
  }
  if (round_ && now_ms >= round_->deadline_ms()) close_round(now_ms);
  if (!round_ && now_ms >= next_open_ms_) open_round(now_ms);
}

EventOutcome ForceApp::on_event(const AdmittedEvent& event, std::span<const WorldPoint> world) {
  if (event.event.kind != EventKind::Gesture) return EventOutcome::reject("unsupported_kind", "drag from a ball");
  if (!round_) return EventOutcome::reject("round_closed", "no force round is open");
  try {
    round_->prime_force(event.event.user, world, event.server_ts_ms);
  } catch (const Error& e) {
    if (e.code() == Errc::RoundClosed) return EventOutcome::reject("round_closed", e.detail());
    if (e.code() == Errc::NoAnchor) return EventOutcome::reject("no_anchor", e.detail());
    throw;
  }
  return EventOutcome::ok();
}

ojson ForceApp::app_state_json() const {
  ojson balls = ojson::array();
  for (const auto& b : balls_) balls.push_back({{"pos", to_json(b.pos)}, {"vel", to_json(b.vel)}});
  ojson impulses = ojson::array();
  for (const auto& i : last_impulses_) impulses.push_back(to_json(i));
  ojson out;
  out["round_no"] = round_no_;
  if (round_) {
    ojson primes = ojson::object();
    for (const auto& [user, p] : round_->primes()) primes[user] = {{"anchor", p.anchor}, {"vector", to_json(p.vector)}};
    out["round"] = {{"deadline_ms", round_->deadline_ms()}, {"primes", std::move(primes)}};
  } else {
    out["round"] = nullptr;
  }
  out["next_open_ms"] = next_open_ms_;
  out["balls"] = std::move(balls);
  out["last_impulses"] = std::move(impulses);
  return out;
}

}  // namespace crowdinput::apps
