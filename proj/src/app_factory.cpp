#include "crowdinput/apps.hpp"

namespace crowdinput::apps {

using json = nlohmann::json;

namespace {

WorldPoint point_of(const json& j) {
  if (!j.is_array() || j.size() != 2) throw Error(Errc::ConfigInvalid, "expected [x, y], got " + j.dump());
  return {j[0].get<double>(), j[1].get<double>()};
}

Rect rect_of(const json& j) {
  if (!j.is_array() || j.size() != 4) throw Error(Errc::ConfigInvalid, "expected [x0, y0, x1, y1], got " + j.dump());
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

CommonConfig common_of(const json& cfg) {
  CommonConfig c;
  if (cfg.contains("camera_buffer")) {
    const auto& b = cfg["camera_buffer"];
    read(b, "capacity", c.camera_buffer.capacity);
    read(b, "period_ms", c.camera_buffer.period_ms);
  }
  if (cfg.contains("camera")) {
    const auto& cam = cfg["camera"];
    if (cam.contains("center")) c.camera.start_center = point_of(cam["center"]);
    if (cam.contains("extent")) {
      auto e = point_of(cam["extent"]);
      c.camera.extent = {e.x, e.y};
    }
    if (cam.contains("velocity_per_tick")) c.camera.velocity_per_tick = point_of(cam["velocity_per_tick"]);
  }
  if (!(c.camera.extent.w > 0.0) || !(c.camera.extent.h > 0.0)) {
    throw Error(Errc::ConfigInvalid, "camera extent must be positive");
  }
  if (cfg.contains("gate")) {
    const auto& g = cfg["gate"];
    if (g.contains("allowed_roles")) {
      c.gate.allowed_roles.clear();
      for (const auto& r : g["allowed_roles"]) c.gate.allowed_roles.insert(policy::parse_role(r.get<std::string>()));
    }
    read(g, "cooldown_ms", c.gate.cooldown_ms);
    read(g, "global_cooldown_ms", c.gate.global_cooldown_ms);
    if (g.contains("banned")) c.gate.banned = g["banned"].get<std::set<std::string>>();
    if (c.gate.cooldown_ms < 0 || c.gate.global_cooldown_ms < 0) {
      throw Error(Errc::ConfigInvalid, "cooldowns must be non-negative");
    }
  }
  if (cfg.contains("roles")) c.roles = policy::parse_roles(cfg["roles"].dump());
  return c;
}

policy::AccrualPolicy accrual_of(const json& j) {
  policy::AccrualPolicy p;
  auto mode = j.value("mode", std::string("inverse_viewers"));
  if (mode == "constant") {
    p.mode = policy::AccrualPolicy::Mode::ConstantRate;
  } else if (mode == "inverse_viewers") {
    p.mode = policy::AccrualPolicy::Mode::InverseViewers;
  } else {
    throw Error(Errc::ConfigInvalid, "unknown accrual mode '" + mode + "'");
  }
  p.rate_per_s = j.value("rate_per_s", 10.0);
  if (!(p.rate_per_s > 0.0)) throw Error(Errc::ConfigInvalid, "accrual rate must be positive");
  if (j.contains("balance_cap") && !j["balance_cap"].is_null()) p.balance_cap = j["balance_cap"].get<double>();
  return p;
}

std::unique_ptr<App> make_arena(CommonConfig common, const json& j) {
  ArenaConfig c;
  if (j.contains("catalog")) {
    c.catalog.clear();
    for (const auto& item : j["catalog"].items()) {
      c.catalog[item.key()] = {item.value().at("cost").get<double>(), item.value().value("enemy", false)};
    }
  }
  read(j, "min_spawn_distance", c.min_spawn_distance);
  read(j, "message_ttl_ms", c.message_ttl_ms);
  if (j.contains("accrual")) c.accrual = accrual_of(j["accrual"]);
  read(j, "initial_funds", c.initial_funds);
  read(j, "kills_per_level", c.kills_per_level);
  read(j, "enemy_speed_per_tick", c.enemy_speed_per_tick);
  read(j, "kill_radius", c.kill_radius);
  return std::make_unique<ArenaApp>(std::move(common), std::move(c));
}

std::unique_ptr<App> make_poll(CommonConfig common, const json& j) {
  PollConfig c;
  auto mode = j.value("mode", std::string("grid"));
  if (mode == "grid") {
    c.mode = PollConfig::Mode::Grid;
  } else if (mode == "labeled") {
    c.mode = PollConfig::Mode::Labeled;
  } else {
    throw Error(Errc::ConfigInvalid, "unknown poll mode '" + mode + "'");
  }
  read(j, "purpose", c.purpose);
  if (j.contains("area")) c.area = rect_of(j["area"]);
  read(j, "rows", c.rows);
  read(j, "cols", c.cols);
  if (j.contains("options")) {
    for (const auto& opt : j["options"]) {
      c.regions.push_back(rect_of(opt.at("rect")));
      c.labels.push_back(opt.at("label").get<std::string>());
    }
  }
  read(j, "round_ms", c.round_ms);
  read(j, "gap_ms", c.gap_ms);
  read(j, "lock_first", c.lock_first);
  read(j, "symbol", c.symbol);
  return std::make_unique<PollApp>(std::move(common), std::move(c));
}

std::unique_ptr<App> make_force(CommonConfig common, const json& j) {
  ForceConfig c;
  if (j.contains("balls")) {
    c.balls.clear();
    for (const auto& b : j["balls"]) c.balls.push_back(point_of(b));
  }
  read(j, "snap_radius", c.snap_radius);
  read(j, "round_ms", c.round_ms);
  read(j, "gap_ms", c.gap_ms);
  read(j, "max_impulse", c.max_impulse);
  read(j, "damping", c.damping);
  return std::make_unique<ForceApp>(std::move(common), std::move(c));
}

std::unique_ptr<App> make_canvas(CommonConfig common, const json& j) {
  CanvasConfig c;
  read(j, "default_color", c.default_color);
  read(j, "accept_threshold", c.accept_threshold);
  if (j.contains("templates_file")) {
    c.extra_templates = gesture::Recognizer::load_templates(j["templates_file"].get<std::string>());
  }
  if (j.contains("templates")) c.extra_templates = gesture::Recognizer::parse_templates(j["templates"].dump());
  return std::make_unique<CanvasApp>(std::move(common), std::move(c));
}

}  // namespace

std::unique_ptr<App> make_app(const json& config) {
  try {
    if (!config.is_object()) throw Error(Errc::ConfigInvalid, "app config must be an object");
    auto kind = config.value("kind", std::string("arena"));
    auto common = common_of(config);
    const json section = config.contains(kind) ? config[kind] : json::object();
    if (kind == "arena") return make_arena(std::move(common), section);
    if (kind == "poll") return make_poll(std::move(common), section);
    if (kind == "force") return make_force(std::move(common), section);
    if (kind == "canvas") return make_canvas(std::move(common), section);
    throw Error(Errc::ConfigInvalid, "unknown app kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw Error(Errc::ConfigInvalid, e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::ConfigInvalid) throw;
    throw Error(Errc::ConfigInvalid, e.what());
  }
}

}  // namespace crowdinput::apps
