#include "crowdinput/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "crowdinput/apps.hpp"
#include "crowdinput/deployment.hpp"
#include "crowdinput/relay.hpp"

namespace crowdinput::sim {

double Rng::uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal(double mean, double sd) {
  double u1 = uniform01();
  double u2 = uniform01();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return mean + sd * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Distribution::sample(Rng& rng) const {
  switch (kind) {
    case Kind::Fixed: return a;
    case Kind::Uniform: return rng.uniform(a, b);
    case Kind::Normal: return rng.normal(a, b);
  }
  return a;
}

double Distribution::mean() const { return kind == Kind::Uniform ? (a + b) / 2.0 : a; }

namespace {

[[noreturn]] void invalid(const std::string& why) { throw Error(Errc::ScenarioInvalid, why); }

WorldPoint pair_of(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) invalid(what + " must be [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

Distribution distribution_of(const json& j, bool non_negative, const std::string& what) {
  Distribution d;
  if (j.is_number()) {
    d = Distribution::fixed(j.get<double>());
  } else if (j.is_object()) {
    auto kind = j.value("dist", std::string("fixed"));
    if (kind == "fixed") {
      d = Distribution::fixed(j.at("ms").get<double>());
    } else if (kind == "uniform") {
      d = Distribution::uniform(j.at("lo").get<double>(), j.at("hi").get<double>());
      if (d.b < d.a) invalid(what + ": uniform needs lo <= hi");
    } else if (kind == "normal") {
      d = Distribution::normal(j.at("mean").get<double>(), j.at("sd").get<double>());
      if (d.b < 0.0) invalid(what + ": normal needs sd >= 0");
    } else {
      invalid(what + ": unknown distribution '" + kind + "'");
    }
  } else {
    invalid(what + " must be a number or a distribution object");
  }
  if (non_negative && d.kind != Distribution::Kind::Normal && d.a < 0.0) invalid(what + " must be non-negative");
  return d;
}

Target target_of(const json& j) {
  if (!j.is_object() || j.size() != 1) invalid("target must be a single-key object, got " + j.dump());
  Target t;
  if (j.contains("world")) {
    t.kind = Target::Kind::World;
    t.value = pair_of(j["world"], "world target");
  } else if (j.contains("screen")) {
    t.kind = Target::Kind::Screen;
    t.value = pair_of(j["screen"], "screen target");
  } else if (j.contains("follow")) {
    t.kind = Target::Kind::Follow;
    t.value = pair_of(j["follow"], "follow target");
  } else if (j.contains("random_world")) {
    const auto& r = j["random_world"];
    if (!r.is_array() || r.size() != 4) invalid("random_world must be [x0, y0, x1, y1]");
    t.kind = Target::Kind::RandomWorld;
    t.area = {r[0].get<double>(), r[1].get<double>(), r[2].get<double>(), r[3].get<double>()};
  } else if (j.contains("random_screen")) {
    t.kind = Target::Kind::RandomScreen;
  } else {
    invalid("unknown target " + j.dump());
  }
  return t;
}

Action action_of(const json& j) {
  Action a;
  a.t_ms = j.at("t").get<std::int64_t>();
  a.every_ms = j.value("every_ms", std::int64_t{0});
  a.until_ms = j.value("until_ms", a.t_ms);
  a.jitter_ms = j.value("jitter_ms", std::int64_t{0});
  if (a.t_ms < 0) invalid("action time must be non-negative");
  if (a.every_ms < 0 || a.jitter_ms < 0) invalid("every_ms and jitter_ms must be non-negative");
  if (j.contains("context")) {
    a.kind = Action::Kind::Context;
    a.context = j["context"].get<FlatMap>();
  } else if (j.contains("click")) {
    a.kind = Action::Kind::Click;
    a.path.push_back(target_of(j["click"]));
  } else if (j.contains("gesture")) {
    a.kind = Action::Kind::Gesture;
    const auto& g = j["gesture"];
    for (const auto& p : g.at("path")) a.path.push_back(target_of(p));
    if (a.path.size() < 2) invalid("gesture path needs at least two targets");
    a.duration_ms = g.value("duration_ms", std::int64_t{300});
    if (a.duration_ms < 0) invalid("gesture duration must be non-negative");
  } else {
    invalid("action needs one of context / click / gesture: " + j.dump());
  }
  return a;
}

}  // namespace

Scenario parse_scenario(const json& doc) {
  try {
    if (!doc.is_object()) invalid("scenario must be an object");
    Scenario s;
    s.name = doc.value("name", s.name);
    s.seed = doc.value("seed", s.seed);
    s.duration_ms = doc.value("duration_ms", s.duration_ms);
    if (s.duration_ms <= 0) invalid("duration_ms must be positive");
    if (doc.contains("app")) s.app = doc["app"];
    if (!s.app.is_object()) invalid("app must be an object");
    if (!doc.contains("viewers") || !doc["viewers"].is_array() || doc["viewers"].empty()) {
      invalid("at least one viewer required");
    }
    std::set<std::string> seen;
    for (const auto& v : doc["viewers"]) {
      ViewerSpec vs;
      vs.user = v.at("user").get<std::string>();
      if (vs.user.empty() || vs.user.size() > Bounds{}.max_username) invalid("bad username '" + vs.user + "'");
      if (!seen.insert(vs.user).second) invalid("duplicate viewer '" + vs.user + "'");
      vs.role = v.value("role", vs.role);
      policy::parse_role(vs.role);
      if (v.contains("latency")) vs.latency = distribution_of(v["latency"], true, vs.user + ".latency");
      if (v.contains("report_error")) {
        vs.report_error = distribution_of(v["report_error"], false, vs.user + ".report_error");
      }
      vs.join_ms = v.value("join_ms", std::int64_t{0});
      if (vs.join_ms < 0) invalid("join_ms must be non-negative");
      std::int64_t last_t = vs.join_ms;
      for (const auto& a : v.value("script", json::array())) {
        auto action = action_of(a);
        if (action.t_ms < last_t) invalid(vs.user + ": script must be sorted by time and start after join");
        last_t = action.t_ms;
        if (action.kind == Action::Kind::Context) validate(ContextPayload{vs.user, action.context});
        vs.script.push_back(std::move(action));
      }
      s.viewers.push_back(std::move(vs));
    }
    return s;
  } catch (const json::exception& e) {
    invalid(e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::ScenarioInvalid) throw;
    invalid(e.what());
  }
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) invalid("cannot open scenario " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_scenario(json::parse(ss.str()));
  } catch (const json::parse_error& e) {
    invalid(path + ": " + e.what());
  }
}

json effective_app_config(const Scenario& scenario) {
  json cfg = scenario.app;
  if (!cfg.contains("roles")) cfg["roles"] = json::object();
  for (const auto& v : scenario.viewers) {
    if (v.role != "everyone" && !cfg["roles"].contains(v.user)) cfg["roles"][v.user] = v.role;
  }
  return cfg;
}

// --- built-in scenarios -----------------------------------------------------

namespace {

json dist_json(const Distribution& d) {
  switch (d.kind) {
    case Distribution::Kind::Fixed: return {{"dist", "fixed"}, {"ms", d.a}};
    case Distribution::Kind::Uniform: return {{"dist", "uniform"}, {"lo", d.a}, {"hi", d.b}};
    case Distribution::Kind::Normal: return {{"dist", "normal"}, {"mean", d.a}, {"sd", d.b}};
  }
  return {};
}

json arena_app(WorldPoint velocity) {
  return {{"kind", "arena"},
          {"camera", {{"center", {0.0, 0.0}}, {"extent", {64.0, 32.0}}, {"velocity_per_tick", {velocity.x, velocity.y}}}},
          {"arena", {{"initial_funds", 20.0}}}};
}

}  // namespace

Scenario compensation_scenario(WorldPoint velocity, Distribution latency, Distribution report_error,
                               std::int64_t jitter_ms, std::int64_t duration_ms) {
  json viewer = {{"user", "watcher"},
                 {"latency", dist_json(latency)},
                 {"report_error", dist_json(report_error)},
                 {"script",
                  {{{"t", 0}, {"context", {{"message", "here"}}}},
                   {{"t", 10000},
                    {"every_ms", 500},
                    {"until_ms", duration_ms - jitter_ms},
                    {"jitter_ms", jitter_ms},
                    {"click", {{"follow", {3.0, -2.0}}}}}}}};
  json doc = {{"name", "compensation"},
              {"seed", 7},
              {"duration_ms", duration_ms},
              {"app", arena_app(velocity)},
              {"viewers", json::array({viewer})}};
  return parse_scenario(doc);
}

std::vector<std::string> builtin_names() {
  return {"moving_camera", "moving_camera_jitter", "static_camera", "beyond_horizon", "arena_crowd",
          "poll_grid",     "force_flick",          "canvas_draw"};
}

Scenario builtin_scenario(std::string_view name) {
  if (name == "moving_camera") {
    auto s = compensation_scenario({5.0, 0.0}, Distribution::fixed(1000.0), Distribution::fixed(0.0));
    s.name = "moving_camera";
    return s;
  }
  if (name == "moving_camera_jitter") {
    auto s = compensation_scenario({5.0, 0.0}, Distribution::uniform(200.0, 2000.0),
                                   Distribution::normal(233.0, 66.0), 97);
    s.name = "moving_camera_jitter";
    return s;
  }
  if (name == "beyond_horizon") {
    auto s = compensation_scenario({5.0, 0.0}, Distribution::fixed(12000.0), Distribution::fixed(0.0));
    s.name = "beyond_horizon";
    return s;
  }
  if (name == "static_camera") {
    json viewers = json::array();
    const char* names[] = {"s1", "s2", "s3", "s4"};
    for (int i = 0; i < 4; ++i) {
      viewers.push_back({{"user", names[i]},
                         {"latency", {{"dist", "uniform"}, {"lo", 200}, {"hi", 2000}}},
                         {"report_error", {{"dist", "normal"}, {"mean", 233}, {"sd", 66}}},
                         {"script",
                          {{{"t", 0}, {"context", {{"message", "hi"}}}},
                           {{"t", 2000 + 25 * i},
                            {"every_ms", 400},
                            {"until_ms", 12000 + 25 * i},
                            {"jitter_ms", 50},
                            {"click", {{"random_screen", true}}}}}}});
    }
    json doc = {{"name", "static_camera"},
                {"seed", 11},
                {"duration_ms", 13000},
                {"app", arena_app({0.0, 0.0})},
                {"viewers", viewers}};
    return parse_scenario(doc);
  }
  if (name == "arena_crowd") {
    json viewers = json::array();
    const char* items[] = {"zombie", "skeleton", "slime", "potion", "torch"};
    for (int i = 0; i < 5; ++i) {
      std::string user = "viewer" + std::to_string(i + 1);
      viewers.push_back({{"user", user},
                         {"role", i == 0 ? "mod" : "everyone"},
                         {"latency", {{"dist", "uniform"}, {"lo", 200}, {"hi", 2000}}},
                         {"report_error", {{"dist", "normal"}, {"mean", 233}, {"sd", 66}}},
                         {"script",
                          {{{"t", 100 * i}, {"context", {{"item", items[i]}}}},
                           {{"t", 3000 + 100 * i},
                            {"every_ms", 1500},
                            {"until_ms", 40000},
                            {"jitter_ms", 400},
                            {"click", {{"random_screen", true}}}},
                           {{"t", 41000 + 100 * i}, {"context", {{"message", "gg " + user}}}},
                           {{"t", 42000 + 100 * i},
                            {"every_ms", 2000},
                            {"until_ms", 58000},
                            {"click", {{"follow", {4.0 * (i - 2), 6.0}}}}}}}});
    }
    json app = arena_app({1.0, 0.5});
    app["gate"] = {{"cooldown_ms", 500}};
    app["arena"]["initial_funds"] = 5.0;
    json doc = {{"name", "arena_crowd"}, {"seed", 5}, {"duration_ms", 60000}, {"app", app}, {"viewers", viewers}};
    return parse_scenario(doc);
  }
  if (name == "poll_grid") {
    json viewers = json::array();
    for (int i = 0; i < 6; ++i) {
      viewers.push_back({{"user", "voter" + std::to_string(i)},
                         {"latency", {{"dist", "uniform"}, {"lo", 200}, {"hi", 2000}}},
                         {"script",
                          {{{"t", 500 + 137 * i},
                            {"every_ms", 1700},
                            {"until_ms", 40000},
                            {"click", {{"random_world", {-15, -15, 15, 15}}}}}}}});
    }
    json doc = {{"name", "poll_grid"},
                {"seed", 3},
                {"duration_ms", 45000},
                {"app",
                 {{"kind", "poll"},
                  {"camera", {{"center", {0.0, 0.0}}, {"extent", {64.0, 32.0}}}},
                  {"poll", {{"mode", "grid"}, {"round_ms", 6000}, {"gap_ms", 1000}}}}},
                {"viewers", viewers}};
    return parse_scenario(doc);
  }
  if (name == "force_flick") {
    json viewers = json::array();
    for (int i = 0; i < 4; ++i) {
      double ball = i % 2 == 0 ? -10.0 : 10.0;
      // Opposing pairs per ball keep the balls near their anchors.
      double dx = i < 2 ? 3.0 : -3.0;
      double dy = i % 3 == 0 ? 1.0 : -1.0;
      viewers.push_back({{"user", "flicker" + std::to_string(i)},
                         {"latency", {{"dist", "uniform"}, {"lo", 200}, {"hi", 2000}}},
                         {"script",
                          {{{"t", 3000 + 211 * i},
                            {"every_ms", 2500},
                            {"until_ms", 30000},
                            {"gesture",
                             {{"path", {{{"world", {ball + 0.5, 0.0}}}, {{"world", {ball + 0.5 + dx, dy}}}}},
                              {"duration_ms", 250}}}}}}});
    }
    json doc = {{"name", "force_flick"},
                {"seed", 9},
                {"duration_ms", 32000},
                {"app",
                 {{"kind", "force"},
                  {"camera", {{"center", {0.0, 0.0}}, {"extent", {64.0, 32.0}}}},
                  {"force", {{"round_ms", 5000}, {"gap_ms", 1000}}}}},
                {"viewers", viewers}};
    return parse_scenario(doc);
  }
  if (name == "canvas_draw") {
    json viewers = json::array();
    const char* colors[] = {"blue", "red", "green"};
    for (int i = 0; i < 3; ++i) {
      viewers.push_back(
          {{"user", std::string("artist_") + colors[i]},
           {"latency", {{"dist", "uniform"}, {"lo", 200}, {"hi", 2000}}},
           {"script",
            {{{"t", 100}, {"context", {{"color", colors[i]}}}},
             {{"t", 1000 + 300 * i},
              {"every_ms", 900},
              {"until_ms", 15000},
              {"gesture", {{"path", {{{"random_screen", true}}, {{"random_screen", true}}, {{"random_screen", true}}}},
                           {"duration_ms", 400}}}},
             {{"t", 16000 + 100 * i}, {"context", {{"color", colors[i]}, {"command", "undo"}}}},
             {{"t", 17000}, {"context", {{"color", colors[i]}, {"mode", "control"}}}},
             {{"t", 18000 + 100 * i},
              {"gesture",
               {{"path", {{{"screen", {0.2, 0.2}}}, {{"screen", {0.6, 0.5}}}, {{"screen", {0.2, 0.8}}}}},
                {"duration_ms", 300}}}}}}});
    }
    json doc = {{"name", "canvas_draw"},
                {"seed", 21},
                {"duration_ms", 20000},
                {"app", {{"kind", "canvas"}, {"camera", {{"center", {0.0, 0.0}}, {"extent", {64.0, 32.0}}}}}},
                {"viewers", viewers}};
    return parse_scenario(doc);
  }
  invalid("unknown built-in scenario '" + std::string(name) + "'");
}

// --- running ----------------------------------------------------------------

ErrorStats summarize(std::vector<double> errors) {
  ErrorStats s;
  s.samples = errors.size();
  if (errors.empty()) return s;
  std::sort(errors.begin(), errors.end());
  double total = 0.0;
  for (double e : errors) total += e;
  s.mean = total / static_cast<double>(errors.size());
  auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(errors.size())));
  s.p95 = errors[std::max<std::size_t>(rank, 1) - 1];
  s.max = errors.back();
  return s;
}

namespace {

ojson stats_json(const ErrorStats& s) {
  return {{"samples", s.samples}, {"mean", s.mean}, {"p95", s.p95}, {"max", s.max}};
}

ErrorStats stats_of(const ojson& j) {
  return {j["samples"].get<std::size_t>(), j["mean"].get<double>(), j["p95"].get<double>(), j["max"].get<double>()};
}

ojson points_json(const std::vector<WorldPoint>& pts) {
  ojson out = ojson::array();
  for (const auto& p : pts) out.push_back(ojson::array({p.x, p.y}));
  return out;
}

double mean_error(const std::vector<WorldPoint>& intended, const std::vector<WorldPoint>& resolved) {
  double total = 0.0;
  for (std::size_t i = 0; i < intended.size(); ++i) total += distance(intended[i], resolved[i]);
  return total / static_cast<double>(intended.size());
}

struct Pending {
  std::int64_t send_ms = 0;
  std::size_t viewer = 0;
  std::size_t order = 0;
  std::int64_t start_ms = 0;
  const Action* action = nullptr;  // null for the join hello
};

std::unique_ptr<apps::App> build_app(const json& config) {
  try {
    return apps::make_app(config);
  } catch (const Error& e) {
    throw Error(Errc::ScenarioInvalid, std::string("app config: ") + e.what());
  }
}

}  // namespace

ErrorStats RunResult::compensated() const { return stats_of(report["errors"]["compensated"]); }
ErrorStats RunResult::naive() const { return stats_of(report["errors"]["naive"]); }

RunResult run_scenario(const Scenario& scenario) {
  const auto app_config = effective_app_config(scenario);
  LocalDeployment deployment(build_app(app_config));
  const auto rig = deployment.app().common().camera;
  const auto period = deployment.app().common().camera_buffer.period_ms;
  Rng rng(scenario.seed);

  // Expand scripts into concrete send times.
  std::vector<Pending> pending;
  for (std::size_t v = 0; v < scenario.viewers.size(); ++v) {
    const auto& viewer = scenario.viewers[v];
    std::size_t order = 0;
    pending.push_back({viewer.join_ms, v, order++, viewer.join_ms, nullptr});
    for (const auto& action : viewer.script) {
      std::int64_t t = action.t_ms;
      do {
        std::int64_t start = t;
        if (action.jitter_ms > 0) start += static_cast<std::int64_t>(std::floor(rng.uniform(0.0, double(action.jitter_ms))));
        std::int64_t send = start + action.duration_ms;
        if (send <= scenario.duration_ms) pending.push_back({send, v, order++, start, &action});
        t += action.every_ms;
      } while (action.every_ms > 0 && t < action.until_ms);
    }
  }
  std::stable_sort(pending.begin(), pending.end(), [](const Pending& a, const Pending& b) {
    if (a.send_ms != b.send_ms) return a.send_ms < b.send_ms;
    if (a.viewer != b.viewer) return a.viewer < b.viewer;
    return a.order < b.order;
  });

  std::vector<ConnectionId> conns(scenario.viewers.size(), 0);
  std::vector<std::uint64_t> seqs(scenario.viewers.size(), 1);
  std::uint64_t sent = 0, admitted = 0, rejected = 0, dropped = 0, offscreen = 0, contexts = 0;
  std::map<std::string, std::uint64_t> reasons;
  std::vector<double> comp_errors, naive_errors;
  ojson per_event = ojson::array();

  for (const auto& p : pending) {
    const auto& viewer = scenario.viewers[p.viewer];
    if (!p.action) {
      conns[p.viewer] = deployment.open();
      deployment.submit(conns[p.viewer], Envelope{seqs[p.viewer]++, Hello{Role::Viewer, viewer.user}}, p.send_ms);
      continue;
    }
    const auto& action = *p.action;
    if (action.kind == Action::Kind::Context) {
      deployment.submit(conns[p.viewer], Envelope{seqs[p.viewer]++, ContextPayload{viewer.user, action.context}},
                        p.send_ms);
      ++contexts;
      continue;
    }

    const auto true_latency = std::llround(std::max(0.0, viewer.latency.sample(rng)));
    const auto report_error = std::llround(viewer.report_error.sample(rng));
    const auto reported = std::max<std::int64_t>(0, true_latency + report_error);
    // What this viewer's screen shows at stroke start.
    const CameraState seen{rig.center_at(static_cast<double>(p.start_ms - true_latency), period), rig.extent, 0};

    std::vector<WorldPoint> intended;
    std::vector<NormPoint> screen;
    bool visible = true;
    for (const auto& target : action.path) {
      WorldPoint w;
      NormPoint s;
      switch (target.kind) {
        case Target::Kind::World:
          w = target.value;
          s = to_norm(seen, w);
          break;
        case Target::Kind::RandomWorld:
          w = {rng.uniform(target.area.x0, target.area.x1), rng.uniform(target.area.y0, target.area.y1)};
          s = to_norm(seen, w);
          break;
        case Target::Kind::Follow:
          w = seen.center + target.value;
          s = to_norm(seen, w);
          break;
        case Target::Kind::Screen:
          s = {target.value.x, target.value.y};
          w = to_world(seen, s);
          break;
        case Target::Kind::RandomScreen:
          s = {rng.uniform01(), rng.uniform01()};
          w = to_world(seen, s);
          break;
      }
      visible = visible && s.x >= 0.0 && s.x <= 1.0 && s.y >= 0.0 && s.y <= 1.0;
      intended.push_back(w);
      screen.push_back(s);
    }
    if (!visible) {
      ++offscreen;
      continue;
    }

    ViewerEvent event;
    event.user = viewer.user;
    event.kind = action.kind == Action::Kind::Click ? EventKind::Click : EventKind::Gesture;
    event.points = screen;
    const auto n = screen.size();
    for (std::size_t i = 0; i < n; ++i) {
      event.offsets_ms.push_back(n == 1 ? 0 : action.duration_ms * static_cast<std::int64_t>(i) /
                                                  static_cast<std::int64_t>(n - 1));
    }
    event.latency_ms = reported;
    event.client_ts_ms = p.start_ms;

    deployment.advance_to(p.send_ms);
    const AdmittedEvent preview{event, {}, p.send_ms};
    std::optional<std::vector<WorldPoint>> compensated;
    try {
      compensated = resolve(deployment.app().camera(), preview);
    } catch (const Error& e) {
      if (e.code() != Errc::StaleIntent && e.code() != Errc::EmptyBuffer) throw;
    }
    const auto naive = resolve_naive(deployment.app().camera(), preview);

    auto result = deployment.submit(conns[p.viewer], Envelope{seqs[p.viewer]++, event}, p.send_ms);
    ++sent;
    switch (result.disposition) {
      case Disposition::Admitted: ++admitted; break;
      case Disposition::Rejected: ++rejected; ++reasons[result.reason]; break;
      case Disposition::Dropped:
      case Disposition::None: ++dropped; ++reasons[result.reason.empty() ? "dropped" : result.reason]; break;
    }

    ojson record;
    record["t"] = p.send_ms;
    record["user"] = viewer.user;
    record["kind"] = to_string(event.kind);
    record["latency_ms"] = true_latency;
    record["reported_latency_ms"] = reported;
    record["intended"] = points_json(intended);
    record["naive"] = points_json(naive);
    const double naive_error = mean_error(intended, naive);
    record["naive_error"] = naive_error;
    if (compensated) {
      const double comp_error = mean_error(intended, *compensated);
      record["compensated"] = points_json(*compensated);
      record["compensated_error"] = comp_error;
      comp_errors.push_back(comp_error);
      naive_errors.push_back(naive_error);
    } else {
      record["compensated"] = nullptr;
      record["compensated_error"] = nullptr;
    }
    record["outcome"] = result.disposition == Disposition::Admitted ? std::string("admitted") : result.reason;
    per_event.push_back(std::move(record));
  }
  deployment.finish(scenario.duration_ms);

  RunResult out;
  auto state = deployment.app().state_json();
  ojson report;
  report["scenario"] = scenario.name;
  report["seed"] = scenario.seed;
  report["app"] = std::string(deployment.app().kind());
  report["duration_ms"] = scenario.duration_ms;
  report["viewers"] = scenario.viewers.size();
  report["events"] = {{"sent", sent},
                      {"admitted", admitted},
                      {"rejected", rejected},
                      {"dropped", dropped},
                      {"offscreen", offscreen},
                      {"contexts", contexts}};
  report["reconciled"] = sent == admitted + rejected + dropped;
  report["rejections"] = reasons;
  report["errors"] = {{"compensated", stats_json(summarize(comp_errors))}, {"naive", stats_json(summarize(naive_errors))}};
  report["app_outcome"] = state["state"];
  report["per_event"] = std::move(per_event);
  out.final_state = state.dump();
  out.report = std::move(report);
  out.replay_log = deployment.session().export_replay();
  return out;
}

std::string replay(std::string_view log, const json& app_config) {
  auto entries = parse_replay(log);
  LocalDeployment deployment(apps::make_app(app_config));
  replay_into(deployment, entries);
  return deployment.app().state_json().dump();
}

std::vector<std::string> check_invariants(const Scenario& scenario, const RunResult& result) {
  std::vector<std::string> failures;
  if (result.sent() != result.admitted() + result.rejected() + result.dropped()) {
    failures.push_back("reconciliation: sent != admitted + rejected + dropped");
  }
  auto again = run_scenario(scenario);
  if (again.report.dump() != result.report.dump()) failures.push_back("determinism: rerun produced a different report");
  if (again.replay_log != result.replay_log) failures.push_back("determinism: rerun produced a different replay log");
  try {
    if (replay(result.replay_log, effective_app_config(scenario)) != result.final_state) {
      failures.push_back("replay: final state differs from the recorded one");
    }
  } catch (const Error& e) {
    failures.push_back(std::string("replay: ") + e.what());
  }

  auto app = build_app(effective_app_config(scenario));
  const auto velocity = app->common().camera.velocity_per_tick;
  const bool moving = velocity.x != 0.0 || velocity.y != 0.0;
  double latency_sum = 0.0;
  for (const auto& v : scenario.viewers) latency_sum += v.latency.mean();
  const double mean_latency = latency_sum / static_cast<double>(scenario.viewers.size());
  const auto comp = result.compensated();
  const auto naive = result.naive();
  if (!moving) {
    for (const auto& rec : result.report["per_event"]) {
      if (!rec["compensated_error"].is_null() && rec["compensated_error"] != rec["naive_error"]) {
        failures.push_back("static camera: compensated and naive resolution differ");
        break;
      }
    }
  } else if (mean_latency > static_cast<double>(app->common().camera_buffer.period_ms) && comp.samples > 0 &&
             !(comp.mean < naive.mean)) {
    failures.push_back("dominance: compensated mean error is not below naive");
  }
  return failures;
}

}  // namespace crowdinput::sim
