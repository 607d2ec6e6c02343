#include <doctest.h>

#include <random>

#include "crowdinput/apps.hpp"
#include "crowdinput/deployment.hpp"
#include "support.hpp"

using namespace crowdinput;
using namespace crowdinput::apps;
using testsupport::click_at;
using testsupport::stroke_of;

namespace {

void tick_through(App& app, std::int64_t& next, std::int64_t until) {
  for (; next <= until; next += 100) app.tick(next);
}

ArenaApp make_arena(ArenaConfig cfg = {}, WorldPoint velocity = {0, 0}) {
  CommonConfig common;
  common.camera.velocity_per_tick = velocity;
  return ArenaApp(common, cfg);
}

}  // namespace

TEST_CASE("arena: spawn rules and funds") {
  ArenaConfig cfg;
  cfg.initial_funds = 6.0;
  auto arena = make_arena(cfg);
  std::int64_t next = 0;
  tick_through(arena, next, 1000);

  // Camera is 64 x 32 centred at the origin; (0.5,0.5) is the streamer.
  auto too_close = click_at("alice", {0.55, 0.5}, 1000, 0, {{"item", "zombie"}});
  CHECK(arena.handle_event(too_close).reason == "too_close");

  auto far = click_at("alice", {0.9, 0.5}, 1000, 0, {{"item", "zombie"}});
  auto ok = arena.handle_event(far);
  CHECK(ok.admitted);
  REQUIRE(arena.entities().size() == 1);
  CHECK(arena.entities()[0].pos == WorldPoint{0.4 * 64, 0.0});

  auto updates = arena.take_updates();
  REQUIRE(updates.size() == 1);
  CHECK(updates[0].audience == Audience::single("alice"));

  auto broke = click_at("alice", {0.9, 0.9}, 1000, 0, {{"item", "skeleton"}});
  CHECK(arena.handle_event(broke).reason == "insufficient_funds");

  // Non-enemy items may land on the streamer.
  auto torch = click_at("alice", {0.5, 0.5}, 1000, 0, {{"item", "torch"}});
  CHECK(arena.handle_event(torch).admitted);

  CHECK(arena.handle_event(click_at("alice", {0.5, 0.5}, 1000, 0, {{"item", "dragon"}})).reason == "unknown_item");
  CHECK(arena.handle_event(click_at("alice", {0.5, 0.5}, 1000, 0)).reason == "no_action");
  CHECK(arena.handle_event(stroke_of("alice", {{0.1, 0.1}, {0.2, 0.2}}, 1000, 0)).reason == "unsupported_kind");
}

TEST_CASE("arena: messages expire") {
  auto arena = make_arena();
  std::int64_t next = 0;
  tick_through(arena, next, 500);
  CHECK(arena.handle_event(click_at("bob", {0.2, 0.2}, 500, 0, {{"message", "gg"}})).admitted);
  CHECK(arena.messages().size() == 1);
  tick_through(arena, next, 4400);
  CHECK(arena.messages().size() == 1);
  tick_through(arena, next, 4500);
  CHECK(arena.messages().empty());
}

TEST_CASE("arena: enemies walk to the streamer and level up") {
  ArenaConfig cfg;
  cfg.initial_funds = 1000.0;
  cfg.kills_per_level = 2;
  auto arena = make_arena(cfg);
  std::int64_t next = 0;
  tick_through(arena, next, 0);
  CHECK(arena.handle_event(click_at("a", {1.0, 0.5}, 0, 0, {{"item", "slime"}})).admitted);
  CHECK(arena.handle_event(click_at("a", {0.0, 0.5}, 0, 0, {{"item", "slime"}})).admitted);
  arena.take_updates();
  tick_through(arena, next, 10000);
  CHECK(arena.entities().empty());
  CHECK(arena.kills() == 2);
  CHECK(arena.level() == 2);
  auto updates = arena.take_updates();
  REQUIRE_FALSE(updates.empty());
  CHECK(updates.back().payload.at("level") == "2");
}

TEST_CASE("arena: inverse accrual splits the shared rate") {
  ArenaConfig cfg;
  cfg.accrual = policy::AccrualPolicy::inverse_viewers(10.0);
  auto arena = make_arena(cfg);
  arena.viewer_joined({"a", 0});
  arena.viewer_joined({"b", 0});
  std::int64_t next = 0;
  tick_through(arena, next, 1000);
  CHECK(arena.accounts().at("a").balance == doctest::Approx(5.0));
  CHECK(arena.accounts().at("b").balance == doctest::Approx(5.0));
}

TEST_CASE("arena property: random events keep spawn distance and conserve funds") {
  ArenaConfig cfg;
  cfg.initial_funds = 3.0;
  auto arena = make_arena(cfg, {0.7, -0.3});
  std::mt19937_64 rng(41);
  const char* items[] = {"zombie", "skeleton", "slime", "potion", "torch", "dragon", ""};
  std::int64_t next = 0;
  for (int u = 0; u < 6; ++u) arena.viewer_joined({"u" + std::to_string(u), 0});
  for (int i = 0; i < 1000; ++i) {
    std::int64_t now = 2000 + i * 37;
    tick_through(arena, next, now);
    FlatMap ctx;
    if (auto item = items[rng() % 7]; *item) ctx["item"] = item;
    auto ev = click_at("u" + std::to_string(rng() % 6), {double(rng() % 1001) / 1000, double(rng() % 1001) / 1000},
                       now, std::int64_t(rng() % 1500), ctx);
    arena.handle_event(ev);
  }
  for (const auto& e : arena.spawn_history()) {
    if (e.enemy) REQUIRE(distance(e.spawn_pos, e.streamer_at_spawn) >= cfg.min_spawn_distance);
  }
  for (const auto& [user, acc] : arena.accounts()) {
    double total = arena.initial_funds();
    for (const auto& l : arena.ledger().at(user)) total += l.amount;
    CHECK(total == acc.balance);
    CHECK(acc.balance >= 0.0);
  }
}

TEST_CASE("canvas: strokes, colours and per-user undo/clear") {
  CanvasApp canvas({}, {});
  std::int64_t next = 0;
  tick_through(canvas, next, 1000);
  CHECK(canvas.handle_event(stroke_of("a", {{0.1, 0.1}, {0.2, 0.2}}, 1000, 0, 100, {{"color", "red"}})).admitted);
  CHECK(canvas.handle_event(stroke_of("b", {{0.3, 0.3}, {0.4, 0.4}}, 1000, 0)).admitted);
  CHECK(canvas.handle_event(stroke_of("a", {{0.5, 0.5}, {0.6, 0.6}}, 1000, 0)).admitted);
  CHECK(canvas.handle_event(click_at("a", {0.5, 0.5}, 1000, 0)).reason == "unsupported_kind");
  REQUIRE(canvas.strokes().size() == 3);
  CHECK(canvas.strokes()[0].color == "red");
  CHECK(canvas.strokes()[1].color == "#000000");

  canvas.handle_context({{"a", {{"command", "undo"}}}, 1100});
  REQUIRE(canvas.strokes().size() == 2);
  CHECK(canvas.strokes()[0].user == "a");
  CHECK(canvas.strokes()[1].user == "b");
  canvas.handle_context({{"a", {{"command", "clear"}}}, 1200});
  REQUIRE(canvas.strokes().size() == 1);
  CHECK(canvas.strokes()[0].user == "b");
}

TEST_CASE("canvas property: a user's undo/clear never touches others") {
  CanvasApp canvas({}, {});
  std::mt19937_64 rng(77);
  std::int64_t next = 0;
  tick_through(canvas, next, 100);
  for (int i = 0; i < 1000; ++i) {
    std::string user = "u" + std::to_string(rng() % 5);
    auto before = canvas.strokes();
    switch (rng() % 4) {
      case 0: canvas.handle_context({{user, {{"command", "undo"}}}, 100}); break;
      case 1: canvas.handle_context({{user, {{"command", "clear"}}}, 100}); break;
      default: canvas.handle_event(stroke_of(user, {{0.1, 0.2}, {0.3, 0.4}}, 100, 0)); continue;
    }
    std::vector<std::uint64_t> others_before, others_after;
    for (const auto& s : before) if (s.user != user) others_before.push_back(s.id);
    for (const auto& s : canvas.strokes()) if (s.user != user) others_after.push_back(s.id);
    REQUIRE(others_before == others_after);
  }
}

TEST_CASE("canvas control mode decodes chevrons into commands") {
  CanvasApp canvas({}, {});
  std::int64_t next = 0;
  tick_through(canvas, next, 1000);
  auto ev = stroke_of("a", {{0.2, 0.2}, {0.6, 0.5}, {0.2, 0.8}}, 1000, 0, 300, {{"mode", "control"}});
  CHECK(canvas.handle_event(ev).admitted);
  CHECK(canvas.strokes().empty());
  auto updates = canvas.take_updates();
  REQUIRE(updates.size() == 1);
  CHECK(updates[0].payload.at("command") == "next");
}

TEST_CASE("poll: rounds open, close with a winner and reject late or occupied votes") {
  PollConfig cfg;
  cfg.round_ms = 1000;
  cfg.gap_ms = 500;
  PollApp poll({}, cfg);
  std::int64_t next = 0;
  tick_through(poll, next, 0);
  REQUIRE(poll.round().has_value());
  CHECK_THROWS_AS(poll.open_round(0), Error);
  // Grid spans [-15,15]^2 inside a 64x32 view centred at 0.
  auto centre = click_at("a", {0.5, 0.5}, 100, 0);
  CHECK(poll.handle_event(centre).admitted);
  CHECK(poll.handle_event(click_at("b", {0.5, 0.5}, 100, 0)).admitted);
  CHECK(poll.handle_event(click_at("c", {0.01, 0.5}, 100, 0)).reason == "missed_region");
  tick_through(poll, next, 1000);
  CHECK_FALSE(poll.round().has_value());
  REQUIRE(poll.results().size() == 1);
  CHECK(poll.results()[0].region == 4u);
  CHECK(poll.board()[4] == "O");
  CHECK(poll.handle_event(click_at("a", {0.5, 0.5}, 1200, 0)).reason == "round_closed");
  tick_through(poll, next, 1500);
  REQUIRE(poll.round().has_value());
  CHECK(poll.handle_event(click_at("a", {0.5, 0.5}, 1600, 0)).reason == "occupied");
}

TEST_CASE("labeled poll reports the option label") {
  PollConfig cfg;
  cfg.mode = PollConfig::Mode::Labeled;
  cfg.purpose = "upgrade";
  cfg.regions = {{-32, -16, 0, 16}, {0, -16, 32, 16}};
  cfg.labels = {"sword", "shield"};
  cfg.round_ms = 1000;
  PollApp poll({}, cfg);
  std::int64_t next = 0;
  tick_through(poll, next, 0);
  poll.handle_event(click_at("a", {0.9, 0.5}, 10, 0));
  tick_through(poll, next, 1000);
  REQUIRE(poll.results().size() == 1);
  CHECK(poll.results()[0].label == "shield");
}

TEST_CASE("force: impulses apply only at close and are clamped") {
  ForceConfig cfg;
  cfg.round_ms = 1000;
  cfg.max_impulse = 5.0;
  ForceApp force({}, cfg);
  std::int64_t next = 0;
  tick_through(force, next, 0);
  // Ball 0 sits at world (-10, 0) = screen (22/64, 0.5).
  auto flick = stroke_of("a", {{22.0 / 64, 0.5}, {22.0 / 64 + 30.0 / 64, 0.5}}, 200, 0, 100);
  CHECK(force.handle_event(flick).admitted);
  tick_through(force, next, 900);
  CHECK(force.balls()[0].vel == WorldPoint{0, 0});
  tick_through(force, next, 1000);
  CHECK(force.last_impulses()[0] == WorldPoint{5.0, 0.0});
  CHECK(force.balls()[0].vel == WorldPoint{5.0, 0.0});
  CHECK(clamp_magnitude({3, 4}, 10) == WorldPoint{3, 4});
  CHECK(norm(clamp_magnitude({30, 40}, 10)) == doctest::Approx(10.0));
}

TEST_CASE("make_app reads every kind and refuses bad configs") {
  for (const char* kind : {"canvas", "arena", "poll", "force"}) CHECK(make_app({{"kind", kind}})->kind() == kind);
  CHECK_THROWS_AS(make_app({{"kind", "chess"}}), Error);
  CHECK_THROWS_AS(make_app({{"kind", "arena"}, {"camera", {{"extent", {0, 1}}}}}), Error);
  CHECK_THROWS_AS(make_app({{"kind", "poll"}, {"poll", {{"mode", "labeled"}}}}), Error);
  auto poll = make_app(nlohmann::json::parse(R"({"kind":"poll","poll":{"mode":"labeled","purpose":"npc",
      "options":[{"rect":[-10,-10,0,10],"label":"knight"},{"rect":[0,-10,10,10],"label":"wizard"}]}})"));
  CHECK(poll->kind() == "poll");
}

TEST_CASE("gate and roles from config apply before the app handler") {
  auto app = make_app(nlohmann::json::parse(
      R"({"kind":"arena","gate":{"allowed_roles":["mod"],"banned":["troll"]},"roles":{"boss":"mod","troll":"mod"}})"));
  app->tick(0);
  CHECK(app->handle_event(click_at("pleb", {0.5, 0.5}, 0, 0, {{"message", "hi"}})).reason == "role_gate");
  CHECK(app->handle_event(click_at("troll", {0.5, 0.5}, 0, 0, {{"message", "hi"}})).reason == "banned");
  CHECK(app->handle_event(click_at("boss", {0.5, 0.5}, 0, 0, {{"message", "hi"}})).admitted);
}

TEST_CASE("stale events are rejected before policy") {
  auto app = make_app({{"kind", "arena"}});
  CHECK(app->handle_event(click_at("a", {0.5, 0.5}, 0, 0)).reason == "no_camera");
  for (std::int64_t t = 0; t <= 20000; t += 100) app->tick(t);
  CHECK(app->handle_event(click_at("a", {0.5, 0.5}, 20000, 10001, {{"message", "x"}})).reason == "stale_intent");
}

TEST_CASE("deployment replay reproduces state byte-identically") {
  auto config = nlohmann::json{{"kind", "arena"},
                               {"camera", {{"velocity_per_tick", {1.0, 0.0}}}},
                               {"arena", {{"initial_funds", 10.0}}}};
  LocalDeployment live(make_app(config));
  std::mt19937_64 rng(5);
  std::vector<ConnectionId> conns;
  std::vector<std::uint64_t> seqs(4, 1);
  for (int v = 0; v < 4; ++v) {
    conns.push_back(live.open());
    live.submit(conns[v], Envelope{seqs[v]++, Hello{Role::Viewer, "v" + std::to_string(v)}}, 10 * v);
  }
  std::int64_t now = 100;
  for (int i = 0; i < 500; ++i) {
    now += std::int64_t(rng() % 200);
    int v = int(rng() % 4);
    const std::string user = "v" + std::to_string(v);
    if (rng() % 5 == 0) {
      live.submit(conns[v], Envelope{seqs[v]++, ContextPayload{user, {{"item", rng() % 2 ? "slime" : "torch"}}}}, now);
    } else {
      ViewerEvent ev{user, EventKind::Click, {{double(rng() % 100) / 100, 0.5}}, {0}, std::int64_t(rng() % 2000), 0};
      live.submit(conns[v], Envelope{seqs[v]++, ev}, now);
    }
  }
  live.finish(now + 1000);
  auto log = live.session().export_replay();

  LocalDeployment replayed(make_app(config));
  replay_into(replayed, parse_replay(log));
  CHECK(replayed.app().state_json().dump() == live.app().state_json().dump());
  CHECK(replayed.session().export_replay() == log);

  LocalDeployment empty(make_app(config));
  replay_into(empty, {});
  CHECK(empty.app().state_json().dump() == make_app(config)->state_json().dump());
}
