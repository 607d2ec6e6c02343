#include <doctest.h>

#include <atomic>
#include <random>
#include <thread>

#include "crowdinput/compensation.hpp"
#include "crowdinput/relay.hpp"
#include "support.hpp"

using namespace crowdinput;

namespace {

CameraState cam(std::int64_t ts, double cx = 0.0, double cy = 0.0) { return {{cx, cy}, {64.0, 32.0}, ts}; }

Errc code_of_lookup(const CameraBuffer& b, std::int64_t ts) {
  try {
    b.lookup(ts);
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::CorruptLog;
}

}  // namespace

TEST_CASE("world mapping") {
  CameraState c{{10.0, -4.0}, {64.0, 32.0}, 0};
  CHECK(to_world(c, {0.5, 0.5}) == WorldPoint{10.0, -4.0});
  CHECK(to_world(c, {0.0, 0.0}) == WorldPoint{-22.0, -20.0});
  CHECK(to_world(c, {1.0, 1.0}) == WorldPoint{42.0, 12.0});
  auto n = to_norm(c, {42.0, 12.0});
  CHECK(n.x == 1.0);
  CHECK(n.y == 1.0);
}

TEST_CASE("lookup picks the nearest slot with ties toward the older one") {
  CameraBuffer b;
  for (std::int64_t t = 0; t <= 1000; t += 100) b.push(cam(t, double(t)));
  CHECK(b.lookup(449).snapshot_ts_ms == 400);
  CHECK(b.lookup(450).snapshot_ts_ms == 400);
  CHECK(b.lookup(451).snapshot_ts_ms == 500);
  CHECK(b.lookup(500).snapshot_ts_ms == 500);
  CHECK(b.lookup(0).snapshot_ts_ms == 0);
  CHECK(b.lookup(5000).snapshot_ts_ms == 1000);  // future intents clamp
  CHECK(code_of_lookup(b, -1) == Errc::StaleIntent);
}

TEST_CASE("empty buffer and bad pushes") {
  CameraBuffer b;
  CHECK(code_of_lookup(b, 0) == Errc::EmptyBuffer);
  CHECK_THROWS_AS(b.latest(), Error);
  b.push(cam(100));
  try {
    b.push(cam(100));
    FAIL("duplicate timestamp accepted");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NonMonotonicTimestamp);
  }
  try {
    b.push({{0, 0}, {0.0, 10.0}, 200});
    FAIL("zero extent accepted");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::InvariantViolation);
  }
}

TEST_CASE("capacity and horizon") {
  CameraBuffer b;
  for (std::int64_t i = 0; i < 250; ++i) b.push(cam(i * 100));
  CHECK(b.size() == 100);
  CHECK(*b.latest_ts() - *b.oldest_ts() == 9900);
  auto slots = b.snapshot();
  for (std::size_t i = 1; i < slots.size(); ++i) CHECK(slots[i].snapshot_ts_ms - slots[i - 1].snapshot_ts_ms == 100);
}

TEST_CASE("gap in pushes evicts by time horizon") {
  CameraBuffer b;
  for (std::int64_t i = 0; i < 50; ++i) b.push(cam(i * 100));
  b.push(cam(20000));
  CHECK(b.size() == 1);
  CHECK(code_of_lookup(b, 10000) == Errc::StaleIntent);
}

TEST_CASE("intent time moves back to stroke start for gestures") {
  auto click = testsupport::click_at("a", {0.5, 0.5}, 5000, 1200);
  CHECK(intent_ts(click) == 3800);
  auto stroke = testsupport::stroke_of("a", {{0.1, 0.1}, {0.9, 0.9}}, 5000, 1200, 300);
  CHECK(intent_ts(stroke) == 3500);
}

TEST_CASE("resolve maps every point against one camera state") {
  CameraBuffer b;
  for (std::int64_t t = 0; t <= 3000; t += 100) b.push(cam(t, t / 100.0 * 5.0));  // 5 units per tick
  auto ev = testsupport::stroke_of("a", {{0.5, 0.5}, {0.75, 0.5}}, 3000, 1000, 200);
  auto world = resolve(b, ev);
  // intent = 3000 - 1000 - 200 = 1800 -> center x = 90
  CHECK(world[0] == WorldPoint{90.0, 0.0});
  CHECK(world[1] == WorldPoint{106.0, 0.0});
  auto naive = resolve_naive(b, ev);
  CHECK(naive[0] == WorldPoint{150.0, 0.0});
}

TEST_CASE("naive error is velocity times latency, compensated is zero on tick-aligned clicks") {
  const double v = 5.0;
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    std::int64_t latency = 100 * std::int64_t(1 + rng() % 90);
    std::int64_t send = 10000 + 100 * std::int64_t(rng() % 100);
    CameraBuffer b;
    for (std::int64_t t = 0; t <= send; t += 100) b.push(cam(t, v * double(t) / 100.0));
    // The viewer clicked the centre of what it saw at send - latency.
    WorldPoint intended{v * double(send - latency) / 100.0, 0.0};
    auto ev = testsupport::click_at("a", {0.5, 0.5}, send, latency);
    CHECK(distance(resolve(b, ev)[0], intended) == 0.0);
    WorldPoint live{v * double(send) / 100.0, 0.0};
    CHECK(distance(resolve_naive(b, ev)[0], intended) == doctest::Approx(distance(live, intended)));
  }
}

TEST_CASE("compensated error is bounded by half a period of motion") {
  CameraBuffer b;
  const double v = 5.0;
  for (std::int64_t t = 0; t <= 20000; t += 100) b.push(cam(t, v * double(t) / 100.0));
  std::mt19937_64 rng(5);
  for (int i = 0; i < 500; ++i) {
    std::int64_t latency = 200 + std::int64_t(rng() % 1800);
    std::int64_t send = 12100 + std::int64_t(rng() % 7900);
    WorldPoint intended{v * double(send - latency) / 100.0, 0.0};
    auto ev = testsupport::click_at("a", {0.5, 0.5}, send, latency);
    CHECK(distance(resolve(b, ev)[0], intended) <= 0.5 * v + 1e-9);
  }
}

TEST_CASE("spinner lasts exactly the latency") {
  static_assert(spinner_duration(1234) == 1234);
  CHECK(spinner_duration(0) == 0);
}

TEST_CASE("concurrent readers never see a torn slot") {
  CameraBuffer b;
  b.push(cam(0, 0.0, 0.0));
  std::atomic<bool> done{false};
  std::atomic<int> torn{0};
  std::vector<std::thread> readers;
  for (int r = 0; r < 4; ++r) {
    readers.emplace_back([&] {
      while (!done) {
        auto s = b.latest();
        // Every pushed slot has center == (ts, -ts).
        if (s.center.x != double(s.snapshot_ts_ms) || s.center.y != -double(s.snapshot_ts_ms)) ++torn;
        try {
          auto l = b.lookup(*b.latest_ts());
          if (l.center.x != double(l.snapshot_ts_ms)) ++torn;
        } catch (const Error& e) {
          // The writer may have lapped this reader.
          if (e.code() != Errc::StaleIntent) ++torn;
        }
      }
    });
  }
  for (std::int64_t t = 1; t <= 20000; ++t) b.push(cam(t, double(t), -double(t)));
  done = true;
  for (auto& t : readers) t.join();
  CHECK(torn == 0);
}
