#pragma once

// Shared generators for the unit and acceptance tests.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "crowdinput/gesture.hpp"
#include "crowdinput/protocol.hpp"
#include "crowdinput/relay.hpp"
#include "crowdinput/sim.hpp"

namespace testsupport {

using namespace crowdinput;

inline std::string random_name(std::mt19937_64& rng, std::size_t max_len) {
  static const std::string alphabet = "abcdefghijklmnopqrstuvwxyz0123456789_ \"\\/\xc3\xa9";
  std::uniform_int_distribution<std::size_t> len(1, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::string out;
  auto n = len(rng);
  while (out.size() < n) {
    char c = alphabet[pick(rng)];
    // Keep multi-byte sequences whole.
    if (static_cast<unsigned char>(c) >= 0x80) {
      if (out.size() + 2 > n) continue;
      out += "\xc3\xa9";
    } else {
      out += c;
    }
  }
  return out;
}

inline double random_unit(std::mt19937_64& rng) {
  // Mix in the exact edges.
  std::uniform_int_distribution<int> edge(0, 9);
  int e = edge(rng);
  if (e == 0) return 0.0;
  if (e == 1) return 1.0;
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline FlatMap random_map(std::mt19937_64& rng, const Bounds& b = {}) {
  FlatMap m;
  std::uniform_int_distribution<std::size_t> count(0, b.max_entries);
  auto n = count(rng);
  while (m.size() < n) m[random_name(rng, b.max_key)] = rng() % 5 == 0 ? "" : random_name(rng, 40);
  return m;
}

inline ViewerEvent random_event(std::mt19937_64& rng) {
  ViewerEvent ev;
  ev.user = random_name(rng, 20);
  ev.kind = rng() % 2 ? EventKind::Click : EventKind::Gesture;
  std::size_t n = ev.kind == EventKind::Click ? 1 : 2 + rng() % 30;
  std::int64_t t = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ev.points.push_back({random_unit(rng), random_unit(rng)});
    if (i > 0) t += static_cast<std::int64_t>(rng() % 50);
    ev.offsets_ms.push_back(t);
  }
  ev.latency_ms = static_cast<std::int64_t>(rng() % 10001);
  ev.client_ts_ms = static_cast<std::int64_t>(rng() % 4'000'000'000'000ULL);
  return ev;
}

inline Envelope random_envelope(std::mt19937_64& rng) {
  Envelope env;
  env.seq = 1 + rng() % 1'000'000'000'000ULL;
  switch (rng() % 5) {
    case 0: env.body = random_event(rng); break;
    case 1: env.body = ContextPayload{random_name(rng, 64), random_map(rng)}; break;
    case 2: {
      AppUpdate u{random_map(rng), rng() % 2 ? Audience::all() : Audience::single(random_name(rng, 64))};
      env.body = u;
      break;
    }
    case 3:
      env.body = rng() % 2 ? Hello{Role::App, std::nullopt} : Hello{Role::Viewer, random_name(rng, 64)};
      break;
    default: env.body = ErrorBody{random_name(rng, 20), random_name(rng, 60)}; break;
  }
  return env;
}

struct BadFrame {
  std::string text;
  Errc expected;
};

/// Frames every decoder must refuse, tagged with the expected error.
inline std::vector<BadFrame> malformed_corpus() {
  const std::string click_tail = R"("offsets_ms":[0],"latency_ms":1000,"client_ts_ms":5})";
  std::vector<BadFrame> c = {
      {"", Errc::MalformedMessage},
      {"not json", Errc::MalformedMessage},
      {"[]", Errc::MalformedMessage},
      {"42", Errc::MalformedMessage},
      {R"({"type":"mouse_event")", Errc::MalformedMessage},
      {R"({"seq":1})", Errc::MalformedMessage},
      {R"({"type":"teleport","seq":1})", Errc::MalformedMessage},
      {R"({"type":7,"seq":1})", Errc::MalformedMessage},
      {R"({"type":"hello","seq":1})", Errc::MalformedMessage},
      {R"({"type":"hello","seq":"1","role":"app"})", Errc::MalformedMessage},
      {R"({"type":"hello","seq":1.5,"role":"app"})", Errc::MalformedMessage},
      {R"({"type":"hello","seq":-1,"role":"app"})", Errc::MalformedMessage},
      {R"({"type":"hello","seq":1,"role":"admin"})", Errc::MalformedMessage},
      {R"({"type":"hello","seq":1,"role":"app","extra":true})", Errc::MalformedMessage},
      {R"({"type":"hello","seq":1,"role":"viewer","user":5})", Errc::MalformedMessage},
      {R"({"type":"mouse_event","seq":1,"user":"a","kind":"click","points":[[0.5,0.5]],)" + click_tail + "x",
       Errc::MalformedMessage},
      {R"({"type":"mouse_event","seq":1,"user":"a","kind":"tap","points":[[0.5,0.5]],)" + click_tail,
       Errc::MalformedMessage},
      {R"({"type":"mouse_event","seq":1,"user":"a","kind":"click","points":[[0.5]],)" + click_tail,
       Errc::MalformedMessage},
      {R"({"type":"mouse_event","seq":1,"user":"a","kind":"click","points":[["0.5",0.5]],)" + click_tail,
       Errc::MalformedMessage},
      {R"({"type":"mouse_event","seq":1,"user":"a","kind":"click","points":[{"x":0.5,"y":0.5}],)" + click_tail,
       Errc::MalformedMessage},
      {R"({"type":"mouse_event","seq":1,"user":"a","kind":"click","points":[[0.5,0.5]],"offsets_ms":[0],"latency_ms":1000.5,"client_ts_ms":5})",
       Errc::MalformedMessage},
      {R"({"type":"mouse_event","seq":1,"user":"a","kind":"click","points":[[0.5,0.5]],"offsets_ms":[0],"latency_ms":1000})",
       Errc::MalformedMessage},
      {R"({"type":"context","seq":1,"user":"a","data":{"k":{"nested":"no"}}})", Errc::MalformedMessage},
      {R"({"type":"context","seq":1,"user":"a","data":{"k":1}})", Errc::MalformedMessage},
      {R"({"type":"context","seq":1,"user":"a","data":[]})", Errc::MalformedMessage},
      {R"({"type":"app_update","seq":1,"audience":"some","payload":{}})", Errc::MalformedMessage},
      {R"({"type":"app_update","seq":1,"audience":{"group":"x"},"payload":{}})", Errc::MalformedMessage},
      {R"({"type":"error","seq":1,"code":"x"})", Errc::MalformedMessage},
      // Well-formed JSON, out-of-range values.
      {R"({"type":"mouse_event","seq":1,"user":"a","kind":"click","points":[[1.5,0.2]],)" + click_tail,
       Errc::InvariantViolation},
      {R"({"type":"mouse_event","seq":1,"user":"a","kind":"click","points":[[0.5,-0.01]],)" + click_tail,
       Errc::InvariantViolation},
      {R"({"type":"mouse_event","seq":1,"user":"","kind":"click","points":[[0.5,0.5]],)" + click_tail,
       Errc::InvariantViolation},
      {R"({"type":"mouse_event","seq":1,"user":"a","kind":"click","points":[[0.1,0.1],[0.2,0.2]],"offsets_ms":[0,5],"latency_ms":1,"client_ts_ms":5})",
       Errc::InvariantViolation},
      {R"({"type":"mouse_event","seq":1,"user":"a","kind":"gesture","points":[[0.1,0.1]],)" + click_tail,
       Errc::InvariantViolation},
      {R"({"type":"mouse_event","seq":1,"user":"a","kind":"gesture","points":[[0.1,0.1],[0.2,0.2]],"offsets_ms":[0],"latency_ms":1,"client_ts_ms":5})",
       Errc::InvariantViolation},
      {R"({"type":"mouse_event","seq":1,"user":"a","kind":"gesture","points":[[0.1,0.1],[0.2,0.2]],"offsets_ms":[3,5],"latency_ms":1,"client_ts_ms":5})",
       Errc::InvariantViolation},
      {R"({"type":"mouse_event","seq":1,"user":"a","kind":"gesture","points":[[0.1,0.1],[0.2,0.2],[0.3,0.3]],"offsets_ms":[0,9,5],"latency_ms":1,"client_ts_ms":5})",
       Errc::InvariantViolation},
      {R"({"type":"mouse_event","seq":1,"user":"a","kind":"click","points":[[0.5,0.5]],"offsets_ms":[0],"latency_ms":-1,"client_ts_ms":5})",
       Errc::InvariantViolation},
      {R"({"type":"context","seq":1,"user":"","data":{}})", Errc::InvariantViolation},
      {R"({"type":"context","seq":1,"user":")" + std::string(65, 'u') + R"(","data":{}})", Errc::InvariantViolation},
      {R"({"type":"context","seq":1,"user":"a","data":{")" + std::string(33, 'k') + R"(":"v"}})",
       Errc::InvariantViolation},
      {R"({"type":"context","seq":1,"user":"a","data":{"k":")" + std::string(257, 'v') + R"("}})",
       Errc::InvariantViolation},
      {R"({"type":"hello","seq":1,"role":"viewer","user":""})", Errc::InvariantViolation},
  };
  std::string many = R"({"type":"context","seq":1,"user":"a","data":{)";
  for (int i = 0; i < 17; ++i) many += (i ? "," : "") + std::string("\"k") + std::to_string(i) + "\":\"v\"";
  c.push_back({many + "}}", Errc::InvariantViolation});
  return c;
}

inline AdmittedEvent click_at(const std::string& user, NormPoint p, std::int64_t server_ts, std::int64_t latency,
                              FlatMap context = {}) {
  ViewerEvent ev{user, EventKind::Click, {p}, {0}, latency, server_ts};
  return {ev, std::move(context), server_ts};
}

inline AdmittedEvent stroke_of(const std::string& user, std::vector<NormPoint> pts, std::int64_t server_ts,
                               std::int64_t latency, std::int64_t duration = 300, FlatMap context = {}) {
  ViewerEvent ev{user, EventKind::Gesture, std::move(pts), {}, latency, server_ts};
  const auto n = static_cast<std::int64_t>(ev.points.size());
  for (std::int64_t i = 0; i < n; ++i) ev.offsets_ms.push_back(duration * i / (n - 1));
  return {ev, std::move(context), server_ts};
}

inline constexpr std::uint64_t kJitterSeed = 2024;
/// Frozen output of jitter_unrecognized_rate(kJitterSeed).
inline constexpr double kJitterUnrecognizedBaseline = 0.93;

/// Share of seeded random strokes (8 points uniform in the unit square) that
/// the default recognizer leaves Unrecognized.
inline double jitter_unrecognized_rate(std::uint64_t seed, int samples = 200) {
  sim::Rng rng(seed);
  gesture::Recognizer recognizer;
  int unrecognized = 0;
  for (int i = 0; i < samples; ++i) {
    std::vector<NormPoint> stroke;
    for (int k = 0; k < 8; ++k) stroke.push_back({rng.uniform01(), rng.uniform01()});
    if (recognizer.classify(std::span<const NormPoint>(stroke)).command == gesture::Command::Unrecognized) {
      ++unrecognized;
    }
  }
  return static_cast<double>(unrecognized) / samples;
}

}  // namespace testsupport
