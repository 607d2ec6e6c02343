#include <doctest.h>

#include <cmath>
#include <random>

#include "crowdinput/gesture.hpp"
#include "crowdinput/protocol.hpp"
#include "support.hpp"

using namespace crowdinput;
using namespace crowdinput::gesture;

namespace {

std::vector<Vec2> transform(const std::vector<Vec2>& pts, double s, double dx, double dy) {
  std::vector<Vec2> out;
  for (const auto& p : pts) out.push_back({p.x * s + dx, p.y * s + dy});
  return out;
}

}  // namespace

TEST_CASE("ideal chevrons classify with score 1") {
  Recognizer r;
  auto next = r.classify(std::span<const Vec2>(next_chevron()));
  CHECK(next.command == Command::Next);
  CHECK(next.score == 1.0);
  auto prev = r.classify(std::span<const Vec2>(previous_chevron()));
  CHECK(prev.command == Command::Previous);
  CHECK(prev.score == 1.0);
}

TEST_CASE("normalized strokes have 32 points, centroid at origin, unit longest side") {
  std::vector<Vec2> zig{{0, 0}, {3, 1}, {1, 2}, {4, 4}};
  auto c = normalize_stroke(std::span<const Vec2>(zig));
  double sx = 0, sy = 0, minx = 1e9, maxx = -1e9, miny = 1e9, maxy = -1e9;
  for (const auto& p : c) {
    sx += p.x;
    sy += p.y;
    minx = std::min(minx, p.x);
    maxx = std::max(maxx, p.x);
    miny = std::min(miny, p.y);
    maxy = std::max(maxy, p.y);
  }
  CHECK(std::abs(sx / 32) < 1e-12);
  CHECK(std::abs(sy / 32) < 1e-12);
  CHECK(std::max(maxx - minx, maxy - miny) == doctest::Approx(1.0));
}

TEST_CASE("translation and power-of-two scaling are exact") {
  std::mt19937_64 rng(17);
  Recognizer r;
  for (int i = 0; i < 200; ++i) {
    double s = std::ldexp(1.0, int(rng() % 7) - 3);
    double dx = std::ldexp(double(rng() % 64), -4);
    double dy = std::ldexp(double(rng() % 64), -4);
    auto moved = transform(next_chevron(), s, dx, dy);
    auto g = r.classify(std::span<const Vec2>(moved));
    CHECK(g.command == Command::Next);
    CHECK(g.score == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("degenerate and tiny strokes do not crash") {
  Recognizer r;
  std::vector<Vec2> dot{{0.5, 0.5}, {0.5, 0.5}};
  auto g = r.classify(std::span<const Vec2>(dot));
  CHECK(g.command == Command::Unrecognized);
  std::vector<Vec2> line{{0.1, 0.5}, {0.9, 0.5}};
  CHECK(r.classify(std::span<const Vec2>(line)).command == Command::Unrecognized);
}

TEST_CASE("unrecognized exactly when the best score is below the threshold") {
  std::mt19937_64 rng(23);
  Recognizer r;
  for (int i = 0; i < 300; ++i) {
    std::vector<Vec2> pts;
    for (int k = 0; k < 3 + int(rng() % 6); ++k) {
      pts.push_back({std::ldexp(double(rng() % 1024), -10), std::ldexp(double(rng() % 1024), -10)});
    }
    auto g = r.classify(std::span<const Vec2>(pts));
    CHECK((g.command == Command::Unrecognized) == (g.score < r.accept_threshold()));
  }
}

TEST_CASE("loose hand-drawn chevrons still classify") {
  Recognizer r;
  std::vector<NormPoint> wobbly{{0.21, 0.19}, {0.4, 0.36}, {0.58, 0.52}, {0.41, 0.66}, {0.19, 0.81}};
  CHECK(r.classify(std::span<const NormPoint>(wobbly)).command == Command::Next);
  std::vector<NormPoint> back{{0.62, 0.2}, {0.4, 0.33}, {0.21, 0.49}, {0.38, 0.67}, {0.6, 0.79}};
  CHECK(r.classify(std::span<const NormPoint>(back)).command == Command::Previous);
}

TEST_CASE("templates load from JSON") {
  auto ts = Recognizer::parse_templates(R"([{"name":"up","command":"next","points":[[0,1],[0.5,0],[1,1]]}])");
  REQUIRE(ts.size() == 1);
  CHECK(ts[0].name == "up");
  CHECK(ts[0].command == Command::Next);
  CHECK_THROWS_AS(Recognizer::parse_templates(R"([{"name":"x","command":"jump","points":[[0,0],[1,1]]}])"),
                  Error);
  CHECK_THROWS_AS(Recognizer::parse_templates(R"([{"name":"x","command":"next","points":[[0,0]]}])"), Error);

  Recognizer r;
  r.add_template(ts[0]);
  std::vector<Vec2> caret{{0, 1}, {0.5, 0}, {1, 1}};
  auto g = r.classify(std::span<const Vec2>(caret));
  CHECK(g.template_name == "up");
  CHECK(g.score == 1.0);
}

TEST_CASE("seeded jitter strokes stay at the recorded Unrecognized rate") {
  const double rate = testsupport::jitter_unrecognized_rate(testsupport::kJitterSeed);
  CHECK(std::abs(rate - testsupport::kJitterUnrecognizedBaseline) <= 0.02);
}
