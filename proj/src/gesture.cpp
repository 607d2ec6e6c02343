#include "crowdinput/gesture.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "crowdinput/error.hpp"

namespace crowdinput::gesture {

namespace {

constexpr double kDegenerateLength = 1e-6;

Canonical canonicalize(std::span<const Vec2> points) {
  Canonical out{};
  if (points.empty()) return out;

  std::vector<double> cumulative(points.size(), 0.0);
  for (std::size_t i = 1; i < points.size(); ++i) {
    cumulative[i] = cumulative[i - 1] + std::hypot(points[i].x - points[i - 1].x, points[i].y - points[i - 1].y);
  }
  const double length = cumulative.back();
  if (length < kDegenerateLength) return out;

  for (std::size_t k = 0; k < kResampleCount; ++k) {
    if (k + 1 == kResampleCount) {
      out[k] = points.back();
      continue;
    }
    double target = length * static_cast<double>(k) / static_cast<double>(kResampleCount - 1);
    // Segment [i-1, i] containing the target arc length.
    auto it = std::lower_bound(cumulative.begin() + 1, cumulative.end(), target);
    auto i = static_cast<std::size_t>(std::distance(cumulative.begin(), it));
    i = std::min(i, points.size() - 1);
    double seg = cumulative[i] - cumulative[i - 1];
    double t = seg > 0.0 ? (target - cumulative[i - 1]) / seg : 0.0;
    out[k] = {points[i - 1].x + t * (points[i].x - points[i - 1].x),
              points[i - 1].y + t * (points[i].y - points[i - 1].y)};
  }

  Vec2 centroid;
  for (const auto& p : out) {
    centroid.x += p.x;
    centroid.y += p.y;
  }
  centroid.x /= static_cast<double>(kResampleCount);
  centroid.y /= static_cast<double>(kResampleCount);

  double min_x = out[0].x, max_x = out[0].x, min_y = out[0].y, max_y = out[0].y;
  for (const auto& p : out) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  const double side = std::max(max_x - min_x, max_y - min_y);
  for (auto& p : out) p = {(p.x - centroid.x) / side, (p.y - centroid.y) / side};
  return out;
}

Command parse_command(const std::string& s) {
  if (s == "next") return Command::Next;
  if (s == "previous") return Command::Previous;
  throw Error(Errc::ConfigInvalid, "unknown gesture command '" + s + "'");
}

}  // namespace

std::string_view to_string(Command command) {
  switch (command) {
    case Command::Next: return "next";
    case Command::Previous: return "previous";
    case Command::Unrecognized: return "unrecognized";
  }
  return "unrecognized";
}

Canonical normalize_stroke(std::span<const Vec2> points) { return canonicalize(points); }

Canonical normalize_stroke(std::span<const NormPoint> points) {
  std::vector<Vec2> v;
  v.reserve(points.size());
  for (const auto& p : points) v.push_back({p.x, p.y});
  return canonicalize(v);
}

Template make_template(std::string name, Command command, std::vector<Vec2> points) {
  if (points.size() < 2) throw Error(Errc::ConfigInvalid, "template '" + name + "' needs at least two points");
  Template t{std::move(name), command, std::move(points), {}};
  t.canonical = canonicalize(t.points);
  return t;
}

std::vector<Vec2> next_chevron() { return {{0.2, 0.2}, {0.6, 0.5}, {0.2, 0.8}}; }
std::vector<Vec2> previous_chevron() { return {{0.6, 0.2}, {0.2, 0.5}, {0.6, 0.8}}; }

double match_score(const Canonical& a, const Canonical& b) {
  double total = 0.0;
  for (std::size_t i = 0; i < kResampleCount; ++i) total += std::hypot(a[i].x - b[i].x, a[i].y - b[i].y);
  return std::clamp(1.0 - total / static_cast<double>(kResampleCount), 0.0, 1.0);
}

Recognizer::Recognizer(double accept_threshold)
    : Recognizer({make_template("chevron_right", Command::Next, next_chevron()),
                  make_template("chevron_left", Command::Previous, previous_chevron())},
                 accept_threshold) {}

Recognizer::Recognizer(std::vector<Template> templates, double accept_threshold)
    : templates_(std::move(templates)), threshold_(accept_threshold) {}

std::vector<Template> Recognizer::parse_templates(std::string_view json_text) {
  std::vector<Template> out;
  try {
    auto doc = nlohmann::json::parse(json_text);
    if (!doc.is_array()) throw Error(Errc::ConfigInvalid, "template file must hold an array");
    for (const auto& entry : doc) {
      std::vector<Vec2> points;
      for (const auto& p : entry.at("points")) points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
      out.push_back(make_template(entry.at("name").get<std::string>(),
                                  parse_command(entry.at("command").get<std::string>()), std::move(points)));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ConfigInvalid, std::string("gesture templates: ") + e.what());
  }
  return out;
}

std::vector<Template> Recognizer::load_templates(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ConfigInvalid, "cannot open gesture templates " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_templates(ss.str());
}

void Recognizer::add_template(Template t) { templates_.push_back(std::move(t)); }

GestureCommand Recognizer::best_match(const Canonical& canonical) const {
  GestureCommand best;
  bool have = false;
  for (const auto& t : templates_) {
    double score = match_score(canonical, t.canonical);
    if (!have || score > best.score) {
      best = {t.command, score, t.name};
      have = true;
    }
  }
  if (!have || best.score < threshold_) best.command = Command::Unrecognized;
  return best;
}

GestureCommand Recognizer::classify(std::span<const NormPoint> stroke) const {
  return best_match(normalize_stroke(stroke));
}

GestureCommand Recognizer::classify(std::span<const Vec2> stroke) const {
  return best_match(normalize_stroke(stroke));
}

}  // namespace crowdinput::gesture
