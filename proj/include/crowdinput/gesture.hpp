#pragma once

// Unistroke template matching for next/previous control gestures.

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crowdinput/protocol.hpp"

namespace crowdinput::gesture {

inline constexpr std::size_t kResampleCount = 32;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Vec2&, const Vec2&) = default;
};

using Canonical = std::array<Vec2, kResampleCount>;

/// Resample to kResampleCount points equidistant along arc length, move the
/// centroid to the origin and scale the longest bounding-box side to 1.
/// Strokes shorter than 1e-6 collapse to the origin.
Canonical normalize_stroke(std::span<const NormPoint> points);
Canonical normalize_stroke(std::span<const Vec2> points);

enum class Command { Next, Previous, Unrecognized };

std::string_view to_string(Command command);

struct GestureCommand {
  Command command = Command::Unrecognized;
  double score = 0.0;
  std::string template_name;
};

struct Template {
  std::string name;
  Command command = Command::Unrecognized;
  std::vector<Vec2> points;
  Canonical canonical{};
};

Template make_template(std::string name, Command command, std::vector<Vec2> points);

/// ">" drawn top to bottom: (0.2,0.2) -> (0.6,0.5) -> (0.2,0.8).
std::vector<Vec2> next_chevron();
/// Horizontal mirror of next_chevron().
std::vector<Vec2> previous_chevron();

/// score = 1 - mean point distance between canonical forms, clamped to [0,1].
double match_score(const Canonical& a, const Canonical& b);

class Recognizer {
 public:
  /// Built-in next/previous chevrons.
  explicit Recognizer(double accept_threshold = 0.7);
  Recognizer(std::vector<Template> templates, double accept_threshold);

  /// Parses `[{"name":..., "points":[[x,y],...], "command":"next"|"previous"}]`.
  /// Throws ConfigInvalid.
  static std::vector<Template> parse_templates(std::string_view json_text);
  static std::vector<Template> load_templates(const std::string& path);

  void add_template(Template t);
  GestureCommand classify(std::span<const NormPoint> stroke) const;
  GestureCommand classify(std::span<const Vec2> stroke) const;

  double accept_threshold() const { return threshold_; }
  const std::vector<Template>& templates() const { return templates_; }

 private:
  GestureCommand best_match(const Canonical& canonical) const;

  std::vector<Template> templates_;
  double threshold_;
};

}  // namespace crowdinput::gesture
