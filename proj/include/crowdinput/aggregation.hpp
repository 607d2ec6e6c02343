#pragma once

// Countdown-scoped reduction of spatial input: region polls and averaged
// drag forces.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crowdinput/compensation.hpp"

namespace crowdinput {

/// Axis-aligned, half-open: [x0, x1) x [y0, y1).
struct Rect {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;

  bool contains(WorldPoint p) const { return p.x >= x0 && p.x < x1 && p.y >= y0 && p.y < y1; }
  friend bool operator==(const Rect&, const Rect&) = default;
};

class RegionMap {
 public:
  /// Throws InvalidRegions for an empty list, empty rectangles or overlaps.
  explicit RegionMap(std::vector<Rect> regions, std::vector<std::string> labels = {});

  /// rows x cols cells tiling the rectangle `area`, row-major.
  static RegionMap grid(Rect area, std::size_t rows, std::size_t cols);

  std::optional<std::size_t> region_at(WorldPoint p) const;
  std::size_t size() const { return regions_.size(); }
  const std::vector<Rect>& regions() const { return regions_; }
  const std::vector<std::string>& labels() const { return labels_; }

 private:
  std::vector<Rect> regions_;
  std::vector<std::string> labels_;
};

enum class VoteOutcome { Counted, MissedRegion, Locked };

class PollRound {
 public:
  PollRound(RegionMap regions, std::int64_t deadline_ms, bool lock_first = false);

  /// A re-vote moves the user's vote unless lock_first is set. Throws
  /// RoundClosed at or after the deadline, leaving the round untouched.
  VoteOutcome cast_vote(const std::string& user, WorldPoint point, std::int64_t now_ms);

  /// Most-voted region, lowest index on ties. Throws NoVotes.
  std::size_t close_poll() const;

  const std::vector<std::size_t>& counts() const { return counts_; }
  const std::map<std::string, std::size_t>& votes() const { return votes_; }
  const RegionMap& region_map() const { return regions_; }
  std::int64_t deadline_ms() const { return deadline_ms_; }

 private:
  RegionMap regions_;
  std::int64_t deadline_ms_;
  bool lock_first_;
  std::map<std::string, std::size_t> votes_;
  std::vector<std::size_t> counts_;
};

struct ForcePrime {
  std::size_t anchor = 0;
  WorldPoint vector;

  friend bool operator==(const ForcePrime&, const ForcePrime&) = default;
};

/// Mean primed vector per anchor; zero for anchors nobody primed.
struct ForceOutcome {
  std::vector<WorldPoint> mean;
  std::vector<std::size_t> primes;
};

class ForceRound {
 public:
  ForceRound(std::vector<WorldPoint> anchors, double snap_radius, std::int64_t deadline_ms);

  /// Snaps the stroke start to the nearest anchor within snap_radius (lowest
  /// index on ties); the force is last point minus first. Replaces any earlier
  /// prime by the same user. Throws RoundClosed, NoAnchor, InvariantViolation.
  ForcePrime prime_force(const std::string& user, std::span<const WorldPoint> stroke, std::int64_t now_ms);

  /// Arithmetic mean per anchor, summed in username order.
  ForceOutcome close_force() const;

  const std::vector<WorldPoint>& anchors() const { return anchors_; }
  const std::map<std::string, ForcePrime>& primes() const { return primes_; }
  double snap_radius() const { return snap_radius_; }
  std::int64_t deadline_ms() const { return deadline_ms_; }

 private:
  std::vector<WorldPoint> anchors_;
  double snap_radius_;
  std::int64_t deadline_ms_;
  std::map<std::string, ForcePrime> primes_;
};

}  // namespace crowdinput
