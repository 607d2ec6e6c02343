#include "crowdinput/aggregation.hpp"

#include <algorithm>
#include <cmath>

namespace crowdinput {

RegionMap::RegionMap(std::vector<Rect> regions, std::vector<std::string> labels)
    : regions_(std::move(regions)), labels_(std::move(labels)) {
  if (regions_.empty()) throw Error(Errc::InvalidRegions, "at least one region required");
  if (!labels_.empty() && labels_.size() != regions_.size()) {
    throw Error(Errc::InvalidRegions, "label count differs from region count");
  }
  for (std::size_t i = 0; i < regions_.size(); ++i) {
    const auto& r = regions_[i];
    if (!(r.x1 > r.x0) || !(r.y1 > r.y0)) throw Error(Errc::InvalidRegions, "region " + std::to_string(i) + " is empty");
    for (std::size_t j = 0; j < i; ++j) {
      const auto& o = regions_[j];
      bool overlap = r.x0 < o.x1 && o.x0 < r.x1 && r.y0 < o.y1 && o.y0 < r.y1;
      if (overlap) {
        throw Error(Errc::InvalidRegions, "regions " + std::to_string(j) + " and " + std::to_string(i) + " overlap");
      }
    }
  }
}

RegionMap RegionMap::grid(Rect area, std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) throw Error(Errc::InvalidRegions, "grid needs at least one row and column");
  std::vector<Rect> cells;
  const double w = (area.x1 - area.x0) / static_cast<double>(cols);
  const double h = (area.y1 - area.y0) / static_cast<double>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      // Edges computed from the area bounds so neighbours share them exactly.
      double x0 = c == 0 ? area.x0 : area.x0 + w * static_cast<double>(c);
      double x1 = c + 1 == cols ? area.x1 : area.x0 + w * static_cast<double>(c + 1);
      double y0 = r == 0 ? area.y0 : area.y0 + h * static_cast<double>(r);
      double y1 = r + 1 == rows ? area.y1 : area.y0 + h * static_cast<double>(r + 1);
      cells.push_back({x0, y0, x1, y1});
    }
  }
  return RegionMap(std::move(cells));
}

std::optional<std::size_t> RegionMap::region_at(WorldPoint p) const {
  for (std::size_t i = 0; i < regions_.size(); ++i) {
    if (regions_[i].contains(p)) return i;
  }
  return std::nullopt;
}

PollRound::PollRound(RegionMap regions, std::int64_t deadline_ms, bool lock_first)
    : regions_(std::move(regions)), deadline_ms_(deadline_ms), lock_first_(lock_first), counts_(regions_.size(), 0) {}

VoteOutcome PollRound::cast_vote(const std::string& user, WorldPoint point, std::int64_t now_ms) {
  if (now_ms >= deadline_ms_) throw Error(Errc::RoundClosed, "poll closed at " + std::to_string(deadline_ms_));
  auto region = regions_.region_at(point);
  if (!region) return VoteOutcome::MissedRegion;
  auto [it, inserted] = votes_.try_emplace(user, *region);
  if (!inserted) {
    if (lock_first_) return VoteOutcome::Locked;
    --counts_[it->second];
    it->second = *region;
  }
  ++counts_[*region];
  return VoteOutcome::Counted;
}

std::size_t PollRound::close_poll() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < counts_.size(); ++i) {
    if (counts_[i] > counts_[best]) best = i;
  }
  if (counts_[best] == 0) throw Error(Errc::NoVotes, "no votes cast");
  return best;
}

ForceRound::ForceRound(std::vector<WorldPoint> anchors, double snap_radius, std::int64_t deadline_ms)
    : anchors_(std::move(anchors)), snap_radius_(snap_radius), deadline_ms_(deadline_ms) {
  if (!(snap_radius_ > 0.0)) throw Error(Errc::InvariantViolation, "snap radius must be positive");
}

ForcePrime ForceRound::prime_force(const std::string& user, std::span<const WorldPoint> stroke, std::int64_t now_ms) {
  if (now_ms >= deadline_ms_) throw Error(Errc::RoundClosed, "force round closed at " + std::to_string(deadline_ms_));
  if (stroke.size() < 2) throw Error(Errc::InvariantViolation, "force stroke needs at least two points");
  std::optional<std::size_t> nearest;
  double nearest_d = 0.0;
  for (std::size_t i = 0; i < anchors_.size(); ++i) {
    double d = distance(anchors_[i], stroke.front());
    if (d <= snap_radius_ && (!nearest || d < nearest_d)) {
      nearest = i;
      nearest_d = d;
    }
  }
  if (!nearest) throw Error(Errc::NoAnchor, "stroke does not start on any anchor");
  ForcePrime prime{*nearest, stroke.back() - stroke.front()};
  primes_[user] = prime;
  return prime;
}

ForceOutcome ForceRound::close_force() const {
  ForceOutcome out{std::vector<WorldPoint>(anchors_.size()), std::vector<std::size_t>(anchors_.size(), 0)};
  for (const auto& [user, prime] : primes_) {
    out.mean[prime.anchor] = out.mean[prime.anchor] + prime.vector;
    ++out.primes[prime.anchor];
  }
  for (std::size_t i = 0; i < anchors_.size(); ++i) {
    if (out.primes[i] > 0) {
      auto n = static_cast<double>(out.primes[i]);
      out.mean[i] = {out.mean[i].x / n, out.mean[i].y / n};
    }
  }
  return out;
}

}  // namespace crowdinput
