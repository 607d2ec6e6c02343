#include "crowdinput/compensation.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <mutex>

#include "crowdinput/relay.hpp"

namespace crowdinput {

double distance(WorldPoint a, WorldPoint b) { return std::hypot(a.x - b.x, a.y - b.y); }
double norm(WorldPoint v) { return std::hypot(v.x, v.y); }

WorldPoint to_world(const CameraState& cam, NormPoint p) {
  return {cam.center.x + (p.x - 0.5) * cam.extent.w, cam.center.y + (p.y - 0.5) * cam.extent.h};
}

NormPoint to_norm(const CameraState& cam, WorldPoint w) {
  return {(w.x - cam.center.x) / cam.extent.w + 0.5, (w.y - cam.center.y) / cam.extent.h + 0.5};
}

CameraBuffer::CameraBuffer(CameraBufferConfig config) : config_(config) {
  if (config_.capacity == 0) throw Error(Errc::ConfigInvalid, "camera buffer capacity must be positive");
  if (config_.period_ms <= 0) throw Error(Errc::ConfigInvalid, "camera buffer period must be positive");
}

CameraBuffer::CameraBuffer(const CameraBuffer& other) {
  std::shared_lock lock(other.mutex_);
  config_ = other.config_;
  slots_ = other.slots_;
}

CameraBuffer& CameraBuffer::operator=(const CameraBuffer& other) {
  if (this == &other) return *this;
  std::scoped_lock lock(mutex_, other.mutex_);
  config_ = other.config_;
  slots_ = other.slots_;
  return *this;
}

void CameraBuffer::push(const CameraState& state) {
  if (!(state.extent.w > 0.0) || !(state.extent.h > 0.0)) {
    throw Error(Errc::InvariantViolation, "camera extent must be positive");
  }
  std::unique_lock lock(mutex_);
  if (!slots_.empty() && state.snapshot_ts_ms <= slots_.back().snapshot_ts_ms) {
    throw Error(Errc::NonMonotonicTimestamp, "snapshot at " + std::to_string(state.snapshot_ts_ms) +
                                                 " is not after " + std::to_string(slots_.back().snapshot_ts_ms));
  }
  slots_.push_back(state);
  // Capacity bound, plus the time horizon in case the writer skipped ticks.
  const auto horizon = static_cast<std::int64_t>(config_.capacity - 1) * config_.period_ms;
  while (slots_.size() > config_.capacity || state.snapshot_ts_ms - slots_.front().snapshot_ts_ms > horizon) {
    slots_.pop_front();
  }
}

CameraState CameraBuffer::lookup(std::int64_t intent_ts_ms) const {
  std::shared_lock lock(mutex_);
  if (slots_.empty()) throw Error(Errc::EmptyBuffer, "no camera snapshots recorded");
  if (intent_ts_ms < slots_.front().snapshot_ts_ms) {
    throw Error(Errc::StaleIntent, "intent " + std::to_string(intent_ts_ms) + " predates oldest snapshot " +
                                       std::to_string(slots_.front().snapshot_ts_ms));
  }
  if (intent_ts_ms >= slots_.back().snapshot_ts_ms) return slots_.back();
  // First slot strictly after the intent; its predecessor is at or before it.
  auto after = std::upper_bound(slots_.begin(), slots_.end(), intent_ts_ms,
                                [](std::int64_t ts, const CameraState& s) { return ts < s.snapshot_ts_ms; });
  auto before = std::prev(after);
  auto d_before = intent_ts_ms - before->snapshot_ts_ms;
  auto d_after = after->snapshot_ts_ms - intent_ts_ms;
  return d_after < d_before ? *after : *before;
}

CameraState CameraBuffer::latest() const {
  std::shared_lock lock(mutex_);
  if (slots_.empty()) throw Error(Errc::EmptyBuffer, "no camera snapshots recorded");
  return slots_.back();
}

std::size_t CameraBuffer::size() const {
  std::shared_lock lock(mutex_);
  return slots_.size();
}

bool CameraBuffer::empty() const { return size() == 0; }

std::optional<std::int64_t> CameraBuffer::oldest_ts() const {
  std::shared_lock lock(mutex_);
  if (slots_.empty()) return std::nullopt;
  return slots_.front().snapshot_ts_ms;
}

std::optional<std::int64_t> CameraBuffer::latest_ts() const {
  std::shared_lock lock(mutex_);
  if (slots_.empty()) return std::nullopt;
  return slots_.back().snapshot_ts_ms;
}

std::vector<CameraState> CameraBuffer::snapshot() const {
  std::shared_lock lock(mutex_);
  return {slots_.begin(), slots_.end()};
}

namespace {

std::vector<WorldPoint> map_points(const CameraState& cam, const ViewerEvent& event) {
  std::vector<WorldPoint> out;
  out.reserve(event.points.size());
  for (const auto& p : event.points) out.push_back(to_world(cam, p));
  return out;
}

}  // namespace

std::int64_t intent_ts(const AdmittedEvent& event) {
  // A stroke reaches the relay on release; its first point was drawn
  // offsets_ms.back() earlier.
  const auto stroke_ms = event.event.offsets_ms.empty() ? 0 : event.event.offsets_ms.back();
  return event.server_ts_ms - event.event.latency_ms - stroke_ms;
}

std::vector<WorldPoint> resolve(const CameraBuffer& buffer, const AdmittedEvent& event) {
  return map_points(buffer.lookup(intent_ts(event)), event.event);
}

std::vector<WorldPoint> resolve_naive(const CameraBuffer& buffer, const AdmittedEvent& event) {
  return map_points(buffer.latest(), event.event);
}

}  // namespace crowdinput
