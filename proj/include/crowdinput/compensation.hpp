#pragma once

// Broadcast-latency compensation. The application records what its viewport
// looked like every tick; a viewer event is resolved against the viewport the
// viewer was actually watching, i.e. the snapshot nearest to
// (server receive time - reported latency).

#include <cstdint>
#include <deque>
#include <optional>
#include <shared_mutex>
#include <span>
#include <vector>

#include "crowdinput/error.hpp"
#include "crowdinput/protocol.hpp"

namespace crowdinput {

struct AdmittedEvent;

struct WorldPoint {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const WorldPoint&, const WorldPoint&) = default;
  friend WorldPoint operator+(WorldPoint a, WorldPoint b) { return {a.x + b.x, a.y + b.y}; }
  friend WorldPoint operator-(WorldPoint a, WorldPoint b) { return {a.x - b.x, a.y - b.y}; }
  friend WorldPoint operator*(WorldPoint a, double s) { return {a.x * s, a.y * s}; }
};

double distance(WorldPoint a, WorldPoint b);
double norm(WorldPoint v);

struct Extent {
  double w = 1.0;
  double h = 1.0;

  friend bool operator==(const Extent&, const Extent&) = default;
};

/// Visible viewport at one instant, in world units (x right, y down).
struct CameraState {
  WorldPoint center;
  Extent extent;
  std::int64_t snapshot_ts_ms = 0;

  friend bool operator==(const CameraState&, const CameraState&) = default;
};

/// center + (p - 0.5) * extent, componentwise.
WorldPoint to_world(const CameraState& cam, NormPoint p);
/// Inverse of to_world; the result may fall outside [0,1] when off-screen.
NormPoint to_norm(const CameraState& cam, WorldPoint w);

struct CameraBufferConfig {
  std::size_t capacity = 100;
  std::int64_t period_ms = 100;
};

/// Ring of the most recent camera snapshots. One writer (the app tick) and any
/// number of concurrent readers; every read sees a whole snapshot.
class CameraBuffer {
 public:
  explicit CameraBuffer(CameraBufferConfig config = {});

  CameraBuffer(const CameraBuffer& other);
  CameraBuffer& operator=(const CameraBuffer& other);

  /// Throws NonMonotonicTimestamp unless strictly newer than the latest slot,
  /// and InvariantViolation for a non-positive extent.
  void push(const CameraState& state);

  /// Nearest snapshot to `intent_ts_ms`, ties toward the older one; clamps to
  /// the latest for future intents. Throws StaleIntent below the oldest slot,
  /// EmptyBuffer when nothing has been pushed.
  CameraState lookup(std::int64_t intent_ts_ms) const;

  /// Newest snapshot, the "live" camera. Throws EmptyBuffer.
  CameraState latest() const;

  std::size_t size() const;
  bool empty() const;
  std::optional<std::int64_t> oldest_ts() const;
  std::optional<std::int64_t> latest_ts() const;
  const CameraBufferConfig& config() const { return config_; }
  std::vector<CameraState> snapshot() const;

 private:
  CameraBufferConfig config_;
  std::deque<CameraState> slots_;
  mutable std::shared_mutex mutex_;
};

/// Moment of application history the viewer reacted to:
/// server_ts_ms - latency_ms, moved back to stroke start for gestures
/// (which arrive on release, offsets_ms.back() after they began).
std::int64_t intent_ts(const AdmittedEvent& event);

/// Maps every point of the event against the single camera state at
/// intent_ts(event).
std::vector<WorldPoint> resolve(const CameraBuffer& buffer, const AdmittedEvent& event);

/// Same mapping against the live camera, ignoring latency. Baseline only.
std::vector<WorldPoint> resolve_naive(const CameraBuffer& buffer, const AdmittedEvent& event);

/// Duration of the viewer-side countdown spinner: exactly the broadcast latency.
constexpr std::int64_t spinner_duration(std::int64_t latency_ms) { return latency_ms; }

}  // namespace crowdinput
