#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace crowdinput {

/// Every recoverable failure in the library. The code is the stable
/// machine-readable identifier that also appears in `error` wire frames.
enum class Errc {
  // protocol
  MalformedMessage,
  InvariantViolation,
  // relay
  DuplicateApp,
  MissingUsername,
  UserMismatch,
  NotRegistered,
  NoApp,
  NotApp,
  BadSequence,
  // compensation
  NonMonotonicTimestamp,
  StaleIntent,
  EmptyBuffer,
  // aggregation
  RoundClosed,
  NoVotes,
  NoAnchor,
  InvalidRegions,
  // policy
  ClockRegression,
  InsufficientFunds,
  // apps / harness
  ConfigInvalid,
  ScenarioInvalid,
  CorruptLog,
};

std::string_view to_string(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code), detail_(detail) {}

  Errc code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

}  // namespace crowdinput
