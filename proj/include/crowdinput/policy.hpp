#pragma once

// Admission control for viewer events: funds, roles, cooldowns and bans.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "crowdinput/relay.hpp"

namespace crowdinput::policy {

enum class ViewerRole { Everyone, Subscriber, Vip, Mod };

std::string_view to_string(ViewerRole role);
/// Throws ConfigInvalid for unknown names.
ViewerRole parse_role(std::string_view name);

struct FundsAccount {
  std::string user;
  double balance = 0.0;
  std::int64_t last_accrual_ts_ms = 0;
};

struct AccrualPolicy {
  enum class Mode { ConstantRate, InverseViewers };

  Mode mode = Mode::ConstantRate;
  double rate_per_s = 1.0;               // r for constant rate, shared R for inverse
  std::optional<double> balance_cap;     // none by default

  static AccrualPolicy constant(double r) { return {Mode::ConstantRate, r, std::nullopt}; }
  static AccrualPolicy inverse_viewers(double shared) { return {Mode::InverseViewers, shared, std::nullopt}; }
};

/// Funds earned between the account's last accrual and now, before any cap.
/// Throws ClockRegression / InvariantViolation on bad inputs.
double accrual_amount(const FundsAccount& account, const AccrualPolicy& policy, std::int64_t viewer_count,
                      std::int64_t now_ms);

/// Amount accrue() will actually credit (the cap may clip it).
double accrual_credit(const FundsAccount& account, const AccrualPolicy& policy, std::int64_t viewer_count,
                      std::int64_t now_ms);

/// balance += credit; last_accrual_ts_ms = now. Viewer count is sampled now.
FundsAccount accrue(FundsAccount account, const AccrualPolicy& policy, std::int64_t viewer_count,
                    std::int64_t now_ms);

/// Throws InsufficientFunds (account unchanged) when cost exceeds balance.
FundsAccount spend(FundsAccount account, double cost);

struct GateConfig {
  std::set<ViewerRole> allowed_roles{ViewerRole::Everyone};
  std::int64_t cooldown_ms = 0;
  std::int64_t global_cooldown_ms = 0;
  std::set<std::string> banned;
};

class RoleTable {
 public:
  RoleTable() = default;
  explicit RoleTable(std::map<std::string, ViewerRole> roles) : roles_(std::move(roles)) {}

  ViewerRole role_of(const std::string& user) const;
  void set(const std::string& user, ViewerRole role) { roles_[user] = role; }
  const std::map<std::string, ViewerRole>& entries() const { return roles_; }

 private:
  std::map<std::string, ViewerRole> roles_;
};

struct CooldownState {
  std::map<std::string, std::int64_t> last_admit;
  std::optional<std::int64_t> last_global_admit;
};

enum class RejectReason { Banned, RoleGate, UserCooldown, GlobalCooldown, Filtered };

std::string_view to_string(RejectReason reason);

struct Verdict {
  bool admitted = true;
  RejectReason reason = RejectReason::Banned;  // meaningful only when rejected
  std::string detail;

  static Verdict admit() { return {}; }
  static Verdict reject(RejectReason r, std::string detail = {}) { return {false, r, std::move(detail)}; }
};

/// Optional content check run after the built-in gates; returning a message
/// rejects the event as Filtered.
using ContentFilter = std::function<std::optional<std::string>(const AdmittedEvent&)>;

/// Fixed order: banned, role gate, per-user cooldown, global cooldown, filter.
/// On admit both cooldown clocks restart at now_ms.
Verdict admit(const AdmittedEvent& event, const GateConfig& gate, const RoleTable& roles, CooldownState& state,
              std::int64_t now_ms, const ContentFilter& filter = {});

/// roles.json: {"user": "subscriber", ...}
RoleTable parse_roles(std::string_view json_text);
/// bans.json: ["user", ...]
std::set<std::string> parse_bans(std::string_view json_text);

/// Reloads roles.json / bans.json when their modification time changes.
class ListWatcher {
 public:
  ListWatcher(std::filesystem::path roles_path, std::filesystem::path bans_path);

  /// Returns true when either list was reloaded into the outputs.
  bool poll(RoleTable& roles, std::set<std::string>& banned);

 private:
  std::filesystem::path roles_path_;
  std::filesystem::path bans_path_;
  std::optional<std::filesystem::file_time_type> roles_mtime_;
  std::optional<std::filesystem::file_time_type> bans_mtime_;
};

}  // namespace crowdinput::policy
