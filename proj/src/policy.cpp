#include "crowdinput/policy.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace crowdinput::policy {

std::string_view to_string(ViewerRole role) {
  switch (role) {
    case ViewerRole::Everyone: return "everyone";
    case ViewerRole::Subscriber: return "subscriber";
    case ViewerRole::Vip: return "vip";
    case ViewerRole::Mod: return "mod";
  }
  return "everyone";
}

ViewerRole parse_role(std::string_view name) {
  if (name == "everyone") return ViewerRole::Everyone;
  if (name == "subscriber") return ViewerRole::Subscriber;
  if (name == "vip") return ViewerRole::Vip;
  if (name == "mod") return ViewerRole::Mod;
  throw Error(Errc::ConfigInvalid, "unknown role '" + std::string(name) + "'");
}

std::string_view to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::Banned: return "banned";
    case RejectReason::RoleGate: return "role_gate";
    case RejectReason::UserCooldown: return "user_cooldown";
    case RejectReason::GlobalCooldown: return "global_cooldown";
    case RejectReason::Filtered: return "filtered";
  }
  return "rejected";
}

double accrual_amount(const FundsAccount& account, const AccrualPolicy& policy, std::int64_t viewer_count,
                      std::int64_t now_ms) {
  if (now_ms < account.last_accrual_ts_ms) {
    throw Error(Errc::ClockRegression, "accrual at " + std::to_string(now_ms) + " precedes " +
                                           std::to_string(account.last_accrual_ts_ms));
  }
  if (viewer_count < 1) throw Error(Errc::InvariantViolation, "viewer count must be at least 1");
  if (!(policy.rate_per_s > 0.0)) throw Error(Errc::InvariantViolation, "accrual rate must be positive");
  const double seconds = static_cast<double>(now_ms - account.last_accrual_ts_ms) / 1000.0;
  const double rate = policy.mode == AccrualPolicy::Mode::ConstantRate
                          ? policy.rate_per_s
                          : policy.rate_per_s / static_cast<double>(viewer_count);
  return rate * seconds;
}

double accrual_credit(const FundsAccount& account, const AccrualPolicy& policy, std::int64_t viewer_count,
                      std::int64_t now_ms) {
  double amount = accrual_amount(account, policy, viewer_count, now_ms);
  if (policy.balance_cap) amount = std::min(amount, std::max(0.0, *policy.balance_cap - account.balance));
  return amount;
}

FundsAccount accrue(FundsAccount account, const AccrualPolicy& policy, std::int64_t viewer_count,
                    std::int64_t now_ms) {
  account.balance += accrual_credit(account, policy, viewer_count, now_ms);
  account.last_accrual_ts_ms = now_ms;
  return account;
}

FundsAccount spend(FundsAccount account, double cost) {
  if (!(cost >= 0.0)) throw Error(Errc::InvariantViolation, "cost must be non-negative");
  if (cost > account.balance) {
    throw Error(Errc::InsufficientFunds,
                account.user + " has " + std::to_string(account.balance) + ", needs " + std::to_string(cost));
  }
  account.balance -= cost;
  return account;
}

ViewerRole RoleTable::role_of(const std::string& user) const {
  auto it = roles_.find(user);
  return it == roles_.end() ? ViewerRole::Everyone : it->second;
}

Verdict admit(const AdmittedEvent& event, const GateConfig& gate, const RoleTable& roles, CooldownState& state,
              std::int64_t now_ms, const ContentFilter& filter) {
  const auto& user = event.event.user;
  if (gate.banned.contains(user)) return Verdict::reject(RejectReason::Banned, user + " is banned");

  if (!gate.allowed_roles.contains(ViewerRole::Everyone) && !gate.allowed_roles.contains(roles.role_of(user))) {
    return Verdict::reject(RejectReason::RoleGate, std::string(to_string(roles.role_of(user))) + " may not act");
  }
  if (auto it = state.last_admit.find(user); it != state.last_admit.end() && now_ms - it->second < gate.cooldown_ms) {
    return Verdict::reject(RejectReason::UserCooldown,
                           std::to_string(gate.cooldown_ms - (now_ms - it->second)) + " ms remaining");
  }
  if (state.last_global_admit && now_ms - *state.last_global_admit < gate.global_cooldown_ms) {
    return Verdict::reject(RejectReason::GlobalCooldown,
                           std::to_string(gate.global_cooldown_ms - (now_ms - *state.last_global_admit)) +
                               " ms remaining");
  }
  if (filter) {
    if (auto why = filter(event)) return Verdict::reject(RejectReason::Filtered, *why);
  }
  state.last_admit[user] = now_ms;
  state.last_global_admit = now_ms;
  return Verdict::admit();
}

RoleTable parse_roles(std::string_view json_text) {
  try {
    auto doc = nlohmann::json::parse(json_text);
    if (!doc.is_object()) throw Error(Errc::ConfigInvalid, "roles must be an object of user -> role");
    RoleTable table;
    for (const auto& item : doc.items()) table.set(item.key(), parse_role(item.value().get<std::string>()));
    return table;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ConfigInvalid, std::string("roles: ") + e.what());
  }
}

std::set<std::string> parse_bans(std::string_view json_text) {
  try {
    auto doc = nlohmann::json::parse(json_text);
    if (!doc.is_array()) throw Error(Errc::ConfigInvalid, "bans must be an array of usernames");
    return doc.get<std::set<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ConfigInvalid, std::string("bans: ") + e.what());
  }
}

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ConfigInvalid, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

ListWatcher::ListWatcher(std::filesystem::path roles_path, std::filesystem::path bans_path)
    : roles_path_(std::move(roles_path)), bans_path_(std::move(bans_path)) {}

bool ListWatcher::poll(RoleTable& roles, std::set<std::string>& banned) {
  bool changed = false;
  std::error_code ec;
  if (!roles_path_.empty()) {
    auto mtime = std::filesystem::last_write_time(roles_path_, ec);
    if (!ec && mtime != roles_mtime_) {
      roles = parse_roles(slurp(roles_path_));
      roles_mtime_ = mtime;
      changed = true;
    }
  }
  if (!bans_path_.empty()) {
    auto mtime = std::filesystem::last_write_time(bans_path_, ec);
    if (!ec && mtime != bans_mtime_) {
      banned = parse_bans(slurp(bans_path_));
      bans_mtime_ = mtime;
      changed = true;
    }
  }
  return changed;
}

}  // namespace crowdinput::policy
