// simcli: run deterministic crowd-input scenarios, replay logs, serve the relay.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "crowdinput/apps.hpp"
#include "crowdinput/relay_server.hpp"
#include "crowdinput/sim.hpp"

using namespace crowdinput;
using json = nlohmann::json;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitInvalid = 2;
constexpr int kExitAssert = 3;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spill(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

sim::Scenario scenario_from(const std::string& ref) {
  constexpr std::string_view prefix = "builtin:";
  if (ref.starts_with(prefix)) return sim::builtin_scenario(ref.substr(prefix.size()));
  return sim::load_scenario(ref);
}

std::atomic<bool> g_stop{false};

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Crowd-input relay simulator"};
  cli.require_subcommand(1);

  std::string scenario_ref, out_path, log_path, config_path;
  std::optional<std::uint64_t> seed;
  bool check = false;
  bool with_events = false;

  auto* run = cli.add_subcommand("run", "Run a scenario on the virtual clock and print its report");
  run->add_option("--scenario", scenario_ref, "Scenario file or builtin:NAME")->required();
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--out", out_path, "Write the report here instead of stdout");
  run->add_option("--log", log_path, "Write the replay log here");
  run->add_flag("--assert", check, "Check run invariants; exit 3 on failure");
  run->add_flag("--per-event", with_events, "Keep per-event records in the report");

  auto* rep = cli.add_subcommand("replay", "Re-drive an app from a replay log and print its final state");
  rep->add_option("--log", log_path, "Replay log")->required();
  auto* rep_scenario = rep->add_option("--scenario", scenario_ref, "Scenario whose app config to use");
  rep->add_option("--config", config_path, "App config JSON")->excludes(rep_scenario);

  auto* serve = cli.add_subcommand("serve", "Run the websocket relay with an in-process app");
  serve->add_option("--config", config_path, "Server config JSON")->required();

  auto* list = cli.add_subcommand("list", "List built-in scenarios");

  CLI11_PARSE(cli, argc, argv);

  try {
    if (*list) {
      for (const auto& name : sim::builtin_names()) std::cout << name << '\n';
      return 0;
    }

    if (*run) {
      auto scenario = scenario_from(scenario_ref);
      if (seed) scenario.seed = *seed;
      auto result = sim::run_scenario(scenario);
      if (!log_path.empty()) spill(log_path, result.replay_log);
      auto report = result.report;
      if (!with_events) report.erase("per_event");
      if (out_path.empty()) {
        std::cout << report.dump(2) << '\n';
      } else {
        spill(out_path, report.dump(2) + "\n");
      }
      if (check) {
        auto failures = sim::check_invariants(scenario, result);
        for (const auto& f : failures) std::cerr << "FAIL " << f << '\n';
        if (!failures.empty()) return kExitAssert;
        std::cerr << "invariants ok\n";
      }
      return 0;
    }

    if (*rep) {
      json app_config = json{{"kind", "arena"}};
      if (!scenario_ref.empty()) app_config = sim::effective_app_config(scenario_from(scenario_ref));
      if (!config_path.empty()) app_config = json::parse(slurp(config_path));
      std::cout << sim::replay(slurp(log_path), app_config) << '\n';
      return 0;
    }

    if (*serve) {
      auto config = json::parse(slurp(config_path));
      const auto base = std::filesystem::path(config_path).parent_path();
      ServerConfig server;
      server.address = config.value("address", server.address);
      server.port = config.value("port", server.port);
      std::optional<policy::ListWatcher> lists;
      if (config.contains("roles_file") || config.contains("bans_file")) {
        lists.emplace(base / config.value("roles_file", std::string("roles.json")),
                      base / config.value("bans_file", std::string("bans.json")));
      }
      auto app = config.contains("app") ? apps::make_app(config["app"]) : nullptr;
      RelayServer relay(server, std::move(app), std::move(lists));
      relay.start();
      std::cerr << "listening on " << server.address << ':' << relay.port() << '\n';
      std::signal(SIGINT, [](int) { g_stop = true; });
      std::signal(SIGTERM, [](int) { g_stop = true; });
      while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      relay.stop();
      auto stats = relay.stats();
      std::cerr << "events received " << stats.events_received << ", delivered " << stats.events_delivered
                << ", dropped " << stats.events_dropped << '\n';
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == Errc::ScenarioInvalid || e.code() == Errc::ConfigInvalid ? kExitInvalid : kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return 0;
}
