// Command-line front end. Talks to the toolkit only through the C API.
#include <CLI11.hpp>

#include <algorithm>
#include <iostream>
#include <map>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "pentrl/pentrl.h"

namespace {

using nlohmann::json;

struct CString {
  char* p = nullptr;
  ~CString() { pentrl_free_string(p); }
};

json call_json(pentrl_status (*fn)(const char*, char**), const char* arg) {
  CString out;
  if (fn(arg, &out.p) != PENTRL_OK) throw std::runtime_error(pentrl_last_error());
  return json::parse(out.p);
}

std::string flag_name(const std::string& key) {
  std::string s = "--" + key;
  for (auto& c : s)
    if (c == '_') c = '-';
  return s;
}

// Converts a flag's text to the JSON type of the key's default.
json typed(const json& def, const std::string& text) {
  if (def.is_number_integer() || def.is_number_unsigned()) {
    json v = json::parse(text, nullptr, false);
    if (v.is_number_float() && v.get<double>() == static_cast<double>(static_cast<long long>(v.get<double>())))
      return static_cast<long long>(v.get<double>());
    if (!v.is_number()) throw CLI::ValidationError("expected a number, got '" + text + "'");
    return v;
  }
  if (def.is_number_float()) {
    json v = json::parse(text, nullptr, false);
    if (!v.is_number()) throw CLI::ValidationError("expected a number, got '" + text + "'");
    return v;
  }
  if (def.is_array()) {
    json v = json::parse(text, nullptr, false);
    if (v.is_array()) return v;
    json arr = json::array();
    std::size_t start = 0;
    while (start <= text.size()) {
      auto end = text.find_first_of(",x", start);
      if (end == std::string::npos) end = text.size();
      arr.push_back(std::stoi(text.substr(start, end - start)));
      start = end + 1;
    }
    return arr;
  }
  return text;
}

struct Subcommand {
  CLI::App* app = nullptr;
  json defaults;
  std::map<std::string, std::string> values;
  std::map<std::string, bool> switches;
};

const std::map<std::string, std::string> kDescriptions{
    {"gen-envs", "Sample simulated websites and write them as JSON"},
    {"train", "Train a policy (PPO or DQN) on generated environments"},
    {"search", "Random hyperparameter search"},
    {"eval", "Run a checkpoint and record traces and statistics"},
    {"stats", "Recompute statistics from trace files"},
    {"report", "Render a pentest report from traces"},
    {"show-config", "Print the resolved training configuration"},
    {"rerun", "Re-execute a command from its run manifest"},
};

// Global --threads caps every worker count; --deterministic forces one worker.
void apply_globals(const json& defaults, json& flags, int threads, bool deterministic) {
  if (deterministic) {
    if (defaults.contains("deterministic")) flags["deterministic"] = true;
    threads = 1;
  }
  if (threads <= 0) return;
  for (const char* key : {"threads", "cve_parallelism"}) {
    if (!defaults.contains(key)) continue;
    const json& current = flags.contains(key) ? flags[key] : defaults[key];
    const int n = current.is_number() ? current.get<int>() : threads;
    flags[key] = std::min(n, threads);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pentrl: reinforcement-learning web penetration testing on simulated sites"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  std::string log_level = "info";
  bool print_json = false;
  int global_threads = 0;
  bool global_deterministic = false;
  app.add_option("--config", config_path, "JSON config file; flags override its values");
  app.add_option("--log-level", log_level, "debug, info, warn or error")->check(CLI::IsMember({"debug", "info", "warn", "error"}));
  app.add_flag("--json", print_json, "Print the command result as JSON");
  app.add_option("--threads", global_threads, "Cap on worker threads for every command")->check(CLI::PositiveNumber);
  app.add_flag("--deterministic", global_deterministic, "Run sequentially for reproducible output");
  app.set_version_flag("--version", std::string(pentrl_version()));

  std::map<std::string, std::unique_ptr<Subcommand>> subs;
  try {
    for (const auto& name : call_json([](const char*, char** out) { return pentrl_command_names(out); }, "")) {
      const auto n = name.get<std::string>();
      auto sub = std::make_unique<Subcommand>();
      auto it = kDescriptions.find(n);
      sub->app = app.add_subcommand(n, it == kDescriptions.end() ? "" : it->second);
      sub->defaults = call_json(pentrl_command_defaults, n.c_str());
      for (auto& [key, def] : sub->defaults.items()) {
        if (def.is_boolean()) {
          sub->switches[key] = false;
          sub->app->add_flag(flag_name(key), sub->switches[key]);
        } else {
          std::string desc = def.is_null() ? std::string("(no default)") : "default " + def.dump();
          sub->app->add_option(flag_name(key), sub->values[key], desc);
        }
      }
      subs.emplace(n, std::move(sub));
    }
  } catch (const std::exception& e) {
    std::cerr << "pentrl: error: " << e.what() << "\n";
    return 3;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  pentrl_set_log_level(log_level == "debug" ? 0 : log_level == "info" ? 1 : log_level == "warn" ? 2 : 3);
  for (auto& [name, sub] : subs) {
    if (!sub->app->parsed()) continue;
    json flags = json::object();
    try {
      for (auto& [key, text] : sub->values)
        if (sub->app->count(flag_name(key)) > 0) flags[key] = typed(sub->defaults[key], text);
    } catch (const std::exception& e) {
      std::cerr << "pentrl: error: " << e.what() << "\n";
      return 2;
    }
    for (auto& [key, on] : sub->switches)
      if (on) flags[key] = true;
    apply_globals(sub->defaults, flags, global_threads, global_deterministic);
    json request{{"flags", flags}};
    if (!config_path.empty()) request["config"] = config_path;

    CString result;
    const auto status = pentrl_run_command(name.c_str(), request.dump().c_str(), &result.p);
    if (status != PENTRL_OK) {
      std::cerr << "pentrl: error: " << pentrl_last_error() << "\n";
      return pentrl_exit_code(status);
    }
    const json r = json::parse(result.p);
    if (print_json || name == "show-config") {
      std::cout << r.dump(2) << "\n";
    } else {
      std::cout << name << ": done";
      if (r.contains("out")) std::cout << ", artifacts in " << r["out"].get<std::string>();
      std::cout << "\n";
      for (auto& [k, v] : r.items())
        if (k != "artifacts" && k != "out" && k != "command" && k != "manifest" && !v.is_object() && !v.is_array())
          std::cout << "  " << k << ": " << v.dump() << "\n";
    }
    return 0;
  }
  return 0;
}
