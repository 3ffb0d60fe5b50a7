#include "pentrl/commands.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <set>

#include "pentrl/evalkit.hpp"
#include "pentrl/report.hpp"
#include "pentrl/trainer.hpp"

#ifndef PENTRL_VERSION_STRING
#define PENTRL_VERSION_STRING "0.0.0"
#endif
#ifndef PENTRL_DATA_DIR
#define PENTRL_DATA_DIR "data"
#endif

namespace pentrl::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kCommands{"gen-envs", "train", "search", "eval", "stats", "report", "show-config", "rerun"};

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string compact_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm);
  return buf;
}

std::string absolute(const std::string& p) { return p.empty() ? p : fs::weakly_canonical(fs::absolute(p)).string(); }

json train_keys() { return train::to_json(train::TrainConfig{}); }

json merge_into(json base, const json& extra) {
  for (auto& [k, v] : extra.items()) base[k] = v;
  return base;
}

}  // namespace

std::vector<std::string> command_names() { return kCommands; }

json command_defaults(const std::string& name) {
  const std::string run_root = env_or("PENTRL_RUN_ROOT", "runs");
  const std::string bundled_cache = std::string(PENTRL_DATA_DIR) + "/cve_cache.json";
  if (name == "gen-envs")
    return {{"count", 60}, {"seed", 0}, {"seed_config", nullptr}, {"out", "envs"}, {"split", nullptr}};
  if (name == "train")
    return merge_into(train_keys(), {{"train_envs", "envs/train"},
                                     {"val_envs", "envs/val"},
                                     {"out", run_root},
                                     {"run_dir", nullptr},
                                     {"rewards", nullptr}});
  if (name == "search")
    return merge_into(train_keys(), {{"train_envs", "envs/train"},
                                     {"val_envs", "envs/val"},
                                     {"out", run_root},
                                     {"run_dir", nullptr},
                                     {"rewards", nullptr},
                                     {"trials", 20},
                                     {"budget", 100000},
                                     {"space", nullptr}});
  if (name == "eval")
    return {{"checkpoint", nullptr}, {"envs", "envs/val"}, {"episodes", 10},     {"mode", "greedy"},
            {"seed", 0},             {"max_steps", evalkit::kTestEpisodeCap}, {"out", "eval"}, {"rewards", nullptr}};
  if (name == "stats") return {{"traces", nullptr}, {"out", "stats"}, {"threads", 1}};
  if (name == "report")
    return {{"traces", nullptr},
            {"out", "report"},
            {"cve_cache", env_or("PENTRL_CVE_CACHE", bundled_cache)},
            {"cve_base_url", env_or("PENTRL_CVE_BASE_URL", "")},
            {"offline", false},
            {"cve_timeout_ms", 3000},
            {"cve_parallelism", 4},
            {"title", "Penetration test report"},
            {"target", ""}};
  if (name == "show-config") return merge_into(train_keys(), {{"rewards", nullptr}});
  if (name == "rerun") return {{"manifest", nullptr}, {"out", nullptr}};
  throw ConfigError("unknown command '" + name + "'");
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kConfig: return 2;
    default: return 3;
  }
}

std::vector<topology::WebsiteGroundTruth> load_environment_dir(const std::string& dir) {
  if (!fs::is_directory(dir)) throw IoError("environment directory '" + dir + "' does not exist");
  std::vector<std::string> paths;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (e.is_regular_file() && name.rfind("env_", 0) == 0 && e.path().extension() == ".json") paths.push_back(e.path().string());
  }
  std::sort(paths.begin(), paths.end());
  std::vector<topology::WebsiteGroundTruth> out;
  for (const auto& p : paths) {
    try {
      out.push_back(topology::ground_truth_from_json(json::parse(read_text_file(p))));
    } catch (const json::exception& e) {
      throw ParseError("environment file '" + p + "': " + e.what());
    }
  }
  if (out.empty()) throw IoError("environment directory '" + dir + "' contains no env_*.json files");
  return out;
}

namespace {

// ---------------------------------------------------------------------------
// Request resolution

json resolve(const std::string& name, const json& request) {
  json merged = command_defaults(name);
  std::set<std::string> any_known{"config"};
  for (const auto& c : kCommands)
    for (const auto& d = command_defaults(c); auto& [k, _] : d.items()) any_known.insert(k);

  std::vector<std::string> problems;
  if (auto it = request.find("config"); it != request.end() && !it->is_null()) {
    const auto path = it->get<std::string>();
    json file;
    try {
      file = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
      throw ConfigError("config file '" + path + "': " + e.what());
    } catch (const IoError& e) {
      throw ConfigError(e.what());
    }
    if (!file.is_object()) throw ConfigError("config file '" + path + "' must hold a JSON object");
    for (auto& [k, v] : file.items()) {
      if (merged.contains(k)) merged[k] = v;
      else if (!any_known.count(k)) problems.push_back("config file: unknown key '" + k + "'");
    }
  }
  if (auto it = request.find("flags"); it != request.end()) {
    if (!it->is_object()) throw ConfigError("request flags must be an object");
    for (auto& [k, v] : it->items()) {
      if (v.is_null()) continue;
      if (merged.contains(k)) merged[k] = v;
      else problems.push_back("option '" + k + "' does not apply to " + name);
    }
  }
  if (!problems.empty()) throw ConfigError(problems);
  return merged;
}

train::TrainConfig train_config_of(const json& merged) {
  json sub = json::object();
  const json keys = train_keys();
  for (auto& [k, _] : keys.items()) sub[k] = merged.at(k);
  return train::train_config_from_json(sub);
}

sim::RewardTables rewards_of(const json& r) {
  if (!r.contains("rewards") || r["rewards"].is_null()) return {};
  const auto path = r["rewards"].get<std::string>();
  try {
    return sim::reward_tables_from_json(json::parse(read_text_file(path)));
  } catch (const json::exception& e) {
    throw ConfigError("rewards file '" + path + "': " + e.what());
  }
}

std::string str(const json& r, const char* key) {
  const auto& v = r.at(key);
  if (!v.is_string()) throw ConfigError(std::string("option '") + key + "' must be a string");
  return v.get<std::string>();
}

template <class T>
T num(const json& r, const char* key) {
  try {
    return r.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("option '") + key + "' has the wrong type");
  }
}

void require_dir(std::vector<std::string>& problems, const json& r, const char* key) {
  if (r.at(key).is_null()) {
    problems.push_back(std::string("missing required option '") + key + "'");
  } else if (!fs::is_directory(str(r, key))) {
    problems.push_back(std::string(key) + ": directory '" + str(r, key) + "' does not exist");
  }
}

void require_file(std::vector<std::string>& problems, const json& r, const char* key) {
  if (r.at(key).is_null()) {
    problems.push_back(std::string("missing required option '") + key + "'");
  } else if (!fs::is_regular_file(str(r, key))) {
    problems.push_back(std::string(key) + ": file '" + str(r, key) + "' does not exist");
  }
}

void absolutize(json& r, std::initializer_list<const char*> keys) {
  for (const char* k : keys)
    if (r.contains(k) && r[k].is_string() && !r[k].get<std::string>().empty()) r[k] = absolute(r[k].get<std::string>());
}

// ---------------------------------------------------------------------------
// Manifest

json manifest_for(const std::string& command, const json& resolved, const std::string& started,
                  std::vector<std::string> artifacts, const json& config) {
  std::sort(artifacts.begin(), artifacts.end());
  return {{"format", "pentrl-manifest"},
          {"version", 1},
          {"command", command},
          {"request", resolved},
          {"config", config},
          {"seed", resolved.value("seed", json(0))},
          {"started_at", started},
          {"finished_at", utc_now()},
          {"artifacts", artifacts},
          {"toolkit_version", PENTRL_VERSION_STRING}};
}

void write_manifest(const std::string& dir, const json& manifest) {
  write_text_file(dir + "/" + kManifestName, manifest.dump(2) + "\n");
}

json finish(const std::string& command, const json& resolved, const std::string& started,
            const std::vector<std::string>& artifacts, const json& config, json result) {
  const auto out = str(resolved, "out");
  write_manifest(out, manifest_for(command, resolved, started, artifacts, config));
  result["command"] = command;
  result["out"] = out;
  result["manifest"] = out + "/" + kManifestName;
  result["artifacts"] = artifacts;
  return result;
}

// ---------------------------------------------------------------------------
// Commands. Each takes a fully resolved request (absolute paths, explicit out).

json exec_gen_envs(const json& r) {
  const auto started = utc_now();
  const int count = num<int>(r, "count");
  if (count <= 0) throw ConfigError("count must be positive");
  auto sc = topology::SeedConfig::defaults();
  if (!r.at("seed_config").is_null()) {
    const auto path = str(r, "seed_config");
    try {
      sc = topology::seed_config_from_json(json::parse(read_text_file(path)));
    } catch (const json::exception& e) {
      throw ConfigError("seed config '" + path + "': " + e.what());
    }
  }
  if (auto p = sc.validate(); !p.empty()) throw ConfigError(p);
  int n_train = count, n_val = 0;
  const bool split = !r.at("split").is_null();
  if (split) {
    const auto s = str(r, "split");
    const auto slash = s.find('/');
    try {
      if (slash == std::string::npos) throw std::invalid_argument("no slash");
      n_train = std::stoi(s.substr(0, slash));
      n_val = std::stoi(s.substr(slash + 1));
    } catch (const std::exception&) {
      throw ConfigError("split must look like TRAIN/VAL, got '" + s + "'");
    }
    if (n_train < 0 || n_val < 0 || n_train + n_val != count)
      throw ConfigError("split " + s + " does not add up to count " + std::to_string(count));
  }
  const auto out = str(r, "out");
  const auto seed = num<std::uint64_t>(r, "seed");
  std::vector<std::string> artifacts;
  for (int i = 0; i < count; ++i) {
    auto gt = topology::generate_environment(sc, derive_seed(seed, static_cast<std::uint64_t>(i)));
    char name[32];
    std::snprintf(name, sizeof name, "env_%04d.json", split && i >= n_train ? i - n_train : i);
    std::string rel = split ? (i < n_train ? std::string("train/") : std::string("val/")) + name : std::string(name);
    write_text_file(out + "/" + rel, to_json(gt).dump(2) + "\n");
    artifacts.push_back(rel);
  }
  json result{{"count", count}};
  if (split) result["split"] = {{"train", n_train}, {"val", n_val}};
  return finish("gen-envs", r, started, artifacts, to_json(sc), result);
}

std::vector<std::string> train_artifacts(const std::string& dir) {
  std::vector<std::string> a;
  for (const char* f : {"config.json", "metrics.csv", "best.ckpt.json", "final.ckpt.json"})
    if (fs::exists(dir + "/" + f)) a.emplace_back(f);
  return a;
}

json exec_train(const json& r) {
  const auto started = utc_now();
  auto config = train_config_of(r);
  auto rewards = rewards_of(r);
  auto train_envs = load_environment_dir(str(r, "train_envs"));
  auto val_envs = load_environment_dir(str(r, "val_envs"));
  const auto out = str(r, "out");
  if (fs::exists(out + "/" + kManifestName)) throw IoError("run directory '" + out + "' already holds a manifest");
  train::TrainIo io;
  io.run_dir = out;
  io.on_row = [](const train::MetricsRow& row) {
    log::info("update " + std::to_string(row.update) + " t=" + std::to_string(row.timestep) + " train=" +
              std::to_string(row.train_reward_mean) + " val=" + std::to_string(row.val_reward_mean));
  };
  auto result = train::train(config, train_envs, val_envs, rewards, io);
  json summary{{"algorithm", train::algorithm_name(config.algorithm)},
               {"total_timesteps", config.total_timesteps},
               {"best_val_score", result.best_val_score},
               {"updates", result.metrics.size()},
               {"validation_auc", train::validation_auc(result.metrics)}};
  return finish("train", r, started, train_artifacts(out), train::to_json(config), summary);
}

json exec_search(const json& r) {
  const auto started = utc_now();
  auto base = train_config_of(r);
  auto rewards = rewards_of(r);
  train::SearchSpace space;
  if (!r.at("space").is_null()) {
    const auto path = str(r, "space");
    try {
      space = train::search_space_from_json(json::parse(read_text_file(path)));
    } catch (const json::parse_error& e) {
      throw ConfigError("search space '" + path + "': " + e.what());
    }
  }
  auto train_envs = load_environment_dir(str(r, "train_envs"));
  auto val_envs = load_environment_dir(str(r, "val_envs"));
  const auto out = str(r, "out");
  auto ranked = train::random_search(base, space, num<int>(r, "trials"), num<std::int64_t>(r, "budget"), train_envs,
                                     val_envs, rewards, base.seed);
  write_text_file(out + "/search_results.csv", train::search_results_csv(ranked));
  json rows = json::array();
  for (std::size_t i = 0; i < ranked.size(); ++i)
    rows.push_back({{"rank", i + 1},
                    {"trial", ranked[i].trial},
                    {"config", train::to_json(ranked[i].config)},
                    {"score", ranked[i].failed ? json(nullptr) : json(ranked[i].score)},
                    {"failed", ranked[i].failed},
                    {"error", ranked[i].error}});
  write_text_file(out + "/search_results.json", json{{"space", train::to_json(space)}, {"trials", rows}}.dump(2) + "\n");
  json summary{{"trials", ranked.size()}, {"best", rows.empty() ? json(nullptr) : rows[0]}};
  return finish("search", r, started, {"search_results.csv", "search_results.json"}, train::to_json(base), summary);
}

json exec_eval(const json& r) {
  const auto started = utc_now();
  auto ckpt = agent::load_checkpoint(str(r, "checkpoint"));
  agent::require_compatible(ckpt.policy.architecture(), sim::ActionSpaceLayout{});
  auto envs = load_environment_dir(str(r, "envs"));
  evalkit::EvalOptions opts;
  opts.episodes = num<int>(r, "episodes");
  opts.mode = evalkit::parse_mode(str(r, "mode"));
  opts.seed = num<std::uint64_t>(r, "seed");
  opts.max_steps = num<int>(r, "max_steps");
  opts.out_dir = str(r, "out");
  if (opts.episodes < 1) throw ConfigError("episodes must be positive");
  if (opts.max_steps < 1) throw ConfigError("max_steps must be positive");
  auto res = evalkit::evaluate_policy(&ckpt.policy, envs, rewards_of(r), opts);
  std::vector<std::string> artifacts{"stats.csv", "stats.json"};
  for (int k = 0; k < opts.episodes; ++k) {
    char name[40];
    std::snprintf(name, sizeof name, "traces/episode_%04d.jsonl", k);
    artifacts.emplace_back(name);
  }
  json summary{{"episodes", opts.episodes},
               {"mode", evalkit::mode_name(opts.mode)},
               {"mean_reward", res.mean_reward},
               {"vulns_found_mean", res.stats.pooled.vulns_found}};
  return finish("eval", r, started, artifacts, {{"checkpoint_algorithm", ckpt.algorithm}}, summary);
}

json exec_stats(const json& r) {
  const auto started = utc_now();
  auto traces = evalkit::load_trace_dir(str(r, "traces"), num<int>(r, "threads"));
  auto stats = evalkit::analyze_traces(traces);
  evalkit::write_stats(str(r, "out"), stats);
  json summary{{"episodes", traces.size()}, {"pooled", evalkit::to_json(stats.pooled)}};
  return finish("stats", r, started, {"stats.csv", "stats.json"}, json::object(), summary);
}

json exec_report(const json& r) {
  const auto started = utc_now();
  auto traces = evalkit::load_trace_dir(str(r, "traces"));
  auto findings = report::collect_findings(traces);
  std::shared_ptr<report::CveSource> cache, remote;
  const auto cache_path = str(r, "cve_cache");
  if (!cache_path.empty()) {
    if (fs::exists(cache_path)) {
      try {
        cache = std::make_shared<report::OfflineCveCache>(report::OfflineCveCache::load(cache_path));
      } catch (const Error& e) {
        log::warn(std::string("ignoring unusable CVE cache: ") + e.what());
      }
    } else {
      log::warn("CVE cache '" + cache_path + "' not found; continuing without it");
    }
  }
  const auto base_url = str(r, "cve_base_url");
  if (!num<bool>(r, "offline") && !base_url.empty())
    remote = std::make_shared<report::RemoteCveClient>(report::RemoteCveOptions{base_url, num<int>(r, "cve_timeout_ms")});
  report::CveEnricher enricher(cache, remote, {num<int>(r, "cve_parallelism")});
  auto enrichments = enricher.enrich_all(findings);
  auto meta = report::metadata_from_traces(traces);
  meta.title = str(r, "title");
  meta.target = str(r, "target");
  auto doc = report::render_report(findings, enrichments, meta);
  report::write_report(str(r, "out"), doc);
  json summary{{"findings", findings.size()}, {"summary", doc.json["summary"]}};
  return finish("report", r, started, {"report.json", "report.md"}, json::object(), summary);
}

json exec(const std::string& name, const json& resolved);

json exec_rerun(const json& r) {
  const auto path = str(r, "manifest");
  json m;
  try {
    m = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError("manifest '" + path + "': " + e.what());
  }
  if (m.value("format", std::string{}) != "pentrl-manifest") throw ParseError("'" + path + "' is not a run manifest");
  const auto command = m.at("command").get<std::string>();
  if (command == "rerun") throw ConfigError("cannot rerun a rerun manifest");
  json resolved = m.at("request");
  if (r.at("out").is_null()) throw ConfigError("rerun needs an output directory distinct from the original run");
  const auto out = absolute(str(r, "out"));
  if (out == resolved.value("out", std::string{})) throw ConfigError("rerun output must differ from the original run directory");
  resolved["out"] = out;
  auto result = exec(command, resolved);
  result["rerun_of"] = absolute(path);
  return result;
}

json exec(const std::string& name, const json& resolved) {
  if (name == "gen-envs") return exec_gen_envs(resolved);
  if (name == "train") return exec_train(resolved);
  if (name == "search") return exec_search(resolved);
  if (name == "eval") return exec_eval(resolved);
  if (name == "stats") return exec_stats(resolved);
  if (name == "report") return exec_report(resolved);
  if (name == "rerun") return exec_rerun(resolved);
  throw ConfigError("unknown command '" + name + "'");
}

// Turns merged options into an explicit, location-independent request.
json finalize(const std::string& name, json r) {
  std::vector<std::string> problems;
  if (name == "train" || name == "search" || name == "show-config") {
    try {
      auto c = train_config_of(r);
      for (auto& p : c.validate()) problems.push_back(p);
      if (name != "show-config") {
        if (!r.at("run_dir").is_null()) {
          r["out"] = r["run_dir"];
        } else {
          r["out"] = str(r, "out") + "/" + compact_timestamp() + "-seed" + std::to_string(c.seed);
        }
        r.erase("run_dir");
      }
    } catch (const ConfigError& e) {
      if (e.problems.empty()) problems.emplace_back(e.what());
      for (auto& p : e.problems) problems.push_back(p);
    }
    if (!r["rewards"].is_null() && !fs::is_regular_file(str(r, "rewards")))
      problems.push_back("rewards: file '" + str(r, "rewards") + "' does not exist");
  }
  if (name == "train" || name == "search") {
    require_dir(problems, r, "train_envs");
    require_dir(problems, r, "val_envs");
    if (name == "search") {
      if (num<int>(r, "trials") < 1) problems.emplace_back("trials must be >= 1");
      if (num<std::int64_t>(r, "budget") < 1) problems.emplace_back("budget must be >= 1");
      if (!r["space"].is_null() && !fs::is_regular_file(str(r, "space")))
        problems.push_back("space: file '" + str(r, "space") + "' does not exist");
    }
  } else if (name == "eval") {
    require_file(problems, r, "checkpoint");
    require_dir(problems, r, "envs");
    try {
      evalkit::parse_mode(str(r, "mode"));
    } catch (const ConfigError& e) {
      problems.emplace_back(e.what());
    }
  } else if (name == "stats" || name == "report") {
    require_dir(problems, r, "traces");
  } else if (name == "rerun") {
    require_file(problems, r, "manifest");
  } else if (name == "gen-envs") {
    if (!r.at("seed_config").is_null() && !fs::is_regular_file(str(r, "seed_config")))
      problems.push_back("seed_config: file '" + str(r, "seed_config") + "' does not exist");
  }
  if (!problems.empty()) throw ConfigError(problems);
  absolutize(r, {"out", "train_envs", "val_envs", "envs", "traces", "checkpoint", "seed_config", "rewards", "space",
                 "cve_cache", "manifest"});
  return r;
}

}  // namespace

json run_command(const std::string& name, const json& request) {
  if (std::find(kCommands.begin(), kCommands.end(), name) == kCommands.end())
    throw ConfigError("unknown command '" + name + "'");
  if (!request.is_object()) throw ConfigError("request must be a JSON object");
  json r = finalize(name, resolve(name, request));
  if (name == "show-config") {
    json cfg = train::to_json(train_config_of(r));
    return {{"command", name}, {"config", cfg}, {"rewards", sim::to_json(rewards_of(r))}};
  }
  return exec(name, r);
}

}  // namespace pentrl::cli
