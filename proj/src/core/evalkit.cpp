#include "pentrl/evalkit.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

namespace pentrl::evalkit {

using nlohmann::json;
namespace fs = std::filesystem;

int bucket_of(int n) {
  if (n <= 0) return 0;
  if (n <= 5) return 1;
  if (n <= 10) return 2;
  if (n <= 20) return 3;
  return 4;
}

TraceStep parse_trace_line(const std::string& line, const std::string& source, int line_number) {
  auto fail = [&](const std::string& why) -> ParseError {
    return ParseError(source + ":" + std::to_string(line_number) + ": " + why);
  };
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw fail(std::string("invalid JSON (") + e.what() + ")");
  }
  if (!j.is_object()) throw fail("trace record must be a JSON object");
  TraceStep s;
  try {
    s.episode = j.at("episode").get<int>();
    s.step = j.at("step").get<int>();
    s.action = j.at("action").get<std::int64_t>();
    s.url_index = j.at("url_index").get<int>();
    s.per_url_index = j.at("per_url_index").get<int>();
    s.decoded = j.at("decoded");
    s.tool = sim::parse_tool(s.decoded.at("tool").get<std::string>());
    s.value = j.at("V").get<double>();
    s.cost = j.at("C").get<double>();
    s.reward = j.at("reward").get<double>();
    s.discovered = j.at("discovered").get<int>();
    s.terminated = j.at("terminated").get<bool>();
    s.truncated = j.at("truncated").get<bool>();
    for (const auto& f : j.at("findings")) s.findings.push_back(sim::finding_from_json(f));
  } catch (const json::exception& e) {
    throw fail(std::string("bad trace record (") + e.what() + ")");
  } catch (const Error& e) {
    throw fail(e.what());
  }
  if (s.url_index < 0 || s.per_url_index < 0 || s.step < 0) throw fail("negative index in trace record");
  return s;
}

EpisodeTrace parse_trace(std::istream& in, const std::string& source) {
  EpisodeTrace t;
  t.source = source;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    t.steps.push_back(parse_trace_line(line, source, n));
  }
  return t;
}

EpisodeTrace load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trace '" + path + "'");
  return parse_trace(in, path);
}

std::vector<EpisodeTrace> load_trace_dir(const std::string& dir, int threads) {
  if (!fs::is_directory(dir)) throw IoError("trace directory '" + dir + "' does not exist");
  std::vector<std::string> paths;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".jsonl") paths.push_back(e.path().string());
  std::sort(paths.begin(), paths.end());
  std::vector<EpisodeTrace> out(paths.size());
  std::vector<std::exception_ptr> errors(paths.size());
  auto work = [&](std::size_t begin, std::size_t step) {
    for (std::size_t i = begin; i < paths.size(); i += step) {
      try {
        out[i] = load_trace(paths[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), 1,
                                               std::max<std::size_t>(paths.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work, w, workers);
  work(0, workers);
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

namespace {

void fill_proportions(EpisodeStats& s) {
  const int m = static_cast<int>(s.sub_action_counts.size());
  s.sub_action_probs.assign(static_cast<std::size_t>(m), 0.0);
  s.tool_proportions.fill(0.0);
  if (s.total_actions == 0) return;
  const auto total = static_cast<double>(s.total_actions);
  for (int t = 0; t < sim::kToolCount; ++t) s.tool_proportions[t] = static_cast<double>(s.tool_counts[t]) / total;
  for (int k = 0; k < m; ++k) s.sub_action_probs[k] = static_cast<double>(s.sub_action_counts[k]) / total;
}

}  // namespace

EpisodeStats episode_stats(const EpisodeTrace& trace, const sim::ActionSpaceLayout& layout) {
  const int m = layout.per_url_count();
  EpisodeStats s;
  s.sub_action_counts.assign(static_cast<std::size_t>(m), 0);
  int urls = 0;
  std::vector<int> per_url;
  std::set<std::pair<int, int>> vulns;
  for (const auto& st : trace.steps) {
    if (st.per_url_index >= m) throw ParseError(trace.source + ": per-URL action " + std::to_string(st.per_url_index) +
                                                " outside the action layout");
    urls = std::max({urls, st.discovered, st.url_index + 1});
    if (per_url.size() <= static_cast<std::size_t>(st.url_index)) per_url.resize(static_cast<std::size_t>(st.url_index) + 1, 0);
    ++per_url[static_cast<std::size_t>(st.url_index)];
    ++s.tool_counts[static_cast<int>(st.tool)];
    ++s.sub_action_counts[static_cast<std::size_t>(st.per_url_index)];
    ++s.total_actions;
    s.episode_reward += st.reward;
    for (const auto& f : st.findings)
      if (f.is_vulnerability()) vulns.emplace(f.node_id, f.vuln_index);
  }
  per_url.resize(static_cast<std::size_t>(urls), 0);
  for (int c : per_url) ++s.actions_per_url[bucket_of(c)];
  s.vulns_found = static_cast<double>(vulns.size());
  s.steps_used = static_cast<double>(trace.steps.size());
  fill_proportions(s);
  return s;
}

TraceStats analyze_traces(const std::vector<EpisodeTrace>& traces, const sim::ActionSpaceLayout& layout) {
  TraceStats out;
  auto& p = out.pooled;
  p.episodes = static_cast<int>(traces.size());
  p.sub_action_counts.assign(static_cast<std::size_t>(layout.per_url_count()), 0);
  for (const auto& t : traces) {
    auto s = episode_stats(t, layout);
    for (int b = 0; b < kBucketCount; ++b) p.actions_per_url[b] += s.actions_per_url[b];
    for (int k = 0; k < sim::kToolCount; ++k) p.tool_counts[k] += s.tool_counts[k];
    for (std::size_t k = 0; k < s.sub_action_counts.size(); ++k) p.sub_action_counts[k] += s.sub_action_counts[k];
    p.total_actions += s.total_actions;
    p.episode_reward += s.episode_reward;
    p.vulns_found += s.vulns_found;
    p.steps_used += s.steps_used;
    out.per_episode.push_back(std::move(s));
  }
  if (!traces.empty()) {
    const auto n = static_cast<double>(traces.size());
    p.episode_reward /= n;
    p.vulns_found /= n;
    p.steps_used /= n;
  }
  fill_proportions(p);
  return out;
}

json to_json(const EpisodeStats& s) {
  json buckets = json::object(), tools = json::object(), tool_counts = json::object();
  for (int b = 0; b < kBucketCount; ++b) buckets[kBucketLabels[b]] = s.actions_per_url[b];
  for (int t = 0; t < sim::kToolCount; ++t) {
    tools[sim::tool_name(static_cast<sim::Tool>(t))] = s.tool_proportions[t];
    tool_counts[sim::tool_name(static_cast<sim::Tool>(t))] = s.tool_counts[t];
  }
  return {{"episodes", s.episodes},
          {"total_actions", s.total_actions},
          {"actions_per_url", buckets},
          {"tool_counts", tool_counts},
          {"tool_proportions", tools},
          {"sub_action_counts", s.sub_action_counts},
          {"sub_action_probs", s.sub_action_probs},
          {"episode_reward", s.episode_reward},
          {"vulns_found", s.vulns_found},
          {"steps_used", s.steps_used}};
}

json to_json(const TraceStats& s) {
  json eps = json::array();
  for (const auto& e : s.per_episode) eps.push_back(to_json(e));
  return {{"version", 1}, {"pooled", to_json(s.pooled)}, {"episodes", eps}};
}

namespace {

void csv_rows(std::ostringstream& o, const std::string& scope, const EpisodeStats& s, const sim::ActionSpaceLayout& l) {
  auto row = [&](const char* metric, const std::string& key, const json& v) {
    o << scope << ',' << metric << ',' << key << ',' << v.dump() << '\n';
  };
  row("episodes", "", s.episodes);
  row("total_actions", "", s.total_actions);
  for (int b = 0; b < kBucketCount; ++b) row("actions_per_url", kBucketLabels[b], s.actions_per_url[b]);
  for (int t = 0; t < sim::kToolCount; ++t)
    row("tool_proportion", sim::tool_name(static_cast<sim::Tool>(t)), s.tool_proportions[t]);
  for (std::size_t k = 0; k < s.sub_action_probs.size(); ++k) {
    auto sub = sim::decode_sub_action(static_cast<int>(k), l);
    std::string key = std::to_string(k) + ":" + sim::describe(sub);
    key.erase(std::remove(key.begin(), key.end(), ','), key.end());
    row("sub_action_prob", key, s.sub_action_probs[k]);
  }
  row("episode_reward", "", s.episode_reward);
  row("vulns_found", "", s.vulns_found);
  row("steps_used", "", s.steps_used);
}

}  // namespace

std::string stats_csv(const TraceStats& s, const sim::ActionSpaceLayout& layout) {
  std::ostringstream o;
  o << "scope,metric,key,value\n";
  csv_rows(o, "pooled", s.pooled, layout);
  for (std::size_t e = 0; e < s.per_episode.size(); ++e) csv_rows(o, "episode_" + std::to_string(e), s.per_episode[e], layout);
  return o.str();
}

void write_stats(const std::string& out_dir, const TraceStats& s, const sim::ActionSpaceLayout& layout) {
  write_text_file(out_dir + "/stats.json", to_json(s).dump(2) + "\n");
  write_text_file(out_dir + "/stats.csv", stats_csv(s, layout));
}

const char* mode_name(Mode m) {
  switch (m) {
    case Mode::kGreedy: return "greedy";
    case Mode::kSample: return "sample";
    case Mode::kRandom: return "random";
  }
  return "greedy";
}

Mode parse_mode(const std::string& s) {
  if (s == "greedy") return Mode::kGreedy;
  if (s == "sample") return Mode::kSample;
  if (s == "random") return Mode::kRandom;
  throw ConfigError("unknown evaluation mode '" + s + "' (expected greedy, sample or random)");
}

EvalResult evaluate_policy(const agent::Policy* policy, const std::vector<topology::WebsiteGroundTruth>& envs,
                           const sim::RewardTables& rewards, const EvalOptions& options) {
  if (envs.empty()) throw InvalidArgument("evaluation needs at least one environment");
  if (options.episodes < 1) throw InvalidArgument("episodes must be positive");
  if (options.max_steps < 1) throw InvalidArgument("max_steps must be positive");
  if (!policy && options.mode != Mode::kRandom) throw InvalidArgument("a policy is required outside random mode");
  sim::EnvOptions eo;
  eo.max_steps = options.max_steps;
  eo.rewards = rewards;
  if (policy) agent::require_compatible(policy->architecture(), eo.layout);

  EvalResult result;
  for (int k = 0; k < options.episodes; ++k) {
    Rng rng(derive_seed(options.seed, static_cast<std::uint64_t>(k)));
    sim::Environment env(envs[static_cast<std::size_t>(k) % envs.size()], eo);
    std::ostringstream lines;
    while (!env.episode_over()) {
      std::int64_t a = 0;
      if (options.mode == Mode::kRandom) {
        a = std::uniform_int_distribution<std::int64_t>(0, env.action_count() - 1)(rng);
      } else if (options.mode == Mode::kGreedy) {
        a = agent::argmax(policy->actor_forward(env.observation()));
      } else {
        a = agent::sample_action(policy->actor_forward(env.observation()), rng).index;
      }
      const int step = env.steps_taken();
      auto r = env.step(a);
      lines << sim::trace_record(r, k, step, env.url_count()).dump() << '\n';
    }
    char name[32];
    std::snprintf(name, sizeof name, "episode_%04d.jsonl", k);
    const std::string text = lines.str();
    if (!options.out_dir.empty()) write_text_file(options.out_dir + "/traces/" + name, text);
    std::istringstream in(text);
    result.traces.push_back(parse_trace(in, std::string("traces/") + name));
    result.mean_reward += env.episode_return();
  }
  result.mean_reward /= options.episodes;
  result.stats = analyze_traces(result.traces, eo.layout);
  if (!options.out_dir.empty()) write_stats(options.out_dir, result.stats, eo.layout);
  return result;
}

}  // namespace pentrl::evalkit
