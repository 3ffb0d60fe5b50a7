#ifndef PENTRL_EVALKIT_HPP_
#define PENTRL_EVALKIT_HPP_

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pentrl/agent.hpp"
#include "pentrl/simenv.hpp"

namespace pentrl::evalkit {

inline constexpr int kBucketCount = 5;
inline constexpr std::array<const char*, kBucketCount> kBucketLabels{"0", "1-5", "6-10", "11-20", ">20"};
inline constexpr int kTestEpisodeCap = 500;

int bucket_of(int actions_on_url);

// One parsed line of a trace log.
struct TraceStep {
  int episode = 0;
  int step = 0;
  std::int64_t action = 0;
  int url_index = 0;
  int per_url_index = 0;
  sim::Tool tool = sim::Tool::kCrawler;
  nlohmann::json decoded;
  double value = 0.0;
  double cost = 0.0;
  double reward = 0.0;
  int discovered = 0;
  bool terminated = false;
  bool truncated = false;
  std::vector<sim::Finding> findings;
};

struct EpisodeTrace {
  std::string source;
  std::vector<TraceStep> steps;
};

// Errors are ParseError carrying "<source>:<line>: <reason>".
TraceStep parse_trace_line(const std::string& line, const std::string& source, int line_number);
EpisodeTrace parse_trace(std::istream& in, const std::string& source);
EpisodeTrace load_trace(const std::string& path);
// Every *.jsonl file in `dir`, in lexicographic path order.
std::vector<EpisodeTrace> load_trace_dir(const std::string& dir, int threads = 1);

struct EpisodeStats {
  int episodes = 1;
  std::array<std::int64_t, kBucketCount> actions_per_url{};  // bucket -> number of URLs
  std::array<std::int64_t, sim::kToolCount> tool_counts{};
  std::array<double, sim::kToolCount> tool_proportions{};
  std::vector<std::int64_t> sub_action_counts;
  std::vector<double> sub_action_probs;  // length m
  std::int64_t total_actions = 0;
  // Per episode: the episode's values. Pooled: means over episodes.
  double episode_reward = 0.0;
  double vulns_found = 0.0;
  double steps_used = 0.0;
};

struct TraceStats {
  EpisodeStats pooled;
  std::vector<EpisodeStats> per_episode;
};

EpisodeStats episode_stats(const EpisodeTrace& trace, const sim::ActionSpaceLayout& layout = {});
TraceStats analyze_traces(const std::vector<EpisodeTrace>& traces, const sim::ActionSpaceLayout& layout = {});

nlohmann::json to_json(const EpisodeStats& s);
nlohmann::json to_json(const TraceStats& s);
// Long format: scope,metric,key,value.
std::string stats_csv(const TraceStats& s, const sim::ActionSpaceLayout& layout = {});
void write_stats(const std::string& out_dir, const TraceStats& s, const sim::ActionSpaceLayout& layout = {});

enum class Mode { kGreedy, kSample, kRandom };
const char* mode_name(Mode m);
Mode parse_mode(const std::string& s);

struct EvalOptions {
  int episodes = 10;
  Mode mode = Mode::kGreedy;
  int max_steps = kTestEpisodeCap;
  std::uint64_t seed = 0;
  std::string out_dir;  // receives traces/ and stats files when set
};

struct EvalResult {
  TraceStats stats;
  double mean_reward = 0.0;
  std::vector<EpisodeTrace> traces;
};

// Episode k runs on envs[k % envs.size()]. `policy` may be null only in random mode.
EvalResult evaluate_policy(const agent::Policy* policy, const std::vector<topology::WebsiteGroundTruth>& envs,
                           const sim::RewardTables& rewards, const EvalOptions& options);

}  // namespace pentrl::evalkit

#endif  // PENTRL_EVALKIT_HPP_
