#ifndef PENTRL_SIMENV_HPP_
#define PENTRL_SIMENV_HPP_

// Episodic pentest MDP over a simulated website. The agent starts from the
// root URL; actions are (discovered URL, tool configuration) pairs.

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "pentrl/actions.hpp"
#include "pentrl/rewards.hpp"
#include "pentrl/topology.hpp"

namespace pentrl::sim {

// status one-hot (5), normalized depth, normalized discovery step, revealed form count
inline constexpr int kFeatureCount = 8;
inline constexpr int kDepthNormalizer = 10;

using UrlFeatures = std::array<double, kFeatureCount>;

// Per-URL rows of [history (m) | features (n_f)], row-major, in discovery order.
class Observation {
 public:
  Observation() = default;
  explicit Observation(int m, int n_f = kFeatureCount) : m_(m), n_f_(n_f) {}

  int m() const { return m_; }
  int feature_count() const { return n_f_; }
  int width() const { return m_ + n_f_; }
  int url_count() const { return width() == 0 ? 0 : static_cast<int>(data_.size()) / width(); }
  int step_index() const { return step_index_; }
  void set_step_index(int t) { step_index_ = t; }

  std::span<const double> row(int i) const { return {data_.data() + offset(i), static_cast<std::size_t>(width())}; }
  std::span<double> row(int i) { return {data_.data() + offset(i), static_cast<std::size_t>(width())}; }
  std::span<const double> history(int i) const { return row(i).first(static_cast<std::size_t>(m_)); }
  std::span<double> history(int i) { return row(i).first(static_cast<std::size_t>(m_)); }
  std::span<const double> features(int i) const { return row(i).subspan(static_cast<std::size_t>(m_)); }
  std::span<double> features(int i) { return row(i).subspan(static_cast<std::size_t>(m_)); }

  void append_url(std::span<const double> features);
  // Appends a full row (history and features), used for tests and replay.
  void append_row(std::span<const double> row);
  const std::vector<double>& data() const { return data_; }

  // Copy with rows reordered: result row k = this row order[k].
  Observation permuted(std::span<const int> order) const;

  bool operator==(const Observation&) const = default;

 private:
  std::size_t offset(int i) const { return static_cast<std::size_t>(i) * static_cast<std::size_t>(width()); }

  int m_ = 0;
  int n_f_ = kFeatureCount;
  int step_index_ = 0;
  std::vector<double> data_;
};

// What one step changes in the encoded state.
struct StepOutcome {
  int url_index = 0;
  int per_url_index = 0;
  double recorded_reward = 0.0;
  std::vector<std::pair<int, UrlFeatures>> feature_updates;
  std::vector<UrlFeatures> new_urls;
};

// Decays every history entry by `decay`, overwrites the executed entry with the
// recorded reward, applies feature updates and appends newly discovered URLs.
void apply_outcome(Observation& obs, const StepOutcome& outcome, double decay);
Observation encode_observation(const Observation& previous, const StepOutcome& outcome, double decay);

enum class FindingKind { kNewUrl, kToolInfo, kParameters, kSqli, kXss, kWeakCredential };
const char* finding_kind_name(FindingKind k);
FindingKind parse_finding_kind(const std::string& s);

struct Finding {
  FindingKind kind = FindingKind::kNewUrl;
  int url_index = 0;
  int node_id = 0;
  double value = 0.0;
  int step = 0;  // step index at which it was produced (0-based)
  int status_code = 0;
  int vuln_index = -1;  // index into the node's vulns when kind is a vulnerability
  std::optional<topology::VulnSpec> vuln;
  std::optional<topology::ToolInfo> tool_info;  // banner of the affected URL, if known

  bool is_vulnerability() const {
    return kind == FindingKind::kSqli || kind == FindingKind::kXss || kind == FindingKind::kWeakCredential;
  }
};

nlohmann::json to_json(const Finding& f);
Finding finding_from_json(const nlohmann::json& j);

struct StepResult {
  Observation next_observation;
  DecodedAction action;
  std::int64_t flat_action = 0;
  double value = 0.0;  // V: table values of new findings (+ goal bonus)
  double cost = 0.0;   // C: component cost of the configuration
  double reward = 0.0;
  bool terminated = false;
  bool truncated = false;
  std::vector<Finding> findings;
};

struct EnvOptions {
  int max_steps = 200;
  RewardTables rewards;
  ActionSpaceLayout layout;
};

class Environment {
 public:
  Environment(topology::WebsiteGroundTruth ground_truth, EnvOptions options = {});

  const Observation& reset();
  // Throws InvalidAction for ids outside the current action space and
  // std::logic_error when the episode is over.
  StepResult step(std::int64_t flat_action);
  StepResult step(const ActionId& action) { return step(action.flat(layout().per_url_count())); }

  const Observation& observation() const { return obs_; }
  const ActionSpaceLayout& layout() const { return options_.layout; }
  const RewardTables& rewards() const { return options_.rewards; }
  int max_steps() const { return options_.max_steps; }
  int url_count() const { return static_cast<int>(discovered_.size()); }
  std::int64_t action_count() const { return static_cast<std::int64_t>(url_count()) * layout().per_url_count(); }
  int node_id(int url_index) const { return discovered_.at(static_cast<std::size_t>(url_index)); }
  int total_vuln_count() const { return truth_.total_vuln_count; }
  int vulns_found() const { return static_cast<int>(found_.size()); }
  int steps_taken() const { return steps_; }
  bool episode_over() const { return done_; }
  double episode_return() const { return episode_return_; }

 private:
  UrlFeatures features_for(int node_id) const;
  int discover(int node_id, StepOutcome& outcome);

  void exec_crawler(int url, int depth, int wordlist, StepResult& r, StepOutcome& o);
  void exec_form_detection(int url, StepResult& r, StepOutcome& o);
  void exec_sqli(int url, int level, int risk, int technique, StepResult& r);
  void exec_bruteforce(int url, int user_dict, int password_dict, StepResult& r);
  void exec_xss(int url, int level, StepResult& r);
  void record_vuln(int url, int vuln_index, StepResult& r);

  topology::WebsiteGroundTruth truth_;
  EnvOptions options_;
  std::vector<std::vector<int>> children_;
  std::vector<int> depth_;

  Observation obs_;
  std::vector<int> discovered_;       // url index -> node id
  std::vector<int> url_of_node_;      // node id -> url index or -1
  std::vector<bool> forms_revealed_;  // by url index
  std::set<std::pair<int, int>> found_;  // (node id, vuln index)
  int steps_ = 0;
  bool done_ = false;
  double episode_return_ = 0.0;
};

// One line of the episode trace log.
nlohmann::json trace_record(const StepResult& r, int episode, int step, int discovered_count);

}  // namespace pentrl::sim

#endif  // PENTRL_SIMENV_HPP_
