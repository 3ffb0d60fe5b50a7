#ifndef PENTRL_TRAINER_HPP_
#define PENTRL_TRAINER_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pentrl/agent.hpp"
#include "pentrl/simenv.hpp"
#include "pentrl/topology.hpp"

namespace pentrl::train {

enum class Algorithm { kPpo, kDqn };
const char* algorithm_name(Algorithm a);
Algorithm parse_algorithm(const std::string& s);

struct TrainConfig {
  int version = 1;
  Algorithm algorithm = Algorithm::kPpo;
  int steps_per_episode = 200;
  std::int64_t total_timesteps = 1'000'000;
  double initial_lr = 3.29e-3;
  int batch_size = 256;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_epsilon = 0.2;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  int n_epochs = 10;
  double max_grad_norm = 0.5;
  int rollout_steps = 256;  // horizon per collection environment per update
  int n_rollout_envs = 8;   // environments stepped in parallel
  double reward_scale = 0.01;  // applied to rewards seen by the learner only
  std::vector<int> hidden{64, 32};
  int n_train_envs = 50;
  int n_val_envs = 10;
  int eval_interval = 1;  // in updates
  // DQN
  int buffer_size = 100'000;
  int learning_starts = 1'000;
  int train_freq = 4;
  int target_update_interval = 2'000;
  double exploration_fraction = 0.1;
  double exploration_initial = 1.0;
  double exploration_final = 0.05;
  int dqn_batch_size = 32;
  double dqn_max_grad_norm = 10.0;

  std::uint64_t seed = 0;
  int threads = 1;
  bool deterministic = false;

  std::int64_t rollout_size() const { return static_cast<std::int64_t>(rollout_steps) * n_rollout_envs; }
  std::vector<std::string> validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
// Overlays keys present in `j` onto `base`.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

double linear_lr(double initial_lr, std::int64_t timestep, std::int64_t total_timesteps);

// ---------------------------------------------------------------------------
// Rollouts

// One collection environment: draws a training site per episode from the pool
// and keeps its own sampling stream so collection order does not matter.
class EnvSlot {
 public:
  EnvSlot(const std::vector<topology::WebsiteGroundTruth>* pool, sim::EnvOptions options, std::uint64_t seed);

  sim::Environment& env() { return *env_; }
  Rng& rng() { return rng_; }
  void begin_episode();
  int episode_index() const { return episodes_; }

 private:
  const std::vector<topology::WebsiteGroundTruth>* pool_;
  sim::EnvOptions options_;
  Rng rng_;
  std::optional<sim::Environment> env_;
  int episodes_ = 0;
};

struct Transition {
  sim::Observation obs;
  std::int64_t action = 0;
  double log_prob = 0.0;
  double reward = 0.0;  // scaled
  double value = 0.0;
  bool episode_start = false;
  bool done = false;  // episode ended after this transition
  bool terminated = false;
};

struct EpisodeSummary {
  double reward = 0.0;  // unscaled
  int vulns_found = 0;
  int total_vulns = 0;
  int length = 0;
};

struct RolloutBuffer {
  int n_envs = 0;
  int horizon = 0;
  std::vector<Transition> steps;  // env-major: steps[e * horizon + t]
  std::vector<double> last_values;
  std::vector<double> advantages;
  std::vector<double> returns;
  std::vector<EpisodeSummary> episodes;  // completed during collection, in env order

  const Transition& at(int env, int t) const { return steps[static_cast<std::size_t>(env * horizon + t)]; }
  std::size_t size() const { return steps.size(); }
};

struct RolloutOptions {
  double reward_scale = 1.0;
  int threads = 1;
  bool deterministic = true;
};

RolloutBuffer collect_rollouts(const agent::Policy& policy, std::vector<EnvSlot>& slots, int horizon,
                               const RolloutOptions& options);

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// delta_t = r_t + gamma * V_{t+1} * (1 - done_t) - V_t, A_t = sum_k (gamma*lambda)^k delta_{t+k},
// with the sum cut at episode boundaries. V_T = last_value.
GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values, std::span<const bool> dones,
                      double last_value, double gamma, double gae_lambda);
// Fills buffer.advantages/returns stream by stream.
void compute_gae(RolloutBuffer& buffer, double gamma, double gae_lambda);

// ---------------------------------------------------------------------------
// Optimizer

class Adam {
 public:
  explicit Adam(std::size_t size, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-5);
  void step(std::vector<double>& params, const std::vector<double>& grads, double lr);
  std::int64_t steps() const { return t_; }

 private:
  double beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::vector<double> m_, v_;
};

// Flat parameter views over actor + critic.
std::vector<double> flatten(const agent::Policy& p);
void unflatten(agent::Policy& p, const std::vector<double>& flat);
std::vector<double> flatten(const agent::PolicyGrads& g);
// Scales grads in place if their global norm exceeds max_norm; returns the pre-clip norm.
double clip_grad_norm(agent::PolicyGrads& g, double max_norm);

// ---------------------------------------------------------------------------
// PPO

struct PpoLoss {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double total = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
};

struct PpoMinibatch {
  std::vector<const sim::Observation*> obs;
  std::vector<std::int64_t> actions;
  std::vector<double> old_log_probs;
  std::vector<double> advantages;
  std::vector<double> returns;
};

// Clipped-surrogate loss (to minimize) and its gradients wrt all parameters.
PpoLoss ppo_loss_and_grads(const agent::Policy& policy, const PpoMinibatch& mb, double clip_epsilon, double value_coef,
                           double entropy_coef, agent::PolicyGrads* grads);

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  double lr = 0.0;
  int minibatches = 0;
};

class PpoLearner {
 public:
  PpoLearner(agent::Policy& policy, const TrainConfig& config);
  // Requires advantages/returns in the buffer. Throws NumericError (after
  // restoring the pre-update parameters) on a non-finite loss.
  UpdateStats update(const RolloutBuffer& buffer, std::int64_t timestep);

 private:
  agent::Policy& policy_;
  TrainConfig config_;
  Adam adam_;
  Rng rng_;
};

// ---------------------------------------------------------------------------
// Training driver

struct MetricsRow {
  int update = 0;
  std::int64_t timestep = 0;
  double train_reward_mean = 0.0;
  double val_reward_mean = 0.0;
  double vulns_found_mean = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double lr = 0.0;
};

std::string metrics_csv_header();
std::string to_csv_line(const MetricsRow& r);

struct ValidationResult {
  double reward_mean = 0.0;
  double vulns_found_mean = 0.0;
  std::vector<EpisodeSummary> episodes;
};

// Greedy rollouts through the public step interface only.
ValidationResult validate_policy(const agent::Policy& policy, const std::vector<topology::WebsiteGroundTruth>& envs,
                                 const sim::EnvOptions& options);
// Uniform choice over the currently available actions.
ValidationResult random_policy_baseline(const std::vector<topology::WebsiteGroundTruth>& envs,
                                        const sim::EnvOptions& options, int episodes_per_env, std::uint64_t seed);

struct TrainResult {
  agent::Checkpoint best;
  agent::Checkpoint final;
  double best_val_score = 0.0;
  std::vector<MetricsRow> metrics;
};

struct TrainIo {
  std::string run_dir;  // empty: keep everything in memory
  std::function<void(const MetricsRow&)> on_row;
};

TrainResult train(const TrainConfig& config, const std::vector<topology::WebsiteGroundTruth>& train_envs,
                  const std::vector<topology::WebsiteGroundTruth>& val_envs, const sim::RewardTables& rewards,
                  const TrainIo& io = {});

// Internal entry points, exposed for tests.
TrainResult train_ppo(const TrainConfig& config, const std::vector<topology::WebsiteGroundTruth>& train_envs,
                      const std::vector<topology::WebsiteGroundTruth>& val_envs, const sim::RewardTables& rewards,
                      const TrainIo& io);
TrainResult train_dqn(const TrainConfig& config, const std::vector<topology::WebsiteGroundTruth>& train_envs,
                      const std::vector<topology::WebsiteGroundTruth>& val_envs, const sim::RewardTables& rewards,
                      const TrainIo& io);

// Area under the validation-reward curve (trapezoid over timesteps, normalized by span).
double validation_auc(const std::vector<MetricsRow>& rows);

// ---------------------------------------------------------------------------
// DQN pieces exposed for tests

// Sparse copy of an observation: features dense, history as (index, value) pairs.
struct PackedObservation {
  int m = 0;
  int n_f = 0;
  int step_index = 0;
  int urls = 0;
  std::vector<float> features;
  std::vector<std::pair<std::uint32_t, float>> history;

  static PackedObservation pack(const sim::Observation& obs);
  sim::Observation unpack() const;
};

class ReplayBuffer {
 public:
  struct Item {
    PackedObservation obs;
    std::int64_t action = 0;
    double reward = 0.0;
    PackedObservation next_obs;
    bool terminated = false;
  };

  explicit ReplayBuffer(std::size_t capacity);
  void add(Item item);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Item& at(std::size_t i) const { return items_[i]; }

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Item> items_;
};

double epsilon_at(const TrainConfig& c, std::int64_t timestep);

// ---------------------------------------------------------------------------
// Random search

struct SearchSpace {
  std::vector<Algorithm> algorithms{Algorithm::kPpo, Algorithm::kDqn};
  std::vector<int> steps_per_episode{66, 100, 200};
  std::vector<std::vector<int>> hidden{{32, 16}, {64, 32}, {128, 64}};
  double lr_min = 1e-4;
  double lr_max = 1e-2;
  std::vector<int> batch_sizes{64, 128, 256};
};

nlohmann::json to_json(const SearchSpace& s);
SearchSpace search_space_from_json(const nlohmann::json& j);

struct TrialResult {
  int trial = 0;
  TrainConfig config;
  double score = 0.0;
  bool failed = false;
  std::string error;
};

// Ranked best-first; failed trials are kept and ranked last.
std::vector<TrialResult> random_search(const TrainConfig& base, const SearchSpace& space, int trials,
                                       std::int64_t budget_timesteps,
                                       const std::vector<topology::WebsiteGroundTruth>& train_envs,
                                       const std::vector<topology::WebsiteGroundTruth>& val_envs,
                                       const sim::RewardTables& rewards, std::uint64_t seed);

std::string search_results_csv(const std::vector<TrialResult>& ranked);

}  // namespace pentrl::train

#endif  // PENTRL_TRAINER_HPP_
