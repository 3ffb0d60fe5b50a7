#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <set>
#include <sstream>

#include "train_internal.hpp"

namespace pentrl::train {

using nlohmann::json;

const char* algorithm_name(Algorithm a) { return a == Algorithm::kPpo ? "ppo" : "dqn"; }

Algorithm parse_algorithm(const std::string& s) {
  std::string lower = s;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "ppo") return Algorithm::kPpo;
  if (lower == "dqn") return Algorithm::kDqn;
  throw ConfigError("unknown algorithm '" + s + "' (expected ppo or dqn)");
}

std::vector<std::string> TrainConfig::validate() const {
  std::vector<std::string> p;
  auto need = [&p](bool ok, const std::string& msg) {
    if (!ok) p.push_back(msg);
  };
  need(version == 1, "version must be 1");
  need(steps_per_episode >= 1, "steps_per_episode must be >= 1");
  need(total_timesteps >= 1, "total_timesteps must be >= 1");
  need(initial_lr > 0.0 && initial_lr < 1.0, "initial_lr must be in (0, 1)");
  need(batch_size >= 1, "batch_size must be >= 1");
  need(gamma > 0.0 && gamma <= 1.0, "gamma must be in (0, 1]");
  need(gae_lambda > 0.0 && gae_lambda <= 1.0, "gae_lambda must be in (0, 1]");
  need(clip_epsilon > 0.0 && clip_epsilon < 1.0, "clip_epsilon must be in (0, 1)");
  need(value_coef >= 0.0, "value_coef must be >= 0");
  need(entropy_coef >= 0.0, "entropy_coef must be >= 0");
  need(n_epochs >= 1, "n_epochs must be >= 1");
  need(max_grad_norm > 0.0, "max_grad_norm must be > 0");
  need(rollout_steps >= 1, "rollout_steps must be >= 1");
  need(n_rollout_envs >= 1, "n_rollout_envs must be >= 1");
  need(rollout_steps < 1 || n_rollout_envs < 1 || batch_size <= rollout_size(),
       "batch_size must not exceed rollout size (rollout_steps * n_rollout_envs)");
  need(reward_scale > 0.0, "reward_scale must be > 0");
  need(!hidden.empty(), "hidden must list at least one layer");
  for (int h : hidden) need(h >= 1, "hidden layer sizes must be >= 1");
  need(n_train_envs >= 1, "n_train_envs must be >= 1");
  need(n_val_envs >= 1, "n_val_envs must be >= 1");
  need(eval_interval >= 1, "eval_interval must be >= 1");
  need(buffer_size >= 1, "buffer_size must be >= 1");
  need(learning_starts >= 0, "learning_starts must be >= 0");
  need(train_freq >= 1, "train_freq must be >= 1");
  need(target_update_interval >= 1, "target_update_interval must be >= 1");
  need(exploration_fraction >= 0.0 && exploration_fraction <= 1.0, "exploration_fraction must be in [0, 1]");
  need(exploration_initial >= 0.0 && exploration_initial <= 1.0, "exploration_initial must be in [0, 1]");
  need(exploration_final >= 0.0 && exploration_final <= 1.0, "exploration_final must be in [0, 1]");
  need(dqn_batch_size >= 1, "dqn_batch_size must be >= 1");
  need(dqn_max_grad_norm > 0.0, "dqn_max_grad_norm must be > 0");
  need(threads >= 1, "threads must be >= 1");
  return p;
}

json to_json(const TrainConfig& c) {
  return {{"version", c.version},
          {"algorithm", algorithm_name(c.algorithm)},
          {"steps_per_episode", c.steps_per_episode},
          {"total_timesteps", c.total_timesteps},
          {"initial_lr", c.initial_lr},
          {"batch_size", c.batch_size},
          {"gamma", c.gamma},
          {"gae_lambda", c.gae_lambda},
          {"clip_epsilon", c.clip_epsilon},
          {"value_coef", c.value_coef},
          {"entropy_coef", c.entropy_coef},
          {"n_epochs", c.n_epochs},
          {"max_grad_norm", c.max_grad_norm},
          {"rollout_steps", c.rollout_steps},
          {"n_rollout_envs", c.n_rollout_envs},
          {"reward_scale", c.reward_scale},
          {"hidden", c.hidden},
          {"n_train_envs", c.n_train_envs},
          {"n_val_envs", c.n_val_envs},
          {"eval_interval", c.eval_interval},
          {"buffer_size", c.buffer_size},
          {"learning_starts", c.learning_starts},
          {"train_freq", c.train_freq},
          {"target_update_interval", c.target_update_interval},
          {"exploration_fraction", c.exploration_fraction},
          {"exploration_initial", c.exploration_initial},
          {"exploration_final", c.exploration_final},
          {"dqn_batch_size", c.dqn_batch_size},
          {"dqn_max_grad_norm", c.dqn_max_grad_norm},
          {"seed", c.seed},
          {"threads", c.threads},
          {"deterministic", c.deterministic}};
}

namespace {

template <class T>
void overlay(const json& j, const char* key, T& field) {
  if (auto it = j.find(key); it != j.end()) field = it->template get<T>();
}

}  // namespace

TrainConfig train_config_from_json(const json& j, TrainConfig c) {
  if (!j.is_object()) throw ConfigError("training config must be a JSON object");
  static const std::set<std::string> known = [] {
    std::set<std::string> k;
    const json defaults = to_json(TrainConfig{});
    for (auto& [key, _] : defaults.items()) k.insert(key);
    return k;
  }();
  std::vector<std::string> problems;
  for (auto& [key, _] : j.items())
    if (!known.count(key)) problems.push_back("unknown training config key '" + key + "'");
  if (!problems.empty()) throw ConfigError(problems);
  try {
    if (auto it = j.find("algorithm"); it != j.end()) c.algorithm = parse_algorithm(it->get<std::string>());
    overlay(j, "version", c.version);
    overlay(j, "steps_per_episode", c.steps_per_episode);
    overlay(j, "total_timesteps", c.total_timesteps);
    overlay(j, "initial_lr", c.initial_lr);
    overlay(j, "batch_size", c.batch_size);
    overlay(j, "gamma", c.gamma);
    overlay(j, "gae_lambda", c.gae_lambda);
    overlay(j, "clip_epsilon", c.clip_epsilon);
    overlay(j, "value_coef", c.value_coef);
    overlay(j, "entropy_coef", c.entropy_coef);
    overlay(j, "n_epochs", c.n_epochs);
    overlay(j, "max_grad_norm", c.max_grad_norm);
    overlay(j, "rollout_steps", c.rollout_steps);
    overlay(j, "n_rollout_envs", c.n_rollout_envs);
    overlay(j, "reward_scale", c.reward_scale);
    overlay(j, "hidden", c.hidden);
    overlay(j, "n_train_envs", c.n_train_envs);
    overlay(j, "n_val_envs", c.n_val_envs);
    overlay(j, "eval_interval", c.eval_interval);
    overlay(j, "buffer_size", c.buffer_size);
    overlay(j, "learning_starts", c.learning_starts);
    overlay(j, "train_freq", c.train_freq);
    overlay(j, "target_update_interval", c.target_update_interval);
    overlay(j, "exploration_fraction", c.exploration_fraction);
    overlay(j, "exploration_initial", c.exploration_initial);
    overlay(j, "exploration_final", c.exploration_final);
    overlay(j, "dqn_batch_size", c.dqn_batch_size);
    overlay(j, "dqn_max_grad_norm", c.dqn_max_grad_norm);
    overlay(j, "seed", c.seed);
    overlay(j, "threads", c.threads);
    overlay(j, "deterministic", c.deterministic);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("training config: ") + e.what());
  }
  return c;
}

double linear_lr(double initial_lr, std::int64_t timestep, std::int64_t total_timesteps) {
  if (total_timesteps <= 0) return initial_lr;
  const double frac = std::clamp(static_cast<double>(timestep) / static_cast<double>(total_timesteps), 0.0, 1.0);
  return initial_lr * (1.0 - frac);
}

std::string metrics_csv_header() {
  return "update,timestep,train_reward_mean,val_reward_mean,vulns_found_mean,policy_loss,value_loss,entropy,lr";
}

std::string to_csv_line(const MetricsRow& r) {
  std::ostringstream s;
  s << std::setprecision(10) << r.update << ',' << r.timestep << ',' << r.train_reward_mean << ',' << r.val_reward_mean
    << ',' << r.vulns_found_mean << ',' << r.policy_loss << ',' << r.value_loss << ',' << r.entropy << ',' << r.lr;
  return s.str();
}

namespace {

ValidationResult summarize(std::vector<EpisodeSummary> episodes) {
  ValidationResult v;
  for (const auto& e : episodes) {
    v.reward_mean += e.reward;
    v.vulns_found_mean += e.vulns_found;
  }
  if (!episodes.empty()) {
    v.reward_mean /= static_cast<double>(episodes.size());
    v.vulns_found_mean /= static_cast<double>(episodes.size());
  }
  v.episodes = std::move(episodes);
  return v;
}

}  // namespace

ValidationResult validate_policy(const agent::Policy& policy, const std::vector<topology::WebsiteGroundTruth>& envs,
                                 const sim::EnvOptions& options) {
  std::vector<EpisodeSummary> out;
  for (const auto& gt : envs) {
    sim::Environment env(gt, options);
    while (!env.episode_over()) env.step(agent::argmax(policy.actor_forward(env.observation())));
    out.push_back({env.episode_return(), env.vulns_found(), env.total_vuln_count(), env.steps_taken()});
  }
  return summarize(std::move(out));
}

ValidationResult random_policy_baseline(const std::vector<topology::WebsiteGroundTruth>& envs,
                                        const sim::EnvOptions& options, int episodes_per_env, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<EpisodeSummary> out;
  for (const auto& gt : envs)
    for (int k = 0; k < episodes_per_env; ++k) {
      sim::Environment env(gt, options);
      while (!env.episode_over()) {
        std::uniform_int_distribution<std::int64_t> pick(0, env.action_count() - 1);
        env.step(pick(rng));
      }
      out.push_back({env.episode_return(), env.vulns_found(), env.total_vuln_count(), env.steps_taken()});
    }
  return summarize(std::move(out));
}

double validation_auc(const std::vector<MetricsRow>& rows) {
  if (rows.empty()) return 0.0;
  if (rows.size() == 1) return rows.front().val_reward_mean;
  double area = 0.0;
  for (std::size_t i = 1; i < rows.size(); ++i)
    area += 0.5 * (rows[i].val_reward_mean + rows[i - 1].val_reward_mean) *
            static_cast<double>(rows[i].timestep - rows[i - 1].timestep);
  const double span = static_cast<double>(rows.back().timestep - rows.front().timestep);
  return span > 0.0 ? area / span : rows.back().val_reward_mean;
}

namespace detail {

PreparedRun prepare_run(const TrainConfig& config, const std::vector<topology::WebsiteGroundTruth>& train_envs,
                        const std::vector<topology::WebsiteGroundTruth>& val_envs, const sim::RewardTables& rewards) {
  auto problems = config.validate();
  if (train_envs.empty()) problems.push_back("no training environments");
  if (val_envs.empty()) problems.push_back("no validation environments");
  for (auto& p : rewards.validate()) problems.push_back("rewards: " + p);
  if (!problems.empty()) throw ConfigError(problems);

  PreparedRun run;
  const auto nt = std::min(train_envs.size(), static_cast<std::size_t>(config.n_train_envs));
  const auto nv = std::min(val_envs.size(), static_cast<std::size_t>(config.n_val_envs));
  run.train.assign(train_envs.begin(), train_envs.begin() + static_cast<std::ptrdiff_t>(nt));
  run.val.assign(val_envs.begin(), val_envs.begin() + static_cast<std::ptrdiff_t>(nv));

  std::set<std::string> seen;
  for (const auto& gt : run.train) seen.insert(to_json(gt).dump());
  for (const auto& gt : run.val)
    if (seen.count(to_json(gt).dump()))
      throw ConfigError("training and validation environment sets overlap (seed " + std::to_string(gt.seed) + ")");

  run.options.max_steps = config.steps_per_episode;
  run.options.rewards = rewards;
  run.arch.m = run.options.layout.per_url_count();
  run.arch.hidden = config.hidden;
  return run;
}

RunRecorder::RunRecorder(const TrainConfig& config, const TrainIo& io) : config_(config), io_(io) {
  if (io_.run_dir.empty()) return;
  std::filesystem::create_directories(io_.run_dir);
  write_text_file(io_.run_dir + "/config.json", to_json(config_).dump(2) + "\n");
  csv_ = std::make_unique<std::ofstream>(io_.run_dir + "/metrics.csv", std::ios::trunc);
  if (!*csv_) throw IoError("cannot open " + io_.run_dir + "/metrics.csv for writing");
  *csv_ << metrics_csv_header() << '\n';
}

agent::Checkpoint RunRecorder::make_checkpoint(const agent::Policy& policy, std::int64_t timestep, double val) const {
  agent::Checkpoint c;
  c.policy = policy;
  c.algorithm = algorithm_name(config_.algorithm);
  c.metadata = {{"timestep", timestep}, {"val_reward_mean", val}, {"config", to_json(config_)}};
  return c;
}

void RunRecorder::record(const MetricsRow& row, const agent::Policy& policy, bool evaluated) {
  result_.metrics.push_back(row);
  if (csv_) {
    *csv_ << to_csv_line(row) << '\n';
    csv_->flush();
    if (!*csv_) throw IoError("failed writing metrics.csv");
  }
  if (io_.on_row) io_.on_row(row);
  if (evaluated && (!have_best_ || row.val_reward_mean > result_.best_val_score)) {
    have_best_ = true;
    result_.best_val_score = row.val_reward_mean;
    result_.best = make_checkpoint(policy, row.timestep, row.val_reward_mean);
    if (!io_.run_dir.empty()) agent::save_checkpoint(io_.run_dir + "/best.ckpt.json", result_.best);
  }
}

TrainResult RunRecorder::finish(const agent::Policy& policy) {
  const auto& last = result_.metrics.empty() ? MetricsRow{} : result_.metrics.back();
  result_.final = make_checkpoint(policy, last.timestep, last.val_reward_mean);
  if (!have_best_) result_.best = result_.final;
  if (!io_.run_dir.empty()) {
    agent::save_checkpoint(io_.run_dir + "/final.ckpt.json", result_.final);
    if (!have_best_) agent::save_checkpoint(io_.run_dir + "/best.ckpt.json", result_.best);
  }
  return std::move(result_);
}

}  // namespace detail

TrainResult train(const TrainConfig& config, const std::vector<topology::WebsiteGroundTruth>& train_envs,
                  const std::vector<topology::WebsiteGroundTruth>& val_envs, const sim::RewardTables& rewards,
                  const TrainIo& io) {
  return config.algorithm == Algorithm::kPpo ? train_ppo(config, train_envs, val_envs, rewards, io)
                                             : train_dqn(config, train_envs, val_envs, rewards, io);
}

TrainResult train_ppo(const TrainConfig& config, const std::vector<topology::WebsiteGroundTruth>& train_envs,
                      const std::vector<topology::WebsiteGroundTruth>& val_envs, const sim::RewardTables& rewards,
                      const TrainIo& io) {
  auto run = detail::prepare_run(config, train_envs, val_envs, rewards);
  agent::Policy policy(run.arch, derive_seed(config.seed, 1));
  PpoLearner learner(policy, config);
  std::vector<EnvSlot> slots;
  slots.reserve(static_cast<std::size_t>(config.n_rollout_envs));
  for (int i = 0; i < config.n_rollout_envs; ++i)
    slots.emplace_back(&run.train, run.options, derive_seed(config.seed, 100 + static_cast<std::uint64_t>(i)));
  const RolloutOptions ro{config.reward_scale, config.threads, config.deterministic};

  detail::RunRecorder recorder(config, io);
  std::int64_t timestep = 0;
  int update = 0;
  double train_mean = 0.0;
  ValidationResult val;
  while (timestep < config.total_timesteps) {
    auto buf = collect_rollouts(policy, slots, config.rollout_steps, ro);
    compute_gae(buf, config.gamma, config.gae_lambda);
    auto stats = learner.update(buf, timestep);
    timestep += static_cast<std::int64_t>(buf.size());
    ++update;
    if (!buf.episodes.empty()) train_mean = summarize(buf.episodes).reward_mean;
    const bool evaluate = update == 1 || update % config.eval_interval == 0 || timestep >= config.total_timesteps;
    if (evaluate) val = validate_policy(policy, run.val, run.options);
    MetricsRow row{update,  timestep,           train_mean,         val.reward_mean, val.vulns_found_mean,
                   stats.policy_loss, stats.value_loss, stats.entropy, stats.lr};
    recorder.record(row, policy, evaluate);
  }
  return recorder.finish(policy);
}

}  // namespace pentrl::train
