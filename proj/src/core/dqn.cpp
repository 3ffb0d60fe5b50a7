#include <algorithm>
#include <cmath>
#include <random>

#include "train_internal.hpp"

namespace pentrl::train {

PackedObservation PackedObservation::pack(const sim::Observation& obs) {
  PackedObservation p;
  p.m = obs.m();
  p.n_f = obs.feature_count();
  p.step_index = obs.step_index();
  p.urls = obs.url_count();
  p.features.reserve(static_cast<std::size_t>(p.urls * p.n_f));
  for (int i = 0; i < p.urls; ++i) {
    auto h = obs.history(i);
    for (std::size_t k = 0; k < h.size(); ++k)
      if (h[k] != 0.0) p.history.emplace_back(static_cast<std::uint32_t>(i * p.m + static_cast<int>(k)), static_cast<float>(h[k]));
    for (double f : obs.features(i)) p.features.push_back(static_cast<float>(f));
  }
  return p;
}

sim::Observation PackedObservation::unpack() const {
  sim::Observation obs(m, n_f);
  std::vector<double> f(static_cast<std::size_t>(n_f));
  for (int i = 0; i < urls; ++i) {
    for (int k = 0; k < n_f; ++k) f[static_cast<std::size_t>(k)] = features[static_cast<std::size_t>(i * n_f + k)];
    obs.append_url(f);
  }
  for (auto [idx, v] : history) obs.history(static_cast<int>(idx) / m)[idx % static_cast<std::uint32_t>(m)] = v;
  obs.set_step_index(step_index);
  return obs;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw InvalidArgument("replay capacity must be positive");
  items_.reserve(std::min<std::size_t>(capacity, 4096));
}

void ReplayBuffer::add(Item item) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(item));
  } else {
    items_[next_] = std::move(item);
  }
  next_ = (next_ + 1) % capacity_;
}

double epsilon_at(const TrainConfig& c, std::int64_t timestep) {
  const double horizon = c.exploration_fraction * static_cast<double>(c.total_timesteps);
  if (horizon <= 0.0) return c.exploration_final;
  const double frac = std::min(1.0, static_cast<double>(timestep) / horizon);
  return c.exploration_initial + frac * (c.exploration_final - c.exploration_initial);
}

namespace {

// Huber (smooth L1) TD loss on Q(s, a); the actor head of `q` holds the per-URL Q-values.
double dqn_step(agent::Policy& q, const agent::Policy& target, const ReplayBuffer& replay, const TrainConfig& config,
                Adam& adam, double lr, Rng& rng) {
  const int m = q.architecture().m;
  std::uniform_int_distribution<std::size_t> pick(0, replay.size() - 1);
  const std::size_t bs = static_cast<std::size_t>(config.dqn_batch_size);
  std::vector<sim::Observation> obs, next;
  std::vector<const ReplayBuffer::Item*> items;
  obs.reserve(bs);
  next.reserve(bs);
  for (std::size_t k = 0; k < bs; ++k) {
    const auto& it = replay.at(pick(rng));
    items.push_back(&it);
    obs.push_back(it.obs.unpack());
    next.push_back(it.next_obs.unpack());
  }
  std::vector<const sim::Observation*> obs_ptr, next_ptr;
  for (std::size_t k = 0; k < bs; ++k) {
    obs_ptr.push_back(&obs[k]);
    next_ptr.push_back(&next[k]);
  }
  auto tgt = agent::forward_batch(target, next_ptr, true, false);
  auto cur = agent::forward_batch(q, obs_ptr, true, false);
  agent::RowMatrix grad = agent::RowMatrix::Zero(cur.logits.rows(), cur.logits.cols());
  double loss = 0.0;
  for (std::size_t b = 0; b < bs; ++b) {
    const auto* it = items[b];
    double target_value = it->reward;
    if (!it->terminated) {
      const std::size_t count = static_cast<std::size_t>(tgt.offsets[b + 1] - tgt.offsets[b]) * static_cast<std::size_t>(m);
      const double* z = tgt.logits.data() + static_cast<std::ptrdiff_t>(tgt.offsets[b]) * m;
      target_value += config.gamma * *std::max_element(z, z + count);
    }
    double* qa = cur.logits.data() + static_cast<std::ptrdiff_t>(cur.offsets[b]) * m + it->action;
    const double err = *qa - target_value;
    const double abs_err = std::abs(err);
    loss += (abs_err <= 1.0 ? 0.5 * err * err : abs_err - 0.5) / static_cast<double>(bs);
    grad.data()[static_cast<std::ptrdiff_t>(cur.offsets[b]) * m + it->action] =
        std::clamp(err, -1.0, 1.0) / static_cast<double>(bs);
  }
  agent::PolicyGrads grads(q);
  agent::backward_batch(q, cur, &grad, nullptr, grads);
  if (!std::isfinite(loss)) throw NumericError("non-finite DQN loss");
  clip_grad_norm(grads, config.dqn_max_grad_norm);
  auto params = flatten(q);
  adam.step(params, flatten(grads), lr);
  unflatten(q, params);
  return loss;
}

}  // namespace

TrainResult train_dqn(const TrainConfig& config, const std::vector<topology::WebsiteGroundTruth>& train_envs,
                      const std::vector<topology::WebsiteGroundTruth>& val_envs, const sim::RewardTables& rewards,
                      const TrainIo& io) {
  auto run = detail::prepare_run(config, train_envs, val_envs, rewards);
  agent::Policy q(run.arch, derive_seed(config.seed, 1));
  agent::Policy target = q;
  Adam adam(q.parameter_count());
  ReplayBuffer replay(static_cast<std::size_t>(config.buffer_size));
  EnvSlot slot(&run.train, run.options, derive_seed(config.seed, 100));
  Rng rng(derive_seed(config.seed, 0xD0));
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  detail::RunRecorder recorder(config, io);
  const std::int64_t log_every = config.rollout_size();
  std::vector<EpisodeSummary> episodes;
  double train_mean = 0.0, loss_sum = 0.0;
  int loss_count = 0, update = 0;
  ValidationResult val;
  for (std::int64_t t = 0; t < config.total_timesteps; ++t) {
    auto& env = slot.env();
    const sim::Observation& obs = env.observation();
    std::int64_t action;
    if (t < config.learning_starts || coin(rng) < epsilon_at(config, t)) {
      std::uniform_int_distribution<std::int64_t> pick(0, env.action_count() - 1);
      action = pick(rng);
    } else {
      action = agent::argmax(q.actor_forward(obs));
    }
    ReplayBuffer::Item item;
    item.obs = PackedObservation::pack(obs);
    auto r = env.step(action);
    item.action = action;
    item.reward = r.reward * config.reward_scale;
    item.next_obs = PackedObservation::pack(r.next_observation);
    item.terminated = r.terminated;
    replay.add(std::move(item));
    if (r.terminated || r.truncated) {
      episodes.push_back({env.episode_return(), env.vulns_found(), env.total_vuln_count(), env.steps_taken()});
      slot.begin_episode();
    }

    if (t >= config.learning_starts && t % config.train_freq == 0 && replay.size() > 0) {
      loss_sum += dqn_step(q, target, replay, config, adam, linear_lr(config.initial_lr, t, config.total_timesteps), rng);
      ++loss_count;
    }
    if (t % config.target_update_interval == 0) target = q;

    const std::int64_t done_steps = t + 1;
    if (done_steps % log_every == 0 || done_steps == config.total_timesteps) {
      ++update;
      if (!episodes.empty()) train_mean = [&] {
        double s = 0.0;
        for (const auto& e : episodes) s += e.reward;
        return s / static_cast<double>(episodes.size());
      }();
      episodes.clear();
      const bool evaluate = update == 1 || update % config.eval_interval == 0 || done_steps == config.total_timesteps;
      if (evaluate) val = validate_policy(q, run.val, run.options);
      MetricsRow row;
      row.update = update;
      row.timestep = done_steps;
      row.train_reward_mean = train_mean;
      row.val_reward_mean = val.reward_mean;
      row.vulns_found_mean = val.vulns_found_mean;
      row.value_loss = loss_count ? loss_sum / loss_count : 0.0;
      row.lr = linear_lr(config.initial_lr, t, config.total_timesteps);
      recorder.record(row, q, evaluate);
      loss_sum = 0.0;
      loss_count = 0;
    }
  }
  return recorder.finish(q);
}

}  // namespace pentrl::train
