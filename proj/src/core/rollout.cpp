#include <algorithm>
#include <memory>
#include <thread>

#include "pentrl/trainer.hpp"

namespace pentrl::train {

EnvSlot::EnvSlot(const std::vector<topology::WebsiteGroundTruth>* pool, sim::EnvOptions options, std::uint64_t seed)
    : pool_(pool), options_(std::move(options)), rng_(seed) {
  if (!pool_ || pool_->empty()) throw InvalidArgument("environment slot needs a non-empty pool");
  begin_episode();
}

void EnvSlot::begin_episode() {
  std::size_t pick = 0;
  if (pool_->size() > 1) {
    std::uniform_int_distribution<std::size_t> d(0, pool_->size() - 1);
    pick = d(rng_);
  }
  env_.emplace((*pool_)[pick], options_);
  ++episodes_;
}

namespace {

void collect_slot(const agent::Policy& policy, EnvSlot& slot, int horizon, double reward_scale, Transition* out,
                  double& last_value, std::vector<EpisodeSummary>& episodes) {
  bool fresh = slot.env().steps_taken() == 0;
  for (int t = 0; t < horizon; ++t) {
    auto& env = slot.env();
    Transition& tr = out[t];
    tr.obs = env.observation();
    tr.episode_start = fresh;
    auto pred = policy.evaluate(tr.obs);
    auto pick = agent::sample_action(pred.logits, slot.rng());
    auto r = env.step(pick.index);
    tr.action = pick.index;
    tr.log_prob = pick.log_prob;
    tr.value = pred.value;
    tr.reward = r.reward * reward_scale;
    tr.terminated = r.terminated;
    tr.done = r.terminated || r.truncated;
    fresh = tr.done;
    if (tr.done) {
      episodes.push_back({env.episode_return(), env.vulns_found(), env.total_vuln_count(), env.steps_taken()});
      slot.begin_episode();
    }
  }
  last_value = policy.critic_forward(slot.env().observation());
}

}  // namespace

RolloutBuffer collect_rollouts(const agent::Policy& policy, std::vector<EnvSlot>& slots, int horizon,
                               const RolloutOptions& options) {
  if (horizon < 1) throw InvalidArgument("rollout horizon must be positive");
  RolloutBuffer buf;
  buf.n_envs = static_cast<int>(slots.size());
  buf.horizon = horizon;
  buf.steps.resize(slots.size() * static_cast<std::size_t>(horizon));
  buf.last_values.assign(slots.size(), 0.0);
  std::vector<std::vector<EpisodeSummary>> per_env(slots.size());

  auto run_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t e = begin; e < end; ++e)
      collect_slot(policy, slots[e], horizon, options.reward_scale, &buf.steps[e * static_cast<std::size_t>(horizon)],
                   buf.last_values[e], per_env[e]);
  };

  const std::size_t workers =
      options.deterministic ? 1 : std::clamp<std::size_t>(static_cast<std::size_t>(options.threads), 1, slots.size());
  if (workers <= 1) {
    run_range(0, slots.size());
  } else {
    // Workers read the policy only; every slot owns its environment and RNG.
    std::vector<std::thread> pool;
    const std::size_t chunk = (slots.size() + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      std::size_t b = w * chunk, e = std::min(slots.size(), b + chunk);
      if (b < e) pool.emplace_back(run_range, b, e);
    }
    for (auto& t : pool) t.join();
  }
  for (auto& eps : per_env) buf.episodes.insert(buf.episodes.end(), eps.begin(), eps.end());
  return buf;
}

GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values, std::span<const bool> dones,
                      double last_value, double gamma, double gae_lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n) throw InvalidArgument("GAE inputs differ in length");
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double running = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double not_done = dones[i] ? 0.0 : 1.0;
    const double next_value = i + 1 < n ? values[i + 1] : last_value;
    const double delta = rewards[i] + gamma * next_value * not_done - values[i];
    running = delta + gamma * gae_lambda * not_done * running;
    out.advantages[i] = running;
    out.returns[i] = running + values[i];
  }
  return out;
}

void compute_gae(RolloutBuffer& buf, double gamma, double gae_lambda) {
  buf.advantages.assign(buf.size(), 0.0);
  buf.returns.assign(buf.size(), 0.0);
  const auto h = static_cast<std::size_t>(buf.horizon);
  std::vector<double> r(h), v(h);
  // std::vector<bool> has no contiguous storage to hand out as a span.
  auto dones = std::make_unique<bool[]>(h);
  for (int e = 0; e < buf.n_envs; ++e) {
    for (std::size_t t = 0; t < h; ++t) {
      const auto& tr = buf.at(e, static_cast<int>(t));
      r[t] = tr.reward;
      v[t] = tr.value;
      dones[t] = tr.done;
    }
    auto g = compute_gae(r, v, std::span<const bool>(dones.get(), h), buf.last_values[static_cast<std::size_t>(e)], gamma,
                         gae_lambda);
    std::copy(g.advantages.begin(), g.advantages.end(), buf.advantages.begin() + e * buf.horizon);
    std::copy(g.returns.begin(), g.returns.end(), buf.returns.begin() + e * buf.horizon);
  }
}

}  // namespace pentrl::train
