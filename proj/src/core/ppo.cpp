#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "pentrl/trainer.hpp"

namespace pentrl::train {

Adam::Adam(std::size_t size, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps), m_(size, 0.0), v_(size, 0.0) {}

void Adam::step(std::vector<double>& params, const std::vector<double>& grads, double lr) {
  if (params.size() != m_.size() || grads.size() != m_.size()) throw InvalidArgument("optimizer size mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i] * grads[i];
    params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

std::vector<double> flatten(const agent::Policy& p) {
  auto a = p.actor().flatten();
  auto c = p.critic().flatten();
  a.insert(a.end(), c.begin(), c.end());
  return a;
}

void unflatten(agent::Policy& p, const std::vector<double>& flat) {
  const std::size_t na = p.actor().parameter_count();
  if (flat.size() != na + p.critic().parameter_count()) throw MismatchError("flat parameter size mismatch");
  p.actor().unflatten(std::span<const double>(flat.data(), na));
  p.critic().unflatten(std::span<const double>(flat.data() + na, flat.size() - na));
}

std::vector<double> flatten(const agent::PolicyGrads& g) {
  auto a = g.actor.flatten();
  auto c = g.critic.flatten();
  a.insert(a.end(), c.begin(), c.end());
  return a;
}

double clip_grad_norm(agent::PolicyGrads& g, double max_norm) {
  const double norm = std::sqrt(g.squared_norm());
  if (max_norm > 0.0 && norm > max_norm) g.scale(max_norm / (norm + 1e-6));
  return norm;
}

PpoLoss ppo_loss_and_grads(const agent::Policy& policy, const PpoMinibatch& mb, double clip_epsilon, double value_coef,
                           double entropy_coef, agent::PolicyGrads* grads) {
  const std::size_t batch = mb.obs.size();
  if (batch == 0) throw InvalidArgument("empty minibatch");
  const int m = policy.architecture().m;
  auto fwd = agent::forward_batch(policy, mb.obs);
  agent::RowMatrix dlogits = agent::RowMatrix::Zero(fwd.logits.rows(), fwd.logits.cols());
  Eigen::VectorXd dvalues(static_cast<Eigen::Index>(batch));
  const double inv_b = 1.0 / static_cast<double>(batch);

  PpoLoss loss;
  for (std::size_t b = 0; b < batch; ++b) {
    const int row0 = fwd.offsets[b];
    const std::size_t count = static_cast<std::size_t>(fwd.offsets[b + 1] - row0) * static_cast<std::size_t>(m);
    Eigen::Map<const Eigen::ArrayXd> z(fwd.logits.data() + static_cast<std::ptrdiff_t>(row0) * m,
                                       static_cast<Eigen::Index>(count));
    const double mx = z.maxCoeff();
    const Eigen::ArrayXd e = (z - mx).exp();
    const double lse = mx + std::log(e.sum());
    const Eigen::ArrayXd lp = z - lse;
    const Eigen::ArrayXd p = e / e.sum();
    const auto a = static_cast<Eigen::Index>(mb.actions[b]);
    if (a < 0 || a >= lp.size()) throw InvalidAction("stored action outside its observation's action space");

    const double adv = mb.advantages[b];
    const double ratio = std::exp(lp[a] - mb.old_log_probs[b]);
    const double clipped = std::clamp(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon);
    const double surr1 = ratio * adv, surr2 = clipped * adv;
    loss.policy_loss += -std::min(surr1, surr2) * inv_b;
    loss.approx_kl += (mb.old_log_probs[b] - lp[a]) * inv_b;
    if (std::abs(ratio - 1.0) > clip_epsilon) loss.clip_fraction += inv_b;
    // d(-min)/d(log pi_a): the unclipped branch is active unless clipping is binding.
    const bool unclipped_active = surr1 <= surr2 || (ratio >= 1.0 - clip_epsilon && ratio <= 1.0 + clip_epsilon);
    const double d_logp = unclipped_active ? -adv * ratio * inv_b : 0.0;

    const double entropy = -(p * lp).sum();
    loss.entropy += entropy * inv_b;

    Eigen::Map<Eigen::ArrayXd> dz(dlogits.data() + static_cast<std::ptrdiff_t>(row0) * m, static_cast<Eigen::Index>(count));
    // -entropy_coef * H, with dH/dz_j = -p_j (log p_j + H)
    dz = -d_logp * p + entropy_coef * inv_b * p * (lp + entropy);
    dz(a) += d_logp;

    const double err = fwd.values(static_cast<Eigen::Index>(b)) - mb.returns[b];
    loss.value_loss += err * err * inv_b;
    dvalues(static_cast<Eigen::Index>(b)) = 2.0 * value_coef * err * inv_b;
  }
  loss.total = loss.policy_loss + value_coef * loss.value_loss - entropy_coef * loss.entropy;
  if (grads) agent::backward_batch(policy, fwd, &dlogits, &dvalues, *grads);
  return loss;
}

PpoLearner::PpoLearner(agent::Policy& policy, const TrainConfig& config)
    : policy_(policy), config_(config), adam_(policy.parameter_count()), rng_(derive_seed(config.seed, 0x5050)) {}

UpdateStats PpoLearner::update(const RolloutBuffer& buffer, std::int64_t timestep) {
  const std::size_t n = buffer.size();
  if (buffer.advantages.size() != n || buffer.returns.size() != n)
    throw std::logic_error("ppo update before advantages were computed");

  // Normalize advantages over the whole update.
  std::vector<double> adv = buffer.advantages;
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / static_cast<double>(n);
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  const double stdev = std::sqrt(var / static_cast<double>(n));
  for (double& a : adv) a = (a - mean) / (stdev + 1e-8);

  UpdateStats stats;
  stats.lr = linear_lr(config_.initial_lr, timestep, config_.total_timesteps);
  const std::vector<double> before = flatten(policy_);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t bs = std::min<std::size_t>(static_cast<std::size_t>(config_.batch_size), n);

  for (int epoch = 0; epoch < config_.n_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng_);
    for (std::size_t start = 0; start + bs <= n; start += bs) {
      PpoMinibatch mb;
      for (std::size_t k = start; k < start + bs; ++k) {
        const auto& tr = buffer.steps[order[k]];
        mb.obs.push_back(&tr.obs);
        mb.actions.push_back(tr.action);
        mb.old_log_probs.push_back(tr.log_prob);
        mb.advantages.push_back(adv[order[k]]);
        mb.returns.push_back(buffer.returns[order[k]]);
      }
      agent::PolicyGrads grads(policy_);
      auto loss = ppo_loss_and_grads(policy_, mb, config_.clip_epsilon, config_.value_coef, config_.entropy_coef, &grads);
      if (!std::isfinite(loss.total)) {
        unflatten(policy_, before);
        std::ostringstream msg;
        msg << "non-finite PPO loss at epoch " << epoch << " (policy " << loss.policy_loss << ", value "
            << loss.value_loss << ", entropy " << loss.entropy << "); update aborted and parameters restored";
        throw NumericError(msg.str());
      }
      clip_grad_norm(grads, config_.max_grad_norm);
      auto params = flatten(policy_);
      adam_.step(params, flatten(grads), stats.lr);
      unflatten(policy_, params);

      // Diagnostics on the same minibatch, before this step's change is visible.
      stats.policy_loss += loss.policy_loss;
      stats.value_loss += loss.value_loss;
      stats.entropy += loss.entropy;
      stats.approx_kl += loss.approx_kl;
      stats.clip_fraction += loss.clip_fraction;
      ++stats.minibatches;
    }
  }
  if (stats.minibatches > 0) {
    stats.policy_loss /= stats.minibatches;
    stats.value_loss /= stats.minibatches;
    stats.entropy /= stats.minibatches;
    stats.approx_kl /= stats.minibatches;
    stats.clip_fraction /= stats.minibatches;
  }
  return stats;
}

}  // namespace pentrl::train
