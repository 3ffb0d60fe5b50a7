#include "pentrl/agent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace pentrl::agent {

using nlohmann::json;

json to_json(const PolicyArchitecture& a) {
  return {{"m", a.m}, {"n_f", a.n_f}, {"hidden", a.hidden}, {"history_scale", a.history_scale}};
}

PolicyArchitecture architecture_from_json(const json& j) {
  PolicyArchitecture a;
  a.m = j.at("m").get<int>();
  a.n_f = j.at("n_f").get<int>();
  a.hidden = j.at("hidden").get<std::vector<int>>();
  a.history_scale = j.at("history_scale").get<double>();
  return a;
}

namespace {

std::vector<int> layer_sizes(const PolicyArchitecture& a, int out) {
  std::vector<int> s{a.input_size()};
  s.insert(s.end(), a.hidden.begin(), a.hidden.end());
  s.push_back(out);
  return s;
}

}  // namespace

Policy::Policy(PolicyArchitecture arch, std::uint64_t seed)
    : arch_(std::move(arch)), actor_(layer_sizes(arch_, arch_.m)), critic_(layer_sizes(arch_, 1)) {
  Rng rng(seed);
  actor_.init_orthogonal(rng, std::sqrt(2.0), 0.01);
  critic_.init_orthogonal(rng, std::sqrt(2.0), 1.0);
  log::info("policy constructed: actor " + std::to_string(actor_.parameter_count()) + " + critic " +
            std::to_string(critic_.parameter_count()) + " = " + std::to_string(parameter_count()) + " parameters");
}

RowMatrix Policy::network_input(const sim::Observation& obs) const {
  if (obs.m() != arch_.m || obs.feature_count() != arch_.n_f) throw MismatchError("observation shape does not match policy");
  const int n = obs.url_count();
  RowMatrix x = Eigen::Map<const RowMatrix>(obs.data().data(), n, obs.width());
  x.leftCols(arch_.m) *= arch_.history_scale;
  return x;
}

std::vector<double> Policy::actor_forward(const sim::Observation& obs) const {
  RowMatrix out = actor_.forward(network_input(obs));
  return {out.data(), out.data() + out.size()};  // row-major: URL blocks in order
}

double Policy::critic_forward(const sim::Observation& obs) const { return critic_.forward(network_input(obs)).sum(); }

PolicyOutput Policy::evaluate(const sim::Observation& obs) const {
  RowMatrix x = network_input(obs);
  RowMatrix logits = actor_.forward(x);
  return {{logits.data(), logits.data() + logits.size()}, critic_.forward(x).sum()};
}

// ---------------------------------------------------------------------------

std::vector<double> log_softmax(std::span<const double> logits) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double z : logits) mx = std::max(mx, z);
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - mx);
  const double lse = mx + std::log(sum);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

SampledAction sample_action(std::span<const double> logits, Rng& rng) {
  if (logits.empty()) throw InvalidArgument("cannot sample from an empty action set");
  for (double z : logits)
    if (!std::isfinite(z)) throw NumericError("non-finite logit");
  auto lp = log_softmax(logits);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double x = u(rng);
  double acc = 0.0;
  std::size_t pick = lp.size() - 1;
  for (std::size_t i = 0; i < lp.size(); ++i) {
    acc += std::exp(lp[i]);
    if (x < acc) {
      pick = i;
      break;
    }
  }
  return {static_cast<std::int64_t>(pick), lp[pick]};
}

std::int64_t argmax(std::span<const double> logits) {
  return static_cast<std::int64_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

double PolicyGrads::squared_norm() const {
  double s = 0.0;
  for (const auto* net : {&actor, &critic})
    for (const auto& l : net->layers()) s += l.weight.squaredNorm() + l.bias.squaredNorm();
  return s;
}

void PolicyGrads::scale(double k) {
  for (auto* net : {&actor, &critic})
    for (auto& l : net->layers()) {
      l.weight *= k;
      l.bias *= k;
    }
}

BatchForward forward_batch(const Policy& policy, std::span<const sim::Observation* const> batch, bool with_actor,
                           bool with_critic) {
  BatchForward f;
  f.offsets.reserve(batch.size() + 1);
  int rows = 0;
  for (const auto* o : batch) {
    f.offsets.push_back(rows);
    rows += o->url_count();
  }
  f.offsets.push_back(rows);
  const auto& arch = policy.architecture();
  RowMatrix x(rows, arch.input_size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto* o = batch[b];
    if (o->m() != arch.m || o->feature_count() != arch.n_f) throw MismatchError("observation shape does not match policy");
    x.middleRows(f.offsets[b], o->url_count()) = Eigen::Map<const RowMatrix>(o->data().data(), o->url_count(), o->width());
  }
  x.leftCols(arch.m) *= arch.history_scale;
  if (with_actor) f.logits = policy.actor().forward(x, &f.actor_cache);
  if (with_critic) {
    RowMatrix v = policy.critic().forward(x, &f.critic_cache);
    f.values.resize(static_cast<Eigen::Index>(batch.size()));
    for (std::size_t b = 0; b < batch.size(); ++b)
      f.values(static_cast<Eigen::Index>(b)) = v.middleRows(f.offsets[b], f.offsets[b + 1] - f.offsets[b]).sum();
  }
  return f;
}

void backward_batch(const Policy& policy, const BatchForward& f, const RowMatrix* grad_logits,
                    const Eigen::VectorXd* grad_values, PolicyGrads& grads) {
  if (grad_logits) policy.actor().backward(f.actor_cache, *grad_logits, grads.actor);
  if (grad_values) {
    const int rows = f.offsets.back();
    RowMatrix g(rows, 1);
    // Sum aggregation: every URL row receives its observation's value gradient.
    for (std::size_t b = 0; b + 1 < f.offsets.size(); ++b)
      g.middleRows(f.offsets[b], f.offsets[b + 1] - f.offsets[b]).setConstant((*grad_values)(static_cast<Eigen::Index>(b)));
    policy.critic().backward(f.critic_cache, g, grads.critic);
  }
}

// ---------------------------------------------------------------------------
// Checkpoints

json to_json(const Checkpoint& c) {
  const auto& p = c.policy;
  return {{"format", "pentrl-checkpoint"},
          {"version", kCheckpointVersion},
          {"algorithm", c.algorithm},
          {"architecture", to_json(p.architecture())},
          {"parameter_count", p.parameter_count()},
          {"actor", to_json(p.actor())},
          {"critic", to_json(p.critic())},
          {"metadata", c.metadata}};
}

Checkpoint checkpoint_from_json(const json& j) {
  Checkpoint c;
  try {
    if (j.value("format", std::string{}) != "pentrl-checkpoint") throw ParseError("not a pentrl checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion) throw MismatchError("unsupported checkpoint version");
    auto arch = architecture_from_json(j.at("architecture"));
    Mlp actor = mlp_from_json(j.at("actor"));
    Mlp critic = mlp_from_json(j.at("critic"));
    std::vector<int> want_actor{arch.input_size()}, want_critic{arch.input_size()};
    for (int h : arch.hidden) {
      want_actor.push_back(h);
      want_critic.push_back(h);
    }
    want_actor.push_back(arch.m);
    want_critic.push_back(1);
    if (actor.sizes() != want_actor || critic.sizes() != want_critic)
      throw MismatchError("checkpoint layer sizes disagree with its architecture metadata");
    c.policy = Policy(arch, 0);
    c.policy.actor() = std::move(actor);
    c.policy.critic() = std::move(critic);
    c.algorithm = j.at("algorithm").get<std::string>();
    c.metadata = j.value("metadata", json::object());
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& c) { write_text_file(path, to_json(c).dump()); }

Checkpoint load_checkpoint(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError("checkpoint '" + path + "': " + e.what());
  }
  return checkpoint_from_json(j);
}

void require_compatible(const PolicyArchitecture& arch, const sim::ActionSpaceLayout& layout) {
  if (arch.m != layout.per_url_count())
    throw MismatchError("checkpoint was built for m=" + std::to_string(arch.m) + " actions per URL, environment has m=" +
                        std::to_string(layout.per_url_count()));
  if (arch.n_f != sim::kFeatureCount)
    throw MismatchError("checkpoint expects n_f=" + std::to_string(arch.n_f) + " features, environment provides " +
                        std::to_string(sim::kFeatureCount));
}

}  // namespace pentrl::agent
