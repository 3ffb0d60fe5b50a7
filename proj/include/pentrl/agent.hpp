#ifndef PENTRL_AGENT_HPP_
#define PENTRL_AGENT_HPP_

// Set-structured actor-critic. One MLP scores the actions of a single URL and
// is shared by every discovered URL; the actor concatenates per-URL blocks
// (permutation equivariant) and the critic sums per-URL values (invariant).

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pentrl/mlp.hpp"
#include "pentrl/simenv.hpp"

namespace pentrl::agent {

struct PolicyArchitecture {
  int m = 146;
  int n_f = sim::kFeatureCount;
  std::vector<int> hidden{64, 32};
  // History entries are raw V - C values in the hundreds; scaled before the first layer.
  double history_scale = 0.01;

  int input_size() const { return m + n_f; }
  bool operator==(const PolicyArchitecture&) const = default;
};

nlohmann::json to_json(const PolicyArchitecture& a);
PolicyArchitecture architecture_from_json(const nlohmann::json& j);

struct PolicyOutput {
  std::vector<double> logits;  // m * n, URL-major
  double value = 0.0;
};

class Policy {
 public:
  Policy() = default;
  // Orthogonal init: hidden gain sqrt(2), actor head 0.01, critic head 1.
  Policy(PolicyArchitecture arch, std::uint64_t seed);

  const PolicyArchitecture& architecture() const { return arch_; }
  Mlp& actor() { return actor_; }
  const Mlp& actor() const { return actor_; }
  Mlp& critic() { return critic_; }
  const Mlp& critic() const { return critic_; }
  std::size_t parameter_count() const { return actor_.parameter_count() + critic_.parameter_count(); }

  RowMatrix network_input(const sim::Observation& obs) const;
  std::vector<double> actor_forward(const sim::Observation& obs) const;
  double critic_forward(const sim::Observation& obs) const;
  PolicyOutput evaluate(const sim::Observation& obs) const;

  bool operator==(const Policy&) const = default;

 private:
  PolicyArchitecture arch_;
  Mlp actor_;
  Mlp critic_;
};

struct SampledAction {
  std::int64_t index = 0;
  double log_prob = 0.0;
};

std::vector<double> log_softmax(std::span<const double> logits);
// Throws NumericError on non-finite logits.
SampledAction sample_action(std::span<const double> logits, Rng& rng);
std::int64_t argmax(std::span<const double> logits);

// Stacked forward pass over a batch of observations with variable URL counts.
struct BatchForward {
  std::vector<int> offsets;  // first row of observation b; offsets.back() == total rows
  RowMatrix logits;          // total_rows x m (empty when the actor was skipped)
  Eigen::VectorXd values;    // per observation
  Mlp::Cache actor_cache;
  Mlp::Cache critic_cache;
};

struct PolicyGrads {
  Mlp actor;
  Mlp critic;
  explicit PolicyGrads(const Policy& p) : actor(p.actor().zeros_like()), critic(p.critic().zeros_like()) {}
  double squared_norm() const;
  void scale(double s);
};

BatchForward forward_batch(const Policy& policy, std::span<const sim::Observation* const> batch, bool with_actor = true,
                           bool with_critic = true);
// Exact reverse-mode gradients given d(loss)/d(logits) rows and d(loss)/d(value) per observation.
void backward_batch(const Policy& policy, const BatchForward& fwd, const RowMatrix* grad_logits,
                    const Eigen::VectorXd* grad_values, PolicyGrads& grads);

// Checkpoint document: architecture metadata + flat parameters.
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  Policy policy;
  std::string algorithm = "ppo";
  nlohmann::json metadata = nlohmann::json::object();
};

nlohmann::json to_json(const Checkpoint& c);
Checkpoint checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const std::string& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::string& path);
// Throws MismatchError if the policy does not fit the environment layout.
void require_compatible(const PolicyArchitecture& arch, const sim::ActionSpaceLayout& layout);

}  // namespace pentrl::agent

#endif  // PENTRL_AGENT_HPP_
