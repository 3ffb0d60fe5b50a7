#include <algorithm>
#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>

#include "pentrl/trainer.hpp"

namespace pentrl::train {

using nlohmann::json;

json to_json(const SearchSpace& s) {
  std::vector<std::string> algs;
  for (auto a : s.algorithms) algs.emplace_back(algorithm_name(a));
  return {{"algorithms", algs},       {"steps_per_episode", s.steps_per_episode}, {"hidden", s.hidden},
          {"lr_min", s.lr_min},       {"lr_max", s.lr_max},                       {"batch_sizes", s.batch_sizes}};
}

SearchSpace search_space_from_json(const json& j) {
  SearchSpace s;
  try {
    if (auto it = j.find("algorithms"); it != j.end()) {
      s.algorithms.clear();
      for (const auto& a : *it) s.algorithms.push_back(parse_algorithm(a.get<std::string>()));
    }
    if (auto it = j.find("steps_per_episode"); it != j.end()) s.steps_per_episode = it->get<std::vector<int>>();
    if (auto it = j.find("hidden"); it != j.end()) s.hidden = it->get<std::vector<std::vector<int>>>();
    s.lr_min = j.value("lr_min", s.lr_min);
    s.lr_max = j.value("lr_max", s.lr_max);
    if (auto it = j.find("batch_sizes"); it != j.end()) s.batch_sizes = it->get<std::vector<int>>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("search space: ") + e.what());
  }
  std::vector<std::string> problems;
  if (s.algorithms.empty()) problems.emplace_back("search space: algorithms is empty");
  if (s.steps_per_episode.empty()) problems.emplace_back("search space: steps_per_episode is empty");
  if (s.hidden.empty()) problems.emplace_back("search space: hidden is empty");
  if (s.batch_sizes.empty()) problems.emplace_back("search space: batch_sizes is empty");
  for (int b : s.batch_sizes)
    if (b < 1 || (b & (b - 1)) != 0) problems.push_back("search space: batch size " + std::to_string(b) + " is not a power of two");
  if (!(s.lr_min > 0.0 && s.lr_min <= s.lr_max)) problems.emplace_back("search space: need 0 < lr_min <= lr_max");
  if (!problems.empty()) throw ConfigError(problems);
  return s;
}

std::vector<TrialResult> random_search(const TrainConfig& base, const SearchSpace& space, int trials,
                                       std::int64_t budget_timesteps,
                                       const std::vector<topology::WebsiteGroundTruth>& train_envs,
                                       const std::vector<topology::WebsiteGroundTruth>& val_envs,
                                       const sim::RewardTables& rewards, std::uint64_t seed) {
  if (trials < 1) throw InvalidArgument("trials must be >= 1");
  if (budget_timesteps < 1) throw InvalidArgument("budget must be >= 1 timestep");
  Rng rng(seed);
  auto pick = [&rng](const auto& v) {
    std::uniform_int_distribution<std::size_t> d(0, v.size() - 1);
    return v[d(rng)];
  };
  std::uniform_real_distribution<double> u(std::log(space.lr_min), std::log(space.lr_max));

  std::vector<TrialResult> results;
  for (int k = 0; k < trials; ++k) {
    TrialResult r;
    r.trial = k;
    r.config = base;
    r.config.algorithm = pick(space.algorithms);
    r.config.steps_per_episode = pick(space.steps_per_episode);
    r.config.hidden = pick(space.hidden);
    r.config.initial_lr = std::exp(u(rng));
    r.config.batch_size = pick(space.batch_sizes);
    r.config.total_timesteps = budget_timesteps;
    r.config.seed = derive_seed(seed, static_cast<std::uint64_t>(k) + 1);
    try {
      auto out = train(r.config, train_envs, val_envs, rewards);
      r.score = out.best_val_score;
    } catch (const std::exception& e) {
      r.failed = true;
      r.error = e.what();
      log::warn("search trial " + std::to_string(k) + " failed: " + r.error);
    }
    results.push_back(std::move(r));
  }
  std::stable_sort(results.begin(), results.end(), [](const TrialResult& a, const TrialResult& b) {
    if (a.failed != b.failed) return !a.failed;
    return a.score > b.score;
  });
  return results;
}

std::string search_results_csv(const std::vector<TrialResult>& ranked) {
  std::ostringstream s;
  s << "rank,trial,algorithm,steps_per_episode,hidden,initial_lr,batch_size,seed,score,status,error\n";
  s << std::setprecision(10);
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const auto& r = ranked[i];
    std::string hidden;
    for (std::size_t h = 0; h < r.config.hidden.size(); ++h) hidden += (h ? "x" : "") + std::to_string(r.config.hidden[h]);
    std::string err = r.error;
    std::replace(err.begin(), err.end(), '"', '\'');
    std::replace(err.begin(), err.end(), '\n', ' ');
    s << i + 1 << ',' << r.trial << ',' << algorithm_name(r.config.algorithm) << ',' << r.config.steps_per_episode << ','
      << hidden << ',' << r.config.initial_lr << ',' << r.config.batch_size << ',' << r.config.seed << ',';
    if (!r.failed) s << r.score;
    s << ',' << (r.failed ? "failed" : "ok") << ",\"" << err << "\"\n";
  }
  return s.str();
}

}  // namespace pentrl::train
