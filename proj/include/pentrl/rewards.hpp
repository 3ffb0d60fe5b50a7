#ifndef PENTRL_REWARDS_HPP_
#define PENTRL_REWARDS_HPP_

#include <array>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pentrl/actions.hpp"
#include "pentrl/topology.hpp"

namespace pentrl::sim {

// Positive values for newly acquired information, fixed per-component action
// costs, the value/cost trade-off mu and the history decay factor.
struct RewardTables {
  int version = 1;

  double tool_info = 4;
  std::array<double, 5> new_url_by_bracket{1, 8, 6, 1, 1};  // 1xx..5xx
  double parameters = 20;
  std::vector<double> sqli_by_technique{60, 60, 80, 90, 100, 100};
  double xss_stored = 90;
  double xss_reflected = 70;
  double brute_force = 150;
  double goal = 1000;

  std::vector<double> crawler_depth_cost{1, 3, 4, 5};
  std::vector<double> crawler_wordlist_cost{1, 2, 3, 4, 5, 6, 9};
  double form_detection_cost = 1;
  std::vector<double> sqli_level_cost{1, 2, 3, 4, 5};
  std::vector<double> sqli_risk_cost{1, 2, 3};
  std::vector<double> sqli_technique_cost{1, 3, 4, 2, 1, 1};
  std::vector<double> brute_user_cost{1, 3, 4, 5};
  std::vector<double> brute_password_cost{1, 3, 5, 6, 8, 9};
  std::vector<double> xss_level_cost{2, 4, 6};

  double mu = 0.5;
  double decay = 0.99;

  std::vector<std::string> validate(const ActionSpaceLayout& layout = {}) const;

  // Sum of the component costs of the configuration.
  double cost(const SubAction& action) const;
  double new_url_value(int status_code) const;
  double vuln_value(const topology::VulnSpec& v) const;
  // mu * value - (1 - mu) * cost
  double combine(double value, double cost) const { return mu * value - (1.0 - mu) * cost; }
};

int status_bracket(int status_code);  // 0..4 for 1xx..5xx

nlohmann::json to_json(const RewardTables& r);
RewardTables reward_tables_from_json(const nlohmann::json& j);

}  // namespace pentrl::sim

#endif  // PENTRL_REWARDS_HPP_
