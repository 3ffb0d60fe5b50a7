#ifndef PENTRL_ACTIONS_HPP_
#define PENTRL_ACTIONS_HPP_

#include <array>
#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

namespace pentrl::sim {

enum class Tool { kCrawler = 0, kFormDetection = 1, kSqli = 2, kBruteForce = 3, kXss = 4 };
inline constexpr int kToolCount = 5;

const char* tool_name(Tool t);
Tool parse_tool(const std::string& s);

// Configuration lattice sizes per tool. Each per-URL action index maps to
// (tool, config tuple) with blocks ordered crawler | form | sqli | brute force | xss,
// lexicographic inside each block. All config values are 1-based.
struct ActionSpaceLayout {
  int crawler_depths = 4;
  int crawler_wordlists = 7;
  int sqli_levels = 5;
  int sqli_risks = 3;
  int sqli_techniques = 6;
  int brute_users = 4;
  int brute_passwords = 6;
  int xss_levels = 3;

  int block_size(Tool t) const;
  int block_offset(Tool t) const;
  int per_url_count() const;  // m

  bool operator==(const ActionSpaceLayout&) const = default;
};

// Config tuple: crawler (depth, wordlist), sqli (level, risk, technique),
// brute force (user dict, password dict), xss (level). Unused slots are 0.
struct SubAction {
  Tool tool = Tool::kCrawler;
  std::array<int, 3> params{0, 0, 0};
  bool operator==(const SubAction&) const = default;
};

struct ActionId {
  int url_index = 0;
  int per_url_index = 0;

  std::int64_t flat(int m) const { return static_cast<std::int64_t>(url_index) * m + per_url_index; }
  bool operator==(const ActionId&) const = default;
};

struct DecodedAction {
  int url_index = 0;
  int per_url_index = 0;
  SubAction sub;
};

SubAction decode_sub_action(int per_url_index, const ActionSpaceLayout& layout);
int encode_sub_action(const SubAction& sub, const ActionSpaceLayout& layout);

// Throws InvalidAction when flat_id is outside [0, m*n).
DecodedAction decode_action(std::int64_t flat_id, int url_count, const ActionSpaceLayout& layout);
std::int64_t encode_action(int url_index, const SubAction& sub, const ActionSpaceLayout& layout);

nlohmann::json sub_action_to_json(const SubAction& sub);
std::string describe(const SubAction& sub);

nlohmann::json to_json(const ActionSpaceLayout& l);
ActionSpaceLayout layout_from_json(const nlohmann::json& j);

}  // namespace pentrl::sim

#endif  // PENTRL_ACTIONS_HPP_
