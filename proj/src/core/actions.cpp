#include "pentrl/actions.hpp"

#include "pentrl/common.hpp"

namespace pentrl::sim {

using nlohmann::json;

const char* tool_name(Tool t) {
  switch (t) {
    case Tool::kCrawler: return "crawler";
    case Tool::kFormDetection: return "form_detection";
    case Tool::kSqli: return "sqli";
    case Tool::kBruteForce: return "bruteforce";
    case Tool::kXss: return "xss";
  }
  return "?";
}

Tool parse_tool(const std::string& s) {
  for (int i = 0; i < kToolCount; ++i)
    if (s == tool_name(static_cast<Tool>(i))) return static_cast<Tool>(i);
  throw ParseError("unknown tool '" + s + "'");
}

int ActionSpaceLayout::block_size(Tool t) const {
  switch (t) {
    case Tool::kCrawler: return crawler_depths * crawler_wordlists;
    case Tool::kFormDetection: return 1;
    case Tool::kSqli: return sqli_levels * sqli_risks * sqli_techniques;
    case Tool::kBruteForce: return brute_users * brute_passwords;
    case Tool::kXss: return xss_levels;
  }
  return 0;
}

int ActionSpaceLayout::block_offset(Tool t) const {
  int off = 0;
  for (int i = 0; i < static_cast<int>(t); ++i) off += block_size(static_cast<Tool>(i));
  return off;
}

int ActionSpaceLayout::per_url_count() const { return block_offset(Tool::kXss) + block_size(Tool::kXss); }

SubAction decode_sub_action(int idx, const ActionSpaceLayout& l) {
  if (idx < 0 || idx >= l.per_url_count())
    throw InvalidAction("per-URL action index " + std::to_string(idx) + " out of range");
  SubAction s;
  for (int t = kToolCount - 1; t >= 0; --t) {
    Tool tool = static_cast<Tool>(t);
    int off = l.block_offset(tool);
    if (idx < off) continue;
    int local = idx - off;
    s.tool = tool;
    switch (tool) {
      case Tool::kCrawler:
        s.params = {local / l.crawler_wordlists + 1, local % l.crawler_wordlists + 1, 0};
        break;
      case Tool::kFormDetection: s.params = {0, 0, 0}; break;
      case Tool::kSqli: {
        int per_level = l.sqli_risks * l.sqli_techniques;
        s.params = {local / per_level + 1, (local % per_level) / l.sqli_techniques + 1, local % l.sqli_techniques + 1};
        break;
      }
      case Tool::kBruteForce:
        s.params = {local / l.brute_passwords + 1, local % l.brute_passwords + 1, 0};
        break;
      case Tool::kXss: s.params = {local + 1, 0, 0}; break;
    }
    return s;
  }
  return s;
}

int encode_sub_action(const SubAction& s, const ActionSpaceLayout& l) {
  auto in = [](int v, int hi) { return v >= 1 && v <= hi; };
  const auto& p = s.params;
  int local = 0;
  switch (s.tool) {
    case Tool::kCrawler:
      if (!in(p[0], l.crawler_depths) || !in(p[1], l.crawler_wordlists)) throw InvalidAction("crawler config out of range");
      local = (p[0] - 1) * l.crawler_wordlists + (p[1] - 1);
      break;
    case Tool::kFormDetection: local = 0; break;
    case Tool::kSqli:
      if (!in(p[0], l.sqli_levels) || !in(p[1], l.sqli_risks) || !in(p[2], l.sqli_techniques))
        throw InvalidAction("sqli config out of range");
      local = ((p[0] - 1) * l.sqli_risks + (p[1] - 1)) * l.sqli_techniques + (p[2] - 1);
      break;
    case Tool::kBruteForce:
      if (!in(p[0], l.brute_users) || !in(p[1], l.brute_passwords)) throw InvalidAction("bruteforce config out of range");
      local = (p[0] - 1) * l.brute_passwords + (p[1] - 1);
      break;
    case Tool::kXss:
      if (!in(p[0], l.xss_levels)) throw InvalidAction("xss config out of range");
      local = p[0] - 1;
      break;
  }
  return l.block_offset(s.tool) + local;
}

DecodedAction decode_action(std::int64_t flat_id, int url_count, const ActionSpaceLayout& l) {
  const std::int64_t m = l.per_url_count();
  if (url_count < 0 || flat_id < 0 || flat_id >= m * url_count)
    throw InvalidAction("action id " + std::to_string(flat_id) + " outside [0, " + std::to_string(m * url_count) + ")");
  DecodedAction d;
  d.url_index = static_cast<int>(flat_id / m);
  d.per_url_index = static_cast<int>(flat_id % m);
  d.sub = decode_sub_action(d.per_url_index, l);
  return d;
}

std::int64_t encode_action(int url_index, const SubAction& sub, const ActionSpaceLayout& l) {
  if (url_index < 0) throw InvalidAction("negative URL index");
  return static_cast<std::int64_t>(url_index) * l.per_url_count() + encode_sub_action(sub, l);
}

json sub_action_to_json(const SubAction& s) {
  json j{{"tool", tool_name(s.tool)}};
  switch (s.tool) {
    case Tool::kCrawler:
      j["depth"] = s.params[0];
      j["wordlist"] = s.params[1];
      break;
    case Tool::kFormDetection: break;
    case Tool::kSqli:
      j["level"] = s.params[0];
      j["risk"] = s.params[1];
      j["technique"] = s.params[2];
      break;
    case Tool::kBruteForce:
      j["user_dict"] = s.params[0];
      j["password_dict"] = s.params[1];
      break;
    case Tool::kXss: j["level"] = s.params[0]; break;
  }
  return j;
}

std::string describe(const SubAction& s) {
  auto p = s.params;
  switch (s.tool) {
    case Tool::kCrawler: return "crawler(depth=" + std::to_string(p[0]) + ", wordlist=" + std::to_string(p[1]) + ")";
    case Tool::kFormDetection: return "form_detection()";
    case Tool::kSqli:
      return "sqli(level=" + std::to_string(p[0]) + ", risk=" + std::to_string(p[1]) +
             ", technique=" + std::to_string(p[2]) + ")";
    case Tool::kBruteForce:
      return "bruteforce(user_dict=" + std::to_string(p[0]) + ", password_dict=" + std::to_string(p[1]) + ")";
    case Tool::kXss: return "xss(level=" + std::to_string(p[0]) + ")";
  }
  return "?";
}

json to_json(const ActionSpaceLayout& l) {
  return {{"crawler_depths", l.crawler_depths}, {"crawler_wordlists", l.crawler_wordlists},
          {"sqli_levels", l.sqli_levels},       {"sqli_risks", l.sqli_risks},
          {"sqli_techniques", l.sqli_techniques}, {"brute_users", l.brute_users},
          {"brute_passwords", l.brute_passwords}, {"xss_levels", l.xss_levels}};
}

ActionSpaceLayout layout_from_json(const json& j) {
  ActionSpaceLayout l;
  l.crawler_depths = j.value("crawler_depths", l.crawler_depths);
  l.crawler_wordlists = j.value("crawler_wordlists", l.crawler_wordlists);
  l.sqli_levels = j.value("sqli_levels", l.sqli_levels);
  l.sqli_risks = j.value("sqli_risks", l.sqli_risks);
  l.sqli_techniques = j.value("sqli_techniques", l.sqli_techniques);
  l.brute_users = j.value("brute_users", l.brute_users);
  l.brute_passwords = j.value("brute_passwords", l.brute_passwords);
  l.xss_levels = j.value("xss_levels", l.xss_levels);
  return l;
}

}  // namespace pentrl::sim
