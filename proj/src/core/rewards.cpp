#include "pentrl/rewards.hpp"

#include <algorithm>
#include <cmath>

#include "pentrl/common.hpp"

namespace pentrl::sim {

using nlohmann::json;
using topology::VulnKind;
using topology::XssVariant;

int status_bracket(int status_code) { return std::clamp(status_code / 100 - 1, 0, 4); }

namespace {

void need_positive(std::vector<std::string>& out, const std::string& name, double v) {
  if (!(v > 0.0) || !std::isfinite(v)) out.push_back(name + ": must be positive");
}

void need_table(std::vector<std::string>& out, const std::string& name, const std::vector<double>& t, int size) {
  if (static_cast<int>(t.size()) != size) {
    out.push_back(name + ": expected " + std::to_string(size) + " entries, got " + std::to_string(t.size()));
    return;
  }
  for (double v : t) need_positive(out, name, v);
}

double at1(const std::vector<double>& t, int one_based) { return t.at(static_cast<std::size_t>(one_based - 1)); }

}  // namespace

std::vector<std::string> RewardTables::validate(const ActionSpaceLayout& l) const {
  std::vector<std::string> out;
  if (version != 1) out.push_back("version: unsupported reward-table version");
  need_positive(out, "tool_info", tool_info);
  for (double v : new_url_by_bracket) need_positive(out, "new_url_by_bracket", v);
  need_positive(out, "parameters", parameters);
  need_table(out, "sqli_by_technique", sqli_by_technique, l.sqli_techniques);
  need_positive(out, "xss_stored", xss_stored);
  need_positive(out, "xss_reflected", xss_reflected);
  need_positive(out, "brute_force", brute_force);
  need_positive(out, "goal", goal);
  need_table(out, "crawler_depth_cost", crawler_depth_cost, l.crawler_depths);
  need_table(out, "crawler_wordlist_cost", crawler_wordlist_cost, l.crawler_wordlists);
  need_positive(out, "form_detection_cost", form_detection_cost);
  need_table(out, "sqli_level_cost", sqli_level_cost, l.sqli_levels);
  need_table(out, "sqli_risk_cost", sqli_risk_cost, l.sqli_risks);
  need_table(out, "sqli_technique_cost", sqli_technique_cost, l.sqli_techniques);
  need_table(out, "brute_user_cost", brute_user_cost, l.brute_users);
  need_table(out, "brute_password_cost", brute_password_cost, l.brute_passwords);
  need_table(out, "xss_level_cost", xss_level_cost, l.xss_levels);
  if (!(mu > 0.0 && mu < 1.0)) out.push_back("mu: must lie in (0,1)");
  if (!(decay > 0.0 && decay < 1.0)) out.push_back("decay: must lie in (0,1)");
  return out;
}

double RewardTables::cost(const SubAction& a) const {
  const auto& p = a.params;
  switch (a.tool) {
    case Tool::kCrawler: return at1(crawler_depth_cost, p[0]) + at1(crawler_wordlist_cost, p[1]);
    case Tool::kFormDetection: return form_detection_cost;
    case Tool::kSqli: return at1(sqli_level_cost, p[0]) + at1(sqli_risk_cost, p[1]) + at1(sqli_technique_cost, p[2]);
    case Tool::kBruteForce: return at1(brute_user_cost, p[0]) + at1(brute_password_cost, p[1]);
    case Tool::kXss: return at1(xss_level_cost, p[0]);
  }
  return 0.0;
}

double RewardTables::new_url_value(int status_code) const {
  return new_url_by_bracket[static_cast<std::size_t>(status_bracket(status_code))];
}

double RewardTables::vuln_value(const topology::VulnSpec& v) const {
  switch (v.kind) {
    case VulnKind::kSqli: return at1(sqli_by_technique, v.technique);
    case VulnKind::kXss: return v.variant == XssVariant::kStored ? xss_stored : xss_reflected;
    case VulnKind::kWeakCredential: return brute_force;
  }
  return 0.0;
}

json to_json(const RewardTables& r) {
  return {{"version", r.version},
          {"values",
           {{"tool_info", r.tool_info},
            {"new_url_by_bracket", r.new_url_by_bracket},
            {"parameters", r.parameters},
            {"sqli_by_technique", r.sqli_by_technique},
            {"xss_stored", r.xss_stored},
            {"xss_reflected", r.xss_reflected},
            {"brute_force", r.brute_force},
            {"goal", r.goal}}},
          {"costs",
           {{"crawler_depth", r.crawler_depth_cost},
            {"crawler_wordlist", r.crawler_wordlist_cost},
            {"form_detection", r.form_detection_cost},
            {"sqli_level", r.sqli_level_cost},
            {"sqli_risk", r.sqli_risk_cost},
            {"sqli_technique", r.sqli_technique_cost},
            {"brute_user", r.brute_user_cost},
            {"brute_password", r.brute_password_cost},
            {"xss_level", r.xss_level_cost}}},
          {"mu", r.mu},
          {"decay", r.decay}};
}

RewardTables reward_tables_from_json(const json& j) {
  RewardTables r;
  if (!j.is_object()) throw ConfigError("reward tables must be a JSON object");
  try {
    auto get = [](const json& obj, const char* key, auto& field) {
      if (obj.contains(key)) obj.at(key).get_to(field);
    };
    get(j, "version", r.version);
    if (j.contains("values")) {
      const auto& v = j.at("values");
      get(v, "tool_info", r.tool_info);
      get(v, "new_url_by_bracket", r.new_url_by_bracket);
      get(v, "parameters", r.parameters);
      get(v, "sqli_by_technique", r.sqli_by_technique);
      get(v, "xss_stored", r.xss_stored);
      get(v, "xss_reflected", r.xss_reflected);
      get(v, "brute_force", r.brute_force);
      get(v, "goal", r.goal);
    }
    if (j.contains("costs")) {
      const auto& c = j.at("costs");
      get(c, "crawler_depth", r.crawler_depth_cost);
      get(c, "crawler_wordlist", r.crawler_wordlist_cost);
      get(c, "form_detection", r.form_detection_cost);
      get(c, "sqli_level", r.sqli_level_cost);
      get(c, "sqli_risk", r.sqli_risk_cost);
      get(c, "sqli_technique", r.sqli_technique_cost);
      get(c, "brute_user", r.brute_user_cost);
      get(c, "brute_password", r.brute_password_cost);
      get(c, "xss_level", r.xss_level_cost);
    }
    get(j, "mu", r.mu);
    get(j, "decay", r.decay);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("reward tables: ") + e.what());
  }
  return r;
}

}  // namespace pentrl::sim
