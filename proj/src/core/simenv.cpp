#include "pentrl/simenv.hpp"

#include <algorithm>
#include <deque>
#include <stdexcept>

#include "pentrl/common.hpp"

namespace pentrl::sim {

using nlohmann::json;
using topology::VulnKind;

// ---------------------------------------------------------------------------
// Observation

void Observation::append_url(std::span<const double> features) {
  if (static_cast<int>(features.size()) != n_f_) throw InvalidArgument("feature vector has wrong length");
  data_.insert(data_.end(), static_cast<std::size_t>(m_), 0.0);
  data_.insert(data_.end(), features.begin(), features.end());
}

void Observation::append_row(std::span<const double> row) {
  if (static_cast<int>(row.size()) != width()) throw InvalidArgument("state row has wrong length");
  data_.insert(data_.end(), row.begin(), row.end());
}

Observation Observation::permuted(std::span<const int> order) const {
  if (static_cast<int>(order.size()) != url_count()) throw InvalidArgument("permutation size mismatch");
  Observation out(m_, n_f_);
  out.step_index_ = step_index_;
  out.data_.reserve(data_.size());
  for (int src : order) out.append_row(row(src));
  return out;
}

void apply_outcome(Observation& obs, const StepOutcome& o, double decay) {
  for (int i = 0; i < obs.url_count(); ++i)
    for (double& h : obs.history(i)) h *= decay;
  obs.history(o.url_index)[static_cast<std::size_t>(o.per_url_index)] = o.recorded_reward;
  for (const auto& [url, f] : o.feature_updates) std::copy(f.begin(), f.end(), obs.features(url).begin());
  for (const auto& f : o.new_urls) obs.append_url(f);
  obs.set_step_index(obs.step_index() + 1);
}

Observation encode_observation(const Observation& previous, const StepOutcome& outcome, double decay) {
  Observation next = previous;
  apply_outcome(next, outcome, decay);
  return next;
}

// ---------------------------------------------------------------------------
// Findings

const char* finding_kind_name(FindingKind k) {
  switch (k) {
    case FindingKind::kNewUrl: return "new_url";
    case FindingKind::kToolInfo: return "tool_info";
    case FindingKind::kParameters: return "parameters";
    case FindingKind::kSqli: return "sqli";
    case FindingKind::kXss: return "xss";
    case FindingKind::kWeakCredential: return "weak_credential";
  }
  return "?";
}

FindingKind parse_finding_kind(const std::string& s) {
  for (auto k : {FindingKind::kNewUrl, FindingKind::kToolInfo, FindingKind::kParameters, FindingKind::kSqli,
                 FindingKind::kXss, FindingKind::kWeakCredential})
    if (s == finding_kind_name(k)) return k;
  throw ParseError("unknown finding kind '" + s + "'");
}

json to_json(const Finding& f) {
  json j{{"kind", finding_kind_name(f.kind)},
         {"url_index", f.url_index},
         {"node_id", f.node_id},
         {"value", f.value},
         {"step", f.step}};
  if (f.kind == FindingKind::kNewUrl) j["status_code"] = f.status_code;
  if (f.vuln) {
    j["vuln_index"] = f.vuln_index;
    const auto& v = *f.vuln;
    switch (v.kind) {
      case VulnKind::kSqli:
        j["technique"] = v.technique;
        j["technique_name"] = topology::sqli_technique_name(v.technique);
        j["min_level"] = v.min_level;
        j["min_risk"] = v.min_risk;
        break;
      case VulnKind::kXss:
        j["variant"] = topology::xss_variant_name(v.variant);
        j["min_level"] = v.min_level;
        break;
      case VulnKind::kWeakCredential:
        j["user_index"] = v.user_index;
        j["password_index"] = v.password_index;
        break;
    }
  }
  if (f.tool_info) j["tool_info"] = {{"name", f.tool_info->name}, {"version", f.tool_info->version}};
  return j;
}

Finding finding_from_json(const json& j) {
  Finding f;
  f.kind = parse_finding_kind(j.at("kind").get<std::string>());
  f.url_index = j.at("url_index").get<int>();
  f.node_id = j.at("node_id").get<int>();
  f.value = j.at("value").get<double>();
  f.step = j.at("step").get<int>();
  f.status_code = j.value("status_code", 0);
  if (f.is_vulnerability()) {
    f.vuln_index = j.at("vuln_index").get<int>();
    switch (f.kind) {
      case FindingKind::kSqli:
        f.vuln = topology::VulnSpec::sqli(j.at("technique").get<int>(), j.at("min_level").get<int>(),
                                          j.at("min_risk").get<int>());
        break;
      case FindingKind::kXss: {
        auto variant = j.at("variant").get<std::string>() == "stored" ? topology::XssVariant::kStored
                                                                        : topology::XssVariant::kReflected;
        f.vuln = topology::VulnSpec::xss(variant, j.at("min_level").get<int>());
        break;
      }
      default:
        f.vuln = topology::VulnSpec::weak_credential(j.at("user_index").get<int>(), j.at("password_index").get<int>());
        break;
    }
  }
  if (j.contains("tool_info") && !j.at("tool_info").is_null())
    f.tool_info = topology::ToolInfo{j["tool_info"].at("name").get<std::string>(),
                                     j["tool_info"].at("version").get<std::string>()};
  return f;
}

// ---------------------------------------------------------------------------
// Environment

Environment::Environment(topology::WebsiteGroundTruth ground_truth, EnvOptions options)
    : truth_(std::move(ground_truth)), options_(std::move(options)) {
  if (auto problems = options_.rewards.validate(options_.layout); !problems.empty()) throw ConfigError(problems);
  if (options_.max_steps < 1) throw ConfigError("max_steps must be positive");
  if (auto problem = truth_.check_invariants(); !problem.empty())
    throw InvalidArgument("invalid ground truth: " + problem);
  children_ = truth_.tree.children();
  depth_ = truth_.tree.depths();
  reset();
}

UrlFeatures Environment::features_for(int node_id) const {
  UrlFeatures f{};
  const auto& node = truth_.node(node_id);
  f[static_cast<std::size_t>(status_bracket(node.status_code))] = 1.0;
  f[5] = std::min(depth_[static_cast<std::size_t>(node_id)], kDepthNormalizer) / static_cast<double>(kDepthNormalizer);
  f[6] = static_cast<double>(steps_) / options_.max_steps;
  f[7] = 0.0;
  return f;
}

const Observation& Environment::reset() {
  obs_ = Observation(layout().per_url_count());
  discovered_.clear();
  url_of_node_.assign(static_cast<std::size_t>(truth_.tree.node_count) + 1, -1);
  forms_revealed_.clear();
  found_.clear();
  steps_ = 0;
  done_ = false;
  episode_return_ = 0.0;
  StepOutcome unused;
  discover(1, unused);
  obs_.append_url(unused.new_urls.front());
  return obs_;
}

int Environment::discover(int node_id, StepOutcome& outcome) {
  int url = static_cast<int>(discovered_.size());
  discovered_.push_back(node_id);
  url_of_node_[static_cast<std::size_t>(node_id)] = url;
  forms_revealed_.push_back(false);
  outcome.new_urls.push_back(features_for(node_id));
  return url;
}

StepResult Environment::step(std::int64_t flat_action) {
  if (done_) throw std::logic_error("step() called on a finished episode; call reset()");
  StepResult r;
  r.action = decode_action(flat_action, url_count(), layout());
  r.flat_action = flat_action;
  r.cost = options_.rewards.cost(r.action.sub);

  StepOutcome outcome;
  outcome.url_index = r.action.url_index;
  outcome.per_url_index = r.action.per_url_index;
  const auto& p = r.action.sub.params;
  const int url = r.action.url_index;
  switch (r.action.sub.tool) {
    case Tool::kCrawler: exec_crawler(url, p[0], p[1], r, outcome); break;
    case Tool::kFormDetection: exec_form_detection(url, r, outcome); break;
    case Tool::kSqli: exec_sqli(url, p[0], p[1], p[2], r); break;
    case Tool::kBruteForce: exec_bruteforce(url, p[0], p[1], r); break;
    case Tool::kXss: exec_xss(url, p[0], r); break;
  }
  for (const auto& f : r.findings) r.value += f.value;

  if (truth_.total_vuln_count > 0 && vulns_found() == truth_.total_vuln_count &&
      std::any_of(r.findings.begin(), r.findings.end(), [](const Finding& f) { return f.is_vulnerability(); })) {
    r.value += options_.rewards.goal;
    r.terminated = true;
  }
  r.reward = options_.rewards.combine(r.value, r.cost);
  // History stores the unweighted outcome so the state does not depend on mu.
  outcome.recorded_reward = r.value - r.cost;

  ++steps_;
  r.truncated = !r.terminated && steps_ >= options_.max_steps;
  done_ = r.terminated || r.truncated;
  episode_return_ += r.reward;

  apply_outcome(obs_, outcome, options_.rewards.decay);
  r.next_observation = obs_;
  return r;
}

void Environment::exec_crawler(int url, int depth, int wordlist, StepResult& r, StepOutcome& o) {
  // Breadth-first over descendants within `depth` hops; hidden endpoints need
  // a wordlist at least as large as their level (wordlists are nested).
  std::deque<std::pair<int, int>> frontier{{node_id(url), 0}};
  while (!frontier.empty()) {
    auto [node, hops] = frontier.front();
    frontier.pop_front();
    if (hops == depth) continue;
    for (int child : children_[static_cast<std::size_t>(node)]) {
      frontier.emplace_back(child, hops + 1);
      if (url_of_node_[static_cast<std::size_t>(child)] >= 0) continue;
      const auto& gt = truth_.node(child);
      if (gt.hidden_wordlist_min > wordlist) continue;
      int new_url = discover(child, o);
      Finding f;
      f.kind = FindingKind::kNewUrl;
      f.url_index = new_url;
      f.node_id = child;
      f.step = steps_;
      f.status_code = gt.status_code;
      f.value = options_.rewards.new_url_value(gt.status_code);
      f.tool_info = gt.tool_info;
      r.findings.push_back(f);
      if (gt.tool_info) {
        Finding t = f;
        t.kind = FindingKind::kToolInfo;
        t.value = options_.rewards.tool_info;
        r.findings.push_back(t);
      }
    }
  }
}

void Environment::exec_form_detection(int url, StepResult& r, StepOutcome& o) {
  auto idx = static_cast<std::size_t>(url);
  if (forms_revealed_[idx]) return;
  forms_revealed_[idx] = true;
  const auto& gt = truth_.node(node_id(url));
  if (gt.forms.empty()) return;
  Finding f;
  f.kind = FindingKind::kParameters;
  f.url_index = url;
  f.node_id = gt.id;
  f.step = steps_;
  f.value = options_.rewards.parameters;
  f.tool_info = gt.tool_info;
  r.findings.push_back(f);
  UrlFeatures feats;
  auto cur = obs_.features(url);
  std::copy(cur.begin(), cur.end(), feats.begin());
  feats[7] = static_cast<double>(gt.forms.size());
  o.feature_updates.emplace_back(url, feats);
}

void Environment::record_vuln(int url, int vuln_index, StepResult& r) {
  const auto& gt = truth_.node(node_id(url));
  if (!found_.emplace(gt.id, vuln_index).second) return;
  const auto& v = gt.vulns[static_cast<std::size_t>(vuln_index)];
  Finding f;
  switch (v.kind) {
    case VulnKind::kSqli: f.kind = FindingKind::kSqli; break;
    case VulnKind::kXss: f.kind = FindingKind::kXss; break;
    case VulnKind::kWeakCredential: f.kind = FindingKind::kWeakCredential; break;
  }
  f.url_index = url;
  f.node_id = gt.id;
  f.step = steps_;
  f.vuln_index = vuln_index;
  f.vuln = v;
  f.value = options_.rewards.vuln_value(v);
  f.tool_info = gt.tool_info;
  r.findings.push_back(f);
}

void Environment::exec_sqli(int url, int level, int risk, int technique, StepResult& r) {
  if (!forms_revealed_[static_cast<std::size_t>(url)]) return;
  const auto& gt = truth_.node(node_id(url));
  for (std::size_t i = 0; i < gt.vulns.size(); ++i) {
    const auto& v = gt.vulns[i];
    if (v.kind == VulnKind::kSqli && v.technique == technique && level >= v.min_level && risk >= v.min_risk)
      record_vuln(url, static_cast<int>(i), r);
  }
}

void Environment::exec_bruteforce(int url, int user_dict, int password_dict, StepResult& r) {
  if (!forms_revealed_[static_cast<std::size_t>(url)]) return;
  const auto& gt = truth_.node(node_id(url));
  if (!gt.has_login_form()) return;
  for (std::size_t i = 0; i < gt.vulns.size(); ++i) {
    const auto& v = gt.vulns[i];
    if (v.kind == VulnKind::kWeakCredential && v.user_index <= user_dict && v.password_index <= password_dict)
      record_vuln(url, static_cast<int>(i), r);
  }
}

void Environment::exec_xss(int url, int level, StepResult& r) {
  if (!forms_revealed_[static_cast<std::size_t>(url)]) return;
  const auto& gt = truth_.node(node_id(url));
  for (std::size_t i = 0; i < gt.vulns.size(); ++i) {
    const auto& v = gt.vulns[i];
    if (v.kind == VulnKind::kXss && level >= v.min_level) record_vuln(url, static_cast<int>(i), r);
  }
}

json trace_record(const StepResult& r, int episode, int step, int discovered_count) {
  json findings = json::array();
  for (const auto& f : r.findings) findings.push_back(to_json(f));
  return {{"episode", episode},
          {"step", step},
          {"action", r.flat_action},
          {"url_index", r.action.url_index},
          {"per_url_index", r.action.per_url_index},
          {"decoded", sub_action_to_json(r.action.sub)},
          {"V", r.value},
          {"C", r.cost},
          {"reward", r.reward},
          {"findings", findings},
          {"discovered", discovered_count},
          {"terminated", r.terminated},
          {"truncated", r.truncated}};
}

}  // namespace pentrl::sim
