#include "pentrl/topology.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace pentrl::topology {

using nlohmann::json;

// ---------------------------------------------------------------------------
// TreeGraph

std::vector<int> TreeGraph::parents() const {
  std::vector<int> p(static_cast<std::size_t>(node_count) + 1, 0);
  for (auto [parent, child] : edges) p[static_cast<std::size_t>(child)] = parent;
  return p;
}

std::vector<std::vector<int>> TreeGraph::children() const {
  std::vector<std::vector<int>> c(static_cast<std::size_t>(node_count) + 1);
  for (auto [parent, child] : edges) c[static_cast<std::size_t>(parent)].push_back(child);
  return c;
}

std::vector<int> TreeGraph::depths() const {
  std::vector<int> d(static_cast<std::size_t>(node_count) + 1, 0);
  // Edges are in creation order and parents always precede children.
  for (auto [parent, child] : edges) d[static_cast<std::size_t>(child)] = d[static_cast<std::size_t>(parent)] + 1;
  return d;
}

std::vector<int> TreeGraph::degrees() const {
  std::vector<int> d(static_cast<std::size_t>(node_count) + 1, 0);
  for (auto [a, b] : edges) {
    ++d[static_cast<std::size_t>(a)];
    ++d[static_cast<std::size_t>(b)];
  }
  return d;
}

bool TreeGraph::is_valid_tree() const {
  if (node_count < 1) return false;
  if (edges.size() != static_cast<std::size_t>(node_count - 1)) return false;
  std::vector<int> uf(static_cast<std::size_t>(node_count) + 1);
  std::iota(uf.begin(), uf.end(), 0);
  auto find = [&](int x) {
    while (uf[static_cast<std::size_t>(x)] != x) {
      uf[static_cast<std::size_t>(x)] = uf[static_cast<std::size_t>(uf[static_cast<std::size_t>(x)])];
      x = uf[static_cast<std::size_t>(x)];
    }
    return x;
  };
  std::vector<int> indeg(static_cast<std::size_t>(node_count) + 1, 0);
  for (auto [a, b] : edges) {
    if (a < 1 || b < 1 || a > node_count || b > node_count) return false;
    if (a >= b) return false;  // parent created before child
    if (++indeg[static_cast<std::size_t>(b)] > 1) return false;
    int ra = find(a), rb = find(b);
    if (ra == rb) return false;  // cycle
    uf[static_cast<std::size_t>(ra)] = rb;
  }
  int root = find(1);
  for (int v = 2; v <= node_count; ++v) {
    if (find(v) != root) return false;
    if (indeg[static_cast<std::size_t>(v)] != 1) return false;
  }
  return indeg[1] == 0;
}

// ---------------------------------------------------------------------------
// Names

const char* vuln_kind_name(VulnKind k) {
  switch (k) {
    case VulnKind::kSqli: return "sqli";
    case VulnKind::kXss: return "xss";
    case VulnKind::kWeakCredential: return "weak_credential";
  }
  return "?";
}

VulnKind parse_vuln_kind(const std::string& s) {
  if (s == "sqli") return VulnKind::kSqli;
  if (s == "xss") return VulnKind::kXss;
  if (s == "weak_credential") return VulnKind::kWeakCredential;
  throw ParseError("unknown vulnerability kind '" + s + "'");
}

const char* xss_variant_name(XssVariant v) { return v == XssVariant::kStored ? "stored" : "reflected"; }

const char* sqli_technique_name(int technique) {
  static constexpr const char* kNames[] = {"boolean_blind", "time_blind", "error_based",
                                           "union_query", "stacked_queries", "inline_queries"};
  if (technique < 1 || technique > kSqliTechniqueCount) return "?";
  return kNames[technique - 1];
}

VulnSpec VulnSpec::sqli(int technique, int min_level, int min_risk) {
  VulnSpec v;
  v.kind = VulnKind::kSqli;
  v.technique = technique;
  v.min_level = min_level;
  v.min_risk = min_risk;
  return v;
}

VulnSpec VulnSpec::xss(XssVariant variant, int min_level) {
  VulnSpec v;
  v.kind = VulnKind::kXss;
  v.variant = variant;
  v.min_level = min_level;
  v.min_risk = 1;
  return v;
}

VulnSpec VulnSpec::weak_credential(int user_index, int password_index) {
  VulnSpec v;
  v.kind = VulnKind::kWeakCredential;
  v.user_index = user_index;
  v.password_index = password_index;
  v.min_level = 1;
  v.min_risk = 1;
  return v;
}

bool GroundTruthNode::has_login_form() const {
  return std::any_of(forms.begin(), forms.end(), [](const Form& f) { return f.is_login; });
}

const GroundTruthNode& WebsiteGroundTruth::node(int id) const {
  auto it = nodes.find(id);
  if (it == nodes.end()) throw InvalidArgument("no node with id " + std::to_string(id));
  return it->second;
}

void WebsiteGroundTruth::recount() {
  total_vuln_count = 0;
  for (const auto& [id, n] : nodes) total_vuln_count += static_cast<int>(n.vulns.size());
}

std::string WebsiteGroundTruth::check_invariants() const {
  if (!tree.is_valid_tree()) return "tree is not a valid rooted tree";
  if (nodes.size() != static_cast<std::size_t>(tree.node_count)) return "node table size mismatch";
  int count = 0;
  for (int id = 1; id <= tree.node_count; ++id) {
    auto it = nodes.find(id);
    if (it == nodes.end()) return "missing node " + std::to_string(id);
    const auto& n = it->second;
    const std::string where = "node " + std::to_string(id) + ": ";
    if (n.id != id) return where + "id mismatch";
    if (n.status_code < 100 || n.status_code >= 600) return where + "status out of range";
    if (n.hidden_wordlist_min < 0 || n.hidden_wordlist_min > 7) return where + "hidden level out of range";
    bool ok_status = n.status_code >= 200 && n.status_code < 300;
    if (!ok_status && (!n.forms.empty() || !n.vulns.empty())) return where + "non-2xx node carries forms/vulns";
    for (const auto& f : n.forms)
      if (f.param_count < 1) return where + "form without parameters";
    for (const auto& v : n.vulns) {
      if (n.forms.empty()) return where + "vulnerability without a form";
      switch (v.kind) {
        case VulnKind::kSqli:
          if (v.technique < 1 || v.technique > 6) return where + "bad SQLi technique";
          if (v.min_level < 1 || v.min_level > 5 || v.min_risk < 1 || v.min_risk > 3)
            return where + "bad SQLi thresholds";
          break;
        case VulnKind::kXss:
          if (v.min_level < 1 || v.min_level > 3) return where + "bad XSS threshold";
          break;
        case VulnKind::kWeakCredential:
          if (!n.has_login_form()) return where + "weak credential without login form";
          if (v.user_index < 1 || v.user_index > 4 || v.password_index < 1 || v.password_index > 6)
            return where + "bad credential indices";
          break;
      }
    }
    count += static_cast<int>(n.vulns.size());
  }
  if (count != total_vuln_count) return "total_vuln_count mismatch";
  const auto& root = node(1);
  if (root.hidden_wordlist_min != 0) return "root is hidden";
  if (root.status_code < 200 || root.status_code >= 300) return "root status not 2xx";
  return {};
}

// ---------------------------------------------------------------------------
// SeedConfig

SeedConfig SeedConfig::defaults() {
  SeedConfig c;
  c.tools = {
      {"apache", {"2.2.34", "2.4.29", "2.4.49", "2.4.57"}, 3.0},
      {"nginx", {"1.14.0", "1.18.0", "1.24.0"}, 3.0},
      {"php", {"5.6.40", "7.4.3", "8.1.2"}, 2.0},
      {"wordpress", {"4.9.8", "5.8.1", "6.2"}, 2.0},
      {"drupal", {"7.58", "8.9.0"}, 1.0},
      {"joomla", {"3.9.0", "4.2.7"}, 1.0},
      {"tomcat", {"8.5.31", "9.0.40"}, 1.0},
      {"iis", {"8.5", "10.0"}, 1.0},
  };
  c.hidden_wordlist_probs = std::vector<double>(7, 1.0 / 7.0);
  c.sqli_technique_probs = std::vector<double>(6, 1.0 / 6.0);
  c.sqli_min_level_probs = std::vector<double>(5, 0.2);
  c.sqli_min_risk_probs = {0.5, 0.3, 0.2};
  c.xss_min_level_probs = std::vector<double>(3, 1.0 / 3.0);
  c.cred_user_probs = std::vector<double>(4, 0.25);
  c.cred_password_probs = std::vector<double>(6, 1.0 / 6.0);
  return c;
}

namespace {

void check_distribution(std::vector<std::string>& out, const std::string& name, const double* p,
                        std::size_t size, std::size_t expected) {
  if (size != expected) {
    out.push_back(name + ": expected " + std::to_string(expected) + " entries, got " + std::to_string(size));
    return;
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    if (!(p[i] >= 0.0) || !std::isfinite(p[i])) out.push_back(name + ": negative or non-finite entry");
    sum += p[i];
  }
  if (std::abs(sum - 1.0) > 1e-9) out.push_back(name + ": probabilities sum to " + std::to_string(sum) + ", not 1");
}

void check_probability(std::vector<std::string>& out, const std::string& name, double p) {
  if (!(p >= 0.0 && p <= 1.0)) out.push_back(name + ": must lie in [0,1]");
}

}  // namespace

std::vector<std::string> SeedConfig::validate() const {
  std::vector<std::string> out;
  if (version != 1) out.push_back("version: unsupported seed-config version " + std::to_string(version));
  if (!(node_count_mean > 0.0)) out.push_back("node_count_mean: must be positive");
  check_distribution(out, "status_bracket_probs", status_bracket_probs.data(), 5, 5);
  check_probability(out, "tool_info_prob", tool_info_prob);
  if (tool_info_prob > 0.0 && tools.empty()) out.push_back("tools: catalog is empty");
  for (const auto& t : tools) {
    if (t.name.empty() || t.versions.empty()) out.push_back("tools: entries need a name and versions");
    if (!(t.weight > 0.0)) out.push_back("tools: weights must be positive");
  }
  check_probability(out, "hidden_prob", hidden_prob);
  check_distribution(out, "hidden_wordlist_probs", hidden_wordlist_probs.data(), hidden_wordlist_probs.size(), 7);
  check_probability(out, "form_prob", form_prob);
  if (max_forms < 1) out.push_back("max_forms: must be >= 1");
  if (max_params < 1) out.push_back("max_params: must be >= 1");
  check_probability(out, "login_form_prob", login_form_prob);
  if (!(vuln_count_mean >= 0.0)) out.push_back("vuln_count_mean: must be non-negative");
  if (max_vulns_per_node < 0) out.push_back("max_vulns_per_node: must be non-negative");
  check_distribution(out, "vuln_kind_probs", vuln_kind_probs.data(), 3, 3);
  check_distribution(out, "sqli_technique_probs", sqli_technique_probs.data(), sqli_technique_probs.size(), 6);
  check_distribution(out, "sqli_min_level_probs", sqli_min_level_probs.data(), sqli_min_level_probs.size(), 5);
  check_distribution(out, "sqli_min_risk_probs", sqli_min_risk_probs.data(), sqli_min_risk_probs.size(), 3);
  check_probability(out, "xss_stored_prob", xss_stored_prob);
  check_distribution(out, "xss_min_level_probs", xss_min_level_probs.data(), xss_min_level_probs.size(), 3);
  check_distribution(out, "cred_user_probs", cred_user_probs.data(), cred_user_probs.size(), 4);
  check_distribution(out, "cred_password_probs", cred_password_probs.data(), cred_password_probs.size(), 6);
  return out;
}

json to_json(const SeedConfig& c) {
  json tools = json::array();
  for (const auto& t : c.tools) tools.push_back({{"name", t.name}, {"versions", t.versions}, {"weight", t.weight}});
  return {
      {"version", c.version},
      {"node_count_mean", c.node_count_mean},
      {"status_bracket_probs", c.status_bracket_probs},
      {"tool_info_prob", c.tool_info_prob},
      {"tools", tools},
      {"hidden_prob", c.hidden_prob},
      {"hidden_wordlist_probs", c.hidden_wordlist_probs},
      {"form_prob", c.form_prob},
      {"max_forms", c.max_forms},
      {"max_params", c.max_params},
      {"login_form_prob", c.login_form_prob},
      {"vuln_count_mean", c.vuln_count_mean},
      {"max_vulns_per_node", c.max_vulns_per_node},
      {"vuln_kind_probs", c.vuln_kind_probs},
      {"sqli_technique_probs", c.sqli_technique_probs},
      {"sqli_min_level_probs", c.sqli_min_level_probs},
      {"sqli_min_risk_probs", c.sqli_min_risk_probs},
      {"xss_stored_prob", c.xss_stored_prob},
      {"xss_min_level_probs", c.xss_min_level_probs},
      {"cred_user_probs", c.cred_user_probs},
      {"cred_password_probs", c.cred_password_probs},
      {"root_forced_vuln", c.root_forced_vuln ? json(vuln_kind_name(*c.root_forced_vuln)) : json(nullptr)},
      {"ensure_vulnerability", c.ensure_vulnerability},
  };
}

SeedConfig seed_config_from_json(const json& j) {
  SeedConfig c = SeedConfig::defaults();
  if (!j.is_object()) throw ConfigError("seed config must be a JSON object");
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) j.at(key).get_to(field);
    };
    get("version", c.version);
    get("node_count_mean", c.node_count_mean);
    get("status_bracket_probs", c.status_bracket_probs);
    get("tool_info_prob", c.tool_info_prob);
    if (j.contains("tools")) {
      c.tools.clear();
      for (const auto& t : j.at("tools"))
        c.tools.push_back({t.at("name").get<std::string>(), t.at("versions").get<std::vector<std::string>>(),
                           t.value("weight", 1.0)});
    }
    get("hidden_prob", c.hidden_prob);
    get("hidden_wordlist_probs", c.hidden_wordlist_probs);
    get("form_prob", c.form_prob);
    get("max_forms", c.max_forms);
    get("max_params", c.max_params);
    get("login_form_prob", c.login_form_prob);
    get("vuln_count_mean", c.vuln_count_mean);
    get("max_vulns_per_node", c.max_vulns_per_node);
    get("vuln_kind_probs", c.vuln_kind_probs);
    get("sqli_technique_probs", c.sqli_technique_probs);
    get("sqli_min_level_probs", c.sqli_min_level_probs);
    get("sqli_min_risk_probs", c.sqli_min_risk_probs);
    get("xss_stored_prob", c.xss_stored_prob);
    get("xss_min_level_probs", c.xss_min_level_probs);
    get("cred_user_probs", c.cred_user_probs);
    get("cred_password_probs", c.cred_password_probs);
    if (j.contains("root_forced_vuln")) {
      const auto& r = j.at("root_forced_vuln");
      if (r.is_null())
        c.root_forced_vuln.reset();
      else
        c.root_forced_vuln = parse_vuln_kind(r.get<std::string>());
    }
    get("ensure_vulnerability", c.ensure_vulnerability);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("seed config: ") + e.what());
  } catch (const ParseError& e) {
    throw ConfigError(std::string("seed config: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// Generation

int sample_node_count(Rng& rng, double mean) {
  std::poisson_distribution<int> dist(mean);
  return std::max(2, dist(rng));
}

TreeGraph generate_tree(int n, Rng& rng) {
  if (n < 2) throw InvalidArgument("tree size must be at least 2, got " + std::to_string(n));
  TreeGraph g;
  g.node_count = n;
  g.edges.reserve(static_cast<std::size_t>(n - 1));
  g.edges.emplace_back(1, 2);
  // Multiset M: every endpoint of every edge, so sampling is degree-proportional.
  std::vector<int> multiset{1, 2};
  multiset.reserve(2 * static_cast<std::size_t>(n));
  for (int i = 3; i <= n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(0, multiset.size() - 1);
    int source = multiset[pick(rng)];
    g.edges.emplace_back(source, i);
    multiset.push_back(source);
    multiset.push_back(i);
  }
  return g;
}

namespace {

template <typename Container>
int sample_index(const Container& probs, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double x = u(rng);
  double acc = 0.0;
  int last_nonzero = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] > 0.0) last_nonzero = static_cast<int>(i);
    acc += probs[i];
    if (x < acc) return static_cast<int>(i);
  }
  return last_nonzero;
}

bool bernoulli(double p, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return u(rng) < p;
}

int uniform_int(int lo, int hi, Rng& rng) {
  std::uniform_int_distribution<int> d(lo, hi);
  return d(rng);
}

int status_in_bracket(int bracket, Rng& rng) {
  static const std::vector<int> kCodes[5] = {
      {100, 101}, {200, 201, 204}, {301, 302, 304}, {401, 403, 404}, {500, 502, 503}};
  const auto& codes = kCodes[bracket];
  return codes[static_cast<std::size_t>(uniform_int(0, static_cast<int>(codes.size()) - 1, rng))];
}

VulnSpec sample_vuln(VulnKind kind, const SeedConfig& c, Rng& rng) {
  switch (kind) {
    case VulnKind::kSqli:
      return VulnSpec::sqli(sample_index(c.sqli_technique_probs, rng) + 1, sample_index(c.sqli_min_level_probs, rng) + 1,
                            sample_index(c.sqli_min_risk_probs, rng) + 1);
    case VulnKind::kXss: {
      auto variant = bernoulli(c.xss_stored_prob, rng) ? XssVariant::kStored : XssVariant::kReflected;
      return VulnSpec::xss(variant, sample_index(c.xss_min_level_probs, rng) + 1);
    }
    case VulnKind::kWeakCredential:
      return VulnSpec::weak_credential(sample_index(c.cred_user_probs, rng) + 1,
                                       sample_index(c.cred_password_probs, rng) + 1);
  }
  return {};
}

// Two specs occupying the same slot would be indistinguishable to the tools.
bool same_slot(const VulnSpec& a, const VulnSpec& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case VulnKind::kSqli: return a.technique == b.technique;
    case VulnKind::kXss: return a.variant == b.variant;
    case VulnKind::kWeakCredential: return true;
  }
  return false;
}

Form sample_form(const SeedConfig& c, Rng& rng) {
  Form f;
  f.param_count = uniform_int(1, c.max_params, rng);
  f.is_login = bernoulli(c.login_form_prob, rng);
  return f;
}

bool plant(GroundTruthNode& node, const VulnSpec& spec, const SeedConfig& c, Rng& rng) {
  for (const auto& v : node.vulns)
    if (same_slot(v, spec)) return false;
  if (node.forms.empty()) node.forms.push_back(sample_form(c, rng));
  if (spec.kind == VulnKind::kWeakCredential && !node.has_login_form()) node.forms.front().is_login = true;
  node.vulns.push_back(spec);
  return true;
}

VulnKind sample_kind(const SeedConfig& c, Rng& rng) {
  static constexpr VulnKind kKinds[] = {VulnKind::kSqli, VulnKind::kXss, VulnKind::kWeakCredential};
  return kKinds[sample_index(c.vuln_kind_probs, rng)];
}

GroundTruthNode seed_node(int id, const SeedConfig& c, Rng& rng) {
  GroundTruthNode node;
  node.id = id;
  int bracket = id == 1 ? 1 : sample_index(c.status_bracket_probs, rng);
  node.status_code = status_in_bracket(bracket, rng);
  if (id != 1 && bernoulli(c.hidden_prob, rng)) node.hidden_wordlist_min = sample_index(c.hidden_wordlist_probs, rng) + 1;
  if (bracket != 1) return node;

  if (!c.tools.empty() && bernoulli(c.tool_info_prob, rng)) {
    std::vector<double> w;
    for (const auto& t : c.tools) w.push_back(t.weight);
    std::discrete_distribution<int> pick(w.begin(), w.end());
    const auto& tool = c.tools[static_cast<std::size_t>(pick(rng))];
    const auto& version = tool.versions[static_cast<std::size_t>(uniform_int(0, static_cast<int>(tool.versions.size()) - 1, rng))];
    node.tool_info = ToolInfo{tool.name, version};
  }
  if (bernoulli(c.form_prob, rng)) {
    int count = uniform_int(1, c.max_forms, rng);
    for (int i = 0; i < count; ++i) node.forms.push_back(sample_form(c, rng));
    std::poisson_distribution<int> vulns(c.vuln_count_mean);
    int k = c.vuln_count_mean > 0.0 ? std::min(vulns(rng), c.max_vulns_per_node) : 0;
    for (int i = 0; i < k; ++i) plant(node, sample_vuln(sample_kind(c, rng), c, rng), c, rng);
  }
  return node;
}

}  // namespace

WebsiteGroundTruth seed_ground_truth(const TreeGraph& tree, const SeedConfig& config, Rng& rng) {
  if (auto problems = config.validate(); !problems.empty()) throw ConfigError(problems);
  if (!tree.is_valid_tree()) throw InvalidArgument("seed_ground_truth: input is not a valid tree");

  WebsiteGroundTruth gt;
  gt.tree = tree;
  const std::uint64_t base = rng();
  for (int id = 1; id <= tree.node_count; ++id) {
    Rng node_rng(derive_seed(base, static_cast<std::uint64_t>(id)));
    gt.nodes.emplace(id, seed_node(id, config, node_rng));
  }

  Rng fixup(derive_seed(base, 0));
  if (config.root_forced_vuln) {
    auto& root = gt.nodes.at(1);
    plant(root, sample_vuln(*config.root_forced_vuln, config, fixup), config, fixup);
  }
  gt.recount();
  if (gt.total_vuln_count == 0 && config.ensure_vulnerability) {
    std::vector<int> candidates;
    for (const auto& [id, n] : gt.nodes)
      if (n.status_code >= 200 && n.status_code < 300) candidates.push_back(id);
    int target = candidates[static_cast<std::size_t>(uniform_int(0, static_cast<int>(candidates.size()) - 1, fixup))];
    plant(gt.nodes.at(target), sample_vuln(sample_kind(config, fixup), config, fixup), config, fixup);
    gt.recount();
  }
  return gt;
}

WebsiteGroundTruth generate_environment(const SeedConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  int n = sample_node_count(rng, config.node_count_mean);
  TreeGraph tree = generate_tree(n, rng);
  WebsiteGroundTruth gt = seed_ground_truth(tree, config, rng);
  gt.seed = seed;
  return gt;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

json vuln_to_json(const VulnSpec& v) {
  json j{{"kind", vuln_kind_name(v.kind)}, {"min_level", v.min_level}};
  switch (v.kind) {
    case VulnKind::kSqli:
      j["technique"] = v.technique;
      j["min_risk"] = v.min_risk;
      break;
    case VulnKind::kXss: j["variant"] = xss_variant_name(v.variant); break;
    case VulnKind::kWeakCredential:
      j["user_index"] = v.user_index;
      j["password_index"] = v.password_index;
      break;
  }
  return j;
}

VulnSpec vuln_from_json(const json& j) {
  VulnKind kind = parse_vuln_kind(j.at("kind").get<std::string>());
  switch (kind) {
    case VulnKind::kSqli:
      return VulnSpec::sqli(j.at("technique").get<int>(), j.at("min_level").get<int>(), j.at("min_risk").get<int>());
    case VulnKind::kXss: {
      auto name = j.at("variant").get<std::string>();
      if (name != "stored" && name != "reflected") throw ParseError("unknown XSS variant '" + name + "'");
      return VulnSpec::xss(name == "stored" ? XssVariant::kStored : XssVariant::kReflected, j.at("min_level").get<int>());
    }
    case VulnKind::kWeakCredential:
      return VulnSpec::weak_credential(j.at("user_index").get<int>(), j.at("password_index").get<int>());
  }
  return {};
}

}  // namespace

json to_json(const WebsiteGroundTruth& gt) {
  json edges = json::array();
  for (auto [a, b] : gt.tree.edges) edges.push_back({a, b});
  json nodes = json::array();
  for (const auto& [id, n] : gt.nodes) {
    json forms = json::array();
    for (const auto& f : n.forms) forms.push_back({{"param_count", f.param_count}, {"is_login", f.is_login}});
    json vulns = json::array();
    for (const auto& v : n.vulns) vulns.push_back(vuln_to_json(v));
    json node{{"id", id},
              {"status_code", n.status_code},
              {"hidden_wordlist_min", n.hidden_wordlist_min},
              {"tool_info", n.tool_info ? json{{"name", n.tool_info->name}, {"version", n.tool_info->version}} : json(nullptr)},
              {"forms", forms},
              {"vulns", vulns}};
    nodes.push_back(std::move(node));
  }
  return {{"schema", "pentrl-environment"},
          {"schema_version", kEnvironmentSchemaVersion},
          {"seed", gt.seed},
          {"node_count", gt.tree.node_count},
          {"total_vuln_count", gt.total_vuln_count},
          {"edges", edges},
          {"nodes", nodes}};
}

WebsiteGroundTruth ground_truth_from_json(const json& j) {
  WebsiteGroundTruth gt;
  try {
    if (j.value("schema", std::string{}) != "pentrl-environment") throw ParseError("not a pentrl environment document");
    if (j.at("schema_version").get<int>() != kEnvironmentSchemaVersion)
      throw ParseError("unsupported environment schema version");
    gt.seed = j.at("seed").get<std::uint64_t>();
    gt.tree.node_count = j.at("node_count").get<int>();
    for (const auto& e : j.at("edges")) gt.tree.edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    for (const auto& jn : j.at("nodes")) {
      GroundTruthNode n;
      n.id = jn.at("id").get<int>();
      n.status_code = jn.at("status_code").get<int>();
      n.hidden_wordlist_min = jn.at("hidden_wordlist_min").get<int>();
      if (!jn.at("tool_info").is_null())
        n.tool_info = ToolInfo{jn["tool_info"].at("name").get<std::string>(), jn["tool_info"].at("version").get<std::string>()};
      for (const auto& f : jn.at("forms")) n.forms.push_back({f.at("param_count").get<int>(), f.at("is_login").get<bool>()});
      for (const auto& v : jn.at("vulns")) n.vulns.push_back(vuln_from_json(v));
      gt.nodes.emplace(n.id, std::move(n));
    }
    gt.total_vuln_count = j.at("total_vuln_count").get<int>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("environment document: ") + e.what());
  }
  if (auto problem = gt.check_invariants(); !problem.empty()) throw ParseError("environment document: " + problem);
  return gt;
}

}  // namespace pentrl::topology
