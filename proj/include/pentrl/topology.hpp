#ifndef PENTRL_TOPOLOGY_HPP_
#define PENTRL_TOPOLOGY_HPP_

// Procedural website generation: preferential-attachment trees and the hidden
// per-node content (status codes, software banners, forms, planted vulns).

#include <array>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "pentrl/common.hpp"

namespace pentrl::topology {

struct TreeGraph {
  int node_count = 0;
  // (parent, child) over node ids 1..node_count, in creation order.
  std::vector<std::pair<int, int>> edges;

  // parent[id] for id in 1..n; parent[1] == 0.
  std::vector<int> parents() const;
  // children[id], ordered by creation index.
  std::vector<std::vector<int>> children() const;
  std::vector<int> depths() const;
  std::vector<int> degrees() const;
  // n-1 edges, connected, acyclic (union-find), node 1 root.
  bool is_valid_tree() const;

  bool operator==(const TreeGraph&) const = default;
};

enum class VulnKind { kSqli, kXss, kWeakCredential };
enum class XssVariant { kStored, kReflected };

inline constexpr int kSqliTechniqueCount = 6;

const char* vuln_kind_name(VulnKind k);
VulnKind parse_vuln_kind(const std::string& s);
const char* xss_variant_name(XssVariant v);
const char* sqli_technique_name(int technique);  // 1-based

struct VulnSpec {
  VulnKind kind = VulnKind::kSqli;
  int technique = 1;  // SQLi, 1..6
  XssVariant variant = XssVariant::kStored;
  int user_index = 1;      // weak credential, 1..4
  int password_index = 1;  // weak credential, 1..6
  int min_level = 1;
  int min_risk = 1;  // SQLi only

  static VulnSpec sqli(int technique, int min_level, int min_risk);
  static VulnSpec xss(XssVariant variant, int min_level);
  static VulnSpec weak_credential(int user_index, int password_index);

  bool operator==(const VulnSpec&) const = default;
};

struct Form {
  int param_count = 1;
  bool is_login = false;
  bool operator==(const Form&) const = default;
};

struct ToolInfo {
  std::string name;
  std::string version;
  bool operator==(const ToolInfo&) const = default;
};

struct GroundTruthNode {
  int id = 0;
  int status_code = 200;
  int hidden_wordlist_min = 0;  // 0 = plain crawl finds it
  std::optional<ToolInfo> tool_info;
  std::vector<Form> forms;
  std::vector<VulnSpec> vulns;

  bool has_login_form() const;
  bool operator==(const GroundTruthNode&) const = default;
};

struct WebsiteGroundTruth {
  TreeGraph tree;
  std::map<int, GroundTruthNode> nodes;
  int total_vuln_count = 0;
  std::uint64_t seed = 0;

  const GroundTruthNode& node(int id) const;
  // Empty string if valid, else the first violated invariant.
  std::string check_invariants() const;
  void recount();

  bool operator==(const WebsiteGroundTruth&) const = default;
};

struct ToolCatalogEntry {
  std::string name;
  std::vector<std::string> versions;
  double weight = 1.0;
};

// Distribution parameters for seed_ground_truth. Status brackets are ordered
// 1xx, 2xx, 3xx, 4xx, 5xx.
struct SeedConfig {
  int version = 1;
  double node_count_mean = 40.0;
  std::array<double, 5> status_bracket_probs{0.05, 0.55, 0.10, 0.20, 0.10};
  double tool_info_prob = 0.5;
  std::vector<ToolCatalogEntry> tools;
  double hidden_prob = 0.2;
  std::vector<double> hidden_wordlist_probs;  // over wordlist index 1..7
  double form_prob = 0.6;
  int max_forms = 3;
  int max_params = 5;
  double login_form_prob = 0.3;
  double vuln_count_mean = 0.5;
  int max_vulns_per_node = 3;
  std::array<double, 3> vuln_kind_probs{0.5, 0.3, 0.2};  // sqli, xss, weak credential
  std::vector<double> sqli_technique_probs;  // 6
  std::vector<double> sqli_min_level_probs;  // 5
  std::vector<double> sqli_min_risk_probs;   // 3
  double xss_stored_prob = 0.5;
  std::vector<double> xss_min_level_probs;  // 3
  std::vector<double> cred_user_probs;      // 4
  std::vector<double> cred_password_probs;  // 6
  std::optional<VulnKind> root_forced_vuln;
  bool ensure_vulnerability = true;

  static SeedConfig defaults();
  std::vector<std::string> validate() const;
};

nlohmann::json to_json(const SeedConfig& c);
// Missing keys keep their default values.
SeedConfig seed_config_from_json(const nlohmann::json& j);

int sample_node_count(Rng& rng, double mean = 40.0);
TreeGraph generate_tree(int n, Rng& rng);
WebsiteGroundTruth seed_ground_truth(const TreeGraph& tree, const SeedConfig& config, Rng& rng);
// Full pipeline from a single seed: node count, tree, content.
WebsiteGroundTruth generate_environment(const SeedConfig& config, std::uint64_t seed);

inline constexpr int kEnvironmentSchemaVersion = 1;

nlohmann::json to_json(const WebsiteGroundTruth& gt);
WebsiteGroundTruth ground_truth_from_json(const nlohmann::json& j);

}  // namespace pentrl::topology

#endif  // PENTRL_TOPOLOGY_HPP_
