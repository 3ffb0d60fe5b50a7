#ifndef PENTRL_REPORT_HPP_
#define PENTRL_REPORT_HPP_

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pentrl/evalkit.hpp"

namespace pentrl::report {

enum class Severity { kCritical = 0, kHigh = 1, kMedium = 2, kInfo = 3 };
const char* severity_name(Severity s);
Severity severity_for_value(double reward_value);

struct Finding {
  int episode = 0;
  int url_index = 0;
  int node_id = 0;
  sim::FindingKind kind = sim::FindingKind::kSqli;
  int vuln_index = 0;
  topology::VulnSpec vuln;
  double value = 0.0;
  Severity severity = Severity::kInfo;
  int discovered_at = 0;
  nlohmann::json configuration;  // the sub-action that succeeded
  nlohmann::json evidence;       // the triggering trace record
  std::optional<topology::ToolInfo> tool_info;
};

// One finding per distinct (node, vulnerability); the earliest (step, episode) wins.
std::vector<Finding> collect_findings(const std::vector<evalkit::EpisodeTrace>& traces);

// ---------------------------------------------------------------------------
// CVE enrichment

struct CveRecord {
  std::string id;
  std::string summary;
  double score = 0.0;
  bool operator==(const CveRecord&) const = default;
};

bool is_valid_cve_id(const std::string& id);
// Throws InvalidArgument on a malformed id or a score outside [0, 10].
void validate(const CveRecord& r);

struct CveQuery {
  std::string tool;
  std::string version;
  std::string kind;  // finding kind name: sqli, xss, weak_credential
};
std::string keyword_for(const CveQuery& q);

class CveSource {
 public:
  virtual ~CveSource() = default;
  // Throws on transport or format failure.
  virtual std::vector<CveRecord> lookup(const CveQuery& q) = 0;
};

// Entries match on tool (case-insensitive), version and kind; kind "*" matches any kind.
class OfflineCveCache : public CveSource {
 public:
  struct Entry {
    std::string tool;
    std::string version;
    std::string kind;
    std::vector<CveRecord> records;
  };
  OfflineCveCache() = default;
  explicit OfflineCveCache(std::vector<Entry> entries) : entries_(std::move(entries)) {}
  static OfflineCveCache from_json(const nlohmann::json& j);
  static OfflineCveCache load(const std::string& path);
  nlohmann::json to_json() const;
  std::vector<CveRecord> lookup(const CveQuery& q) override;
  const std::vector<Entry>& entries() const { return entries_; }

 private:
  std::vector<Entry> entries_;
};

struct RemoteCveOptions {
  std::string base_url = "https://services.nvd.nist.gov";
  int timeout_ms = 3000;
  int results_per_page = 20;
};

// NVD-style keyword search over HTTP(S).
class RemoteCveClient : public CveSource {
 public:
  explicit RemoteCveClient(RemoteCveOptions options) : options_(std::move(options)) {}
  std::vector<CveRecord> lookup(const CveQuery& q) override;
  // Parses a CVE API 2.0 response body; invalid records are skipped.
  static std::vector<CveRecord> parse_response(const std::string& body);

 private:
  RemoteCveOptions options_;
};

struct EnrichOptions {
  int parallelism = 4;
};

// Remote first when configured; any remote failure logs a warning and falls
// back to the cache. Never throws.
class CveEnricher {
 public:
  CveEnricher(std::shared_ptr<CveSource> cache, std::shared_ptr<CveSource> remote, EnrichOptions options = {});
  std::vector<CveRecord> enrich(const Finding& f) const;
  std::vector<std::vector<CveRecord>> enrich_all(const std::vector<Finding>& findings) const;

 private:
  std::shared_ptr<CveSource> cache_;
  std::shared_ptr<CveSource> remote_;
  EnrichOptions options_;
};

// ---------------------------------------------------------------------------
// Rendering

struct RunMetadata {
  std::string title = "Penetration test report";
  std::string target;
  int episodes = 0;
  int steps = 0;
  double total_reward = 0.0;
  nlohmann::json extra = nlohmann::json::object();
};

RunMetadata metadata_from_traces(const std::vector<evalkit::EpisodeTrace>& traces);

struct ReportDocument {
  std::string markdown;
  nlohmann::json json;
};

// `enrichments` is parallel to `findings` (missing entries mean no CVEs).
ReportDocument render_report(const std::vector<Finding>& findings,
                             const std::vector<std::vector<CveRecord>>& enrichments, const RunMetadata& meta);
void write_report(const std::string& out_dir, const ReportDocument& doc);

const char* remediation_for(sim::FindingKind kind);

}  // namespace pentrl::report

#endif  // PENTRL_REPORT_HPP_
