#include "pentrl/report.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>
#include <tuple>

namespace pentrl::report {

using nlohmann::json;

const char* severity_name(Severity s) {
  switch (s) {
    case Severity::kCritical: return "critical";
    case Severity::kHigh: return "high";
    case Severity::kMedium: return "medium";
    case Severity::kInfo: return "info";
  }
  return "info";
}

Severity severity_for_value(double v) {
  if (v >= 100.0) return Severity::kCritical;
  if (v >= 70.0) return Severity::kHigh;
  if (v >= 20.0) return Severity::kMedium;
  return Severity::kInfo;
}

std::vector<Finding> collect_findings(const std::vector<evalkit::EpisodeTrace>& traces) {
  std::map<std::pair<int, int>, Finding> best;
  for (const auto& t : traces)
    for (const auto& st : t.steps)
      for (const auto& f : st.findings) {
        if (!f.is_vulnerability() || !f.vuln) continue;
        Finding out;
        out.episode = st.episode;
        out.url_index = f.url_index;
        out.node_id = f.node_id;
        out.kind = f.kind;
        out.vuln_index = f.vuln_index;
        out.vuln = *f.vuln;
        out.value = f.value;
        out.severity = severity_for_value(f.value);
        out.discovered_at = st.step;
        out.configuration = st.decoded;
        out.evidence = {{"episode", st.episode}, {"step", st.step},     {"action", st.action},
                        {"url_index", st.url_index}, {"decoded", st.decoded}, {"V", st.value},
                        {"C", st.cost},         {"reward", st.reward}};
        out.tool_info = f.tool_info;
        const auto key = std::make_pair(f.node_id, f.vuln_index);
        auto it = best.find(key);
        if (it == best.end() || std::tie(out.discovered_at, out.episode) < std::tie(it->second.discovered_at, it->second.episode))
          best[key] = std::move(out);
      }
  std::vector<Finding> result;
  for (auto& [_, f] : best) result.push_back(std::move(f));
  return result;
}

const char* remediation_for(sim::FindingKind kind) {
  switch (kind) {
    case sim::FindingKind::kSqli:
      return "Use parameterized queries or prepared statements for every database call, validate input against an "
             "allow-list, and run the application with a least-privilege database account.";
    case sim::FindingKind::kXss:
      return "Apply context-aware output encoding, validate and sanitize user-supplied markup, and deploy a restrictive "
             "Content-Security-Policy.";
    case sim::FindingKind::kWeakCredential:
      return "Enforce a strong password policy, remove default accounts, add rate limiting or lockout on the login "
             "form, and enable multi-factor authentication.";
    default:
      return "Review the exposed functionality and restrict it to authorized users.";
  }
}

RunMetadata metadata_from_traces(const std::vector<evalkit::EpisodeTrace>& traces) {
  RunMetadata m;
  m.episodes = static_cast<int>(traces.size());
  for (const auto& t : traces)
    for (const auto& s : t.steps) {
      ++m.steps;
      m.total_reward += s.reward;
    }
  return m;
}

namespace {

std::string vuln_title(const Finding& f) {
  switch (f.kind) {
    case sim::FindingKind::kSqli:
      return std::string("SQL injection (") + topology::sqli_technique_name(f.vuln.technique) + ")";
    case sim::FindingKind::kXss:
      return std::string("Cross-site scripting (") + topology::xss_variant_name(f.vuln.variant) + ")";
    case sim::FindingKind::kWeakCredential: return "Weak credentials (login brute force)";
    default: return sim::finding_kind_name(f.kind);
  }
}

json vuln_json(const Finding& f) {
  json j{{"kind", sim::finding_kind_name(f.kind)}};
  switch (f.kind) {
    case sim::FindingKind::kSqli:
      j["technique"] = topology::sqli_technique_name(f.vuln.technique);
      j["min_level"] = f.vuln.min_level;
      j["min_risk"] = f.vuln.min_risk;
      break;
    case sim::FindingKind::kXss:
      j["variant"] = topology::xss_variant_name(f.vuln.variant);
      j["min_level"] = f.vuln.min_level;
      break;
    default:
      j["user_index"] = f.vuln.user_index;
      j["password_index"] = f.vuln.password_index;
      break;
  }
  return j;
}

std::string fmt(double v) { return json(v).dump(); }

}  // namespace

ReportDocument render_report(const std::vector<Finding>& input, const std::vector<std::vector<CveRecord>>& enrichments,
                             const RunMetadata& meta) {
  std::vector<std::size_t> order(input.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = input[a];
    const auto& y = input[b];
    return std::tie(x.severity, x.discovered_at, x.episode, x.node_id, x.vuln_index) <
           std::tie(y.severity, y.discovered_at, y.episode, y.node_id, y.vuln_index);
  });

  std::array<int, 4> counts{};
  for (const auto& f : input) ++counts[static_cast<int>(f.severity)];
  const bool empty = input.empty();
  std::string statement;
  if (empty) {
    statement = "No vulnerabilities identified.";
  } else {
    statement = std::to_string(input.size()) + (input.size() == 1 ? " vulnerability" : " vulnerabilities") +
                " identified: " + std::to_string(counts[0]) + " critical, " + std::to_string(counts[1]) + " high, " +
                std::to_string(counts[2]) + " medium, " + std::to_string(counts[3]) + " info.";
  }

  json by_sev = json::object();
  for (int s = 0; s < 4; ++s) by_sev[severity_name(static_cast<Severity>(s))] = counts[static_cast<std::size_t>(s)];

  json findings = json::array();
  std::ostringstream md;
  md << "# " << meta.title << "\n\n";
  if (!meta.target.empty()) md << "Target: " << meta.target << "\n\n";
  md << "## Executive summary\n\n" << statement << "\n\n";
  md << "| Severity | Count |\n|---|---|\n";
  for (int s = 0; s < 4; ++s) md << "| " << severity_name(static_cast<Severity>(s)) << " | " << counts[static_cast<std::size_t>(s)] << " |\n";
  md << "\nEpisodes: " << meta.episodes << "  \nSteps: " << meta.steps << "  \nTotal reward: " << fmt(meta.total_reward)
     << "\n\n## Technical findings\n\n";
  if (empty) md << "No vulnerabilities identified.\n";

  int n = 0;
  for (std::size_t idx : order) {
    const auto& f = input[idx];
    char id[16];
    std::snprintf(id, sizeof id, "F-%03d", ++n);
    const std::vector<CveRecord> none;
    const auto& cves = idx < enrichments.size() ? enrichments[idx] : none;
    json cj = json::array();
    for (const auto& c : cves) cj.push_back({{"id", c.id}, {"summary", c.summary}, {"score", c.score}});
    json tool = f.tool_info ? json{{"name", f.tool_info->name}, {"version", f.tool_info->version}} : json(nullptr);
    findings.push_back({{"id", id},
                        {"title", vuln_title(f)},
                        {"severity", severity_name(f.severity)},
                        {"value", f.value},
                        {"url_index", f.url_index},
                        {"node_id", f.node_id},
                        {"episode", f.episode},
                        {"discovered_at", f.discovered_at},
                        {"vulnerability", vuln_json(f)},
                        {"configuration", f.configuration},
                        {"evidence", f.evidence},
                        {"tool_info", tool},
                        {"cves", cj},
                        {"remediation", remediation_for(f.kind)}});

    md << "### " << id << ": " << vuln_title(f) << "\n\n";
    md << "- Severity: " << severity_name(f.severity) << " (value " << fmt(f.value) << ")\n";
    md << "- URL: #" << f.url_index << " (node " << f.node_id << ")\n";
    md << "- Discovered at: episode " << f.episode << ", step " << f.discovered_at << "\n";
    md << "- Configuration: `" << f.configuration.dump() << "`\n";
    if (f.tool_info) md << "- Software: " << f.tool_info->name << " " << f.tool_info->version << "\n";
    md << "- Evidence: `" << f.evidence.dump() << "`\n";
    if (cves.empty()) {
      md << "- Related CVEs: none found\n";
    } else {
      md << "- Related CVEs:\n";
      for (const auto& c : cves) md << "  - " << c.id << " (score " << fmt(c.score) << "): " << c.summary << "\n";
    }
    md << "\nRemediation: " << remediation_for(f.kind) << "\n\n";
  }

  json meta_json{{"title", meta.title},
                 {"target", meta.target},
                 {"episodes", meta.episodes},
                 {"steps", meta.steps},
                 {"total_reward", meta.total_reward},
                 {"extra", meta.extra}};
  ReportDocument doc;
  doc.json = {{"schema", "pentrl-report"},
              {"version", 1},
              {"metadata", meta_json},
              {"summary",
               {{"statement", statement},
                {"finding_count", input.size()},
                {"by_severity", by_sev},
                {"total_reward", meta.total_reward},
                {"steps", meta.steps},
                {"episodes", meta.episodes}}},
              {"findings", findings}};
  doc.markdown = md.str();
  return doc;
}

void write_report(const std::string& out_dir, const ReportDocument& doc) {
  write_text_file(out_dir + "/report.md", doc.markdown);
  write_text_file(out_dir + "/report.json", doc.json.dump(2) + "\n");
}

}  // namespace pentrl::report
