#include <algorithm>
#include <atomic>
#include <cctype>
#include <regex>
#include <thread>

#include "pentrl/report.hpp"

// After Eigen: <resolv.h> (pulled in by httplib) defines a macro named _res.
#ifdef PENTRL_HAVE_OPENSSL
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

namespace pentrl::report {

using nlohmann::json;

bool is_valid_cve_id(const std::string& id) {
  static const std::regex pattern(R"(CVE-\d{4}-\d{4,})");
  return std::regex_match(id, pattern);
}

void validate(const CveRecord& r) {
  if (!is_valid_cve_id(r.id)) throw InvalidArgument("malformed CVE identifier '" + r.id + "'");
  if (!(r.score >= 0.0 && r.score <= 10.0)) throw InvalidArgument("CVE score outside [0, 10] for " + r.id);
}

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

}  // namespace

std::string keyword_for(const CveQuery& q) {
  std::string kind = q.kind;
  if (kind == "sqli") kind = "sql injection";
  else if (kind == "xss") kind = "cross-site scripting";
  else if (kind == "weak_credential") kind = "authentication";
  std::string out = q.tool;
  if (!q.version.empty()) out += " " + q.version;
  if (!kind.empty()) out += " " + kind;
  return out;
}

OfflineCveCache OfflineCveCache::from_json(const json& j) {
  std::vector<Entry> entries;
  try {
    if (j.value("version", 1) != 1) throw ParseError("unsupported CVE cache version");
    for (const auto& e : j.at("entries")) {
      Entry entry{e.at("tool").get<std::string>(), e.at("version").get<std::string>(), e.value("kind", std::string("*")), {}};
      for (const auto& r : e.at("records")) {
        CveRecord rec{r.at("id").get<std::string>(), r.value("summary", std::string{}), r.at("score").get<double>()};
        validate(rec);
        entry.records.push_back(std::move(rec));
      }
      entries.push_back(std::move(entry));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("CVE cache: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("CVE cache: ") + e.what());
  }
  return OfflineCveCache(std::move(entries));
}

OfflineCveCache OfflineCveCache::load(const std::string& path) {
  try {
    return from_json(json::parse(read_text_file(path)));
  } catch (const json::parse_error& e) {
    throw ParseError("CVE cache '" + path + "': " + e.what());
  }
}

json OfflineCveCache::to_json() const {
  json entries = json::array();
  for (const auto& e : entries_) {
    json recs = json::array();
    for (const auto& r : e.records) recs.push_back({{"id", r.id}, {"summary", r.summary}, {"score", r.score}});
    entries.push_back({{"tool", e.tool}, {"version", e.version}, {"kind", e.kind}, {"records", recs}});
  }
  return {{"version", 1}, {"entries", entries}};
}

std::vector<CveRecord> OfflineCveCache::lookup(const CveQuery& q) {
  std::vector<CveRecord> out;
  const std::string tool = lower(q.tool);
  for (const auto& e : entries_)
    if (lower(e.tool) == tool && e.version == q.version && (e.kind == "*" || e.kind == q.kind))
      for (const auto& r : e.records)
        if (std::none_of(out.begin(), out.end(), [&](const CveRecord& x) { return x.id == r.id; })) out.push_back(r);
  return out;
}

std::vector<CveRecord> RemoteCveClient::parse_response(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("CVE service returned invalid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("vulnerabilities") || !j["vulnerabilities"].is_array())
    throw ParseError("CVE service response lacks a 'vulnerabilities' array");
  std::vector<CveRecord> out;
  for (const auto& v : j["vulnerabilities"]) {
    try {
      const auto& cve = v.at("cve");
      CveRecord r;
      r.id = cve.at("id").get<std::string>();
      for (const auto& d : cve.value("descriptions", json::array()))
        if (d.value("lang", std::string{}) == "en") {
          r.summary = d.value("value", std::string{});
          break;
        }
      const auto metrics = cve.value("metrics", json::object());
      for (const char* key : {"cvssMetricV31", "cvssMetricV30", "cvssMetricV2"}) {
        if (metrics.contains(key) && metrics[key].is_array() && !metrics[key].empty()) {
          r.score = metrics[key][0].at("cvssData").at("baseScore").get<double>();
          break;
        }
      }
      validate(r);
      out.push_back(std::move(r));
    } catch (const std::exception& e) {
      log::warn(std::string("skipping malformed CVE record: ") + e.what());
    }
  }
  return out;
}

std::vector<CveRecord> RemoteCveClient::lookup(const CveQuery& q) {
  std::string base = options_.base_url;
  std::string prefix;
  if (auto scheme = base.find("://"); scheme != std::string::npos) {
    if (auto slash = base.find('/', scheme + 3); slash != std::string::npos) {
      prefix = base.substr(slash);
      base = base.substr(0, slash);
    }
  }
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  httplib::Client client(base);
  if (!client.is_valid()) throw IoError("CVE client cannot use base URL '" + options_.base_url + "'");
  const auto sec = options_.timeout_ms / 1000;
  const auto usec = (options_.timeout_ms % 1000) * 1000;
  client.set_connection_timeout(sec, usec);
  client.set_read_timeout(sec, usec);
  client.set_write_timeout(sec, usec);
  httplib::Params params{{"keywordSearch", keyword_for(q)},
                         {"resultsPerPage", std::to_string(options_.results_per_page)}};
  auto res = client.Get(prefix + "/rest/json/cves/2.0", params, httplib::Headers{});
  if (!res) throw IoError("CVE request failed: " + httplib::to_string(res.error()));
  if (res->status != 200) throw IoError("CVE service answered HTTP " + std::to_string(res->status));
  return parse_response(res->body);
}

CveEnricher::CveEnricher(std::shared_ptr<CveSource> cache, std::shared_ptr<CveSource> remote, EnrichOptions options)
    : cache_(std::move(cache)), remote_(std::move(remote)), options_(options) {}

std::vector<CveRecord> CveEnricher::enrich(const Finding& f) const {
  if (!f.tool_info) return {};
  const CveQuery q{f.tool_info->name, f.tool_info->version, sim::finding_kind_name(f.kind)};
  if (remote_) {
    try {
      return remote_->lookup(q);
    } catch (const std::exception& e) {
      log::warn("CVE lookup for '" + keyword_for(q) + "' failed, using offline cache: " + e.what());
    }
  }
  if (cache_) {
    try {
      return cache_->lookup(q);
    } catch (const std::exception& e) {
      log::warn(std::string("offline CVE cache lookup failed: ") + e.what());
    }
  }
  return {};
}

std::vector<std::vector<CveRecord>> CveEnricher::enrich_all(const std::vector<Finding>& findings) const {
  std::vector<std::vector<CveRecord>> out(findings.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < findings.size();) out[i] = enrich(findings[i]);
  };
  const auto workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(options_.parallelism, 1)), 1,
                                               std::max<std::size_t>(findings.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  return out;
}

}  // namespace pentrl::report
