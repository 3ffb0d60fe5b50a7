#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <sstream>
#include <thread>

#include "oracles.hpp"
#include "pentrl/report.hpp"
#include "scripted.hpp"

// After Eigen (pulled in above): <resolv.h> defines a macro named _res.
#include <httplib.h>

using namespace pentrl;
using namespace pentrl::report;
using topology::VulnSpec;

namespace {

// Runs the scripted episodes through the environment and returns their traces.
std::vector<evalkit::EpisodeTrace> scripted_traces() {
  std::vector<evalkit::EpisodeTrace> out;
  int episode = 0;
  for (const auto& ep : scripted::hand_episodes()) {
    sim::Environment env(ep.site);
    std::ostringstream lines;
    for (auto a : ep.actions) {
      const int step = env.steps_taken();
      auto r = env.step(a);
      lines << sim::trace_record(r, episode, step, env.url_count()).dump() << '\n';
    }
    std::istringstream in(lines.str());
    out.push_back(evalkit::parse_trace(in, ep.name));
    ++episode;
  }
  return out;
}

nlohmann::json report_schema() {
  return nlohmann::json::parse(oracle::read_file(std::string(PENTRL_DATA_DIR) + "/../schemas/report.schema.json"));
}

Finding make(Severity s, int step, sim::FindingKind kind, double value) {
  Finding f;
  f.severity = s;
  f.discovered_at = step;
  f.kind = kind;
  f.value = value;
  f.node_id = 1 + step;
  f.configuration = {{"tool", "sqli"}};
  f.evidence = {{"episode", 0}, {"step", step}, {"action", 0}, {"V", value}, {"C", 1}, {"reward", 0}};
  f.vuln = kind == sim::FindingKind::kSqli ? VulnSpec::sqli(1, 1, 1) : VulnSpec::xss(topology::XssVariant::kStored, 1);
  return f;
}

// Minimal NVD-shaped endpoint under test control.
class StubServer {
 public:
  explicit StubServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Get("/rest/json/cves/2.0", handler);
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

const char* kNvdBody = R"({"vulnerabilities":[
  {"cve":{"id":"CVE-2021-41773","descriptions":[{"lang":"en","value":"Path traversal"}],
          "metrics":{"cvssMetricV31":[{"cvssData":{"baseScore":7.5}}]}}},
  {"cve":{"id":"not-a-cve","descriptions":[{"lang":"en","value":"bad"}]}}]})";

}  // namespace

TEST(Severity, ThresholdsFromTableValues) {
  EXPECT_EQ(severity_for_value(150), Severity::kCritical);
  EXPECT_EQ(severity_for_value(100), Severity::kCritical);
  EXPECT_EQ(severity_for_value(90), Severity::kHigh);
  EXPECT_EQ(severity_for_value(70), Severity::kHigh);
  EXPECT_EQ(severity_for_value(60), Severity::kMedium);
  EXPECT_EQ(severity_for_value(20), Severity::kMedium);
  EXPECT_EQ(severity_for_value(8), Severity::kInfo);
}

TEST(Collect, StackedSqliIsCritical) {
  auto traces = scripted_traces();
  auto f = collect_findings({traces[0]});
  ASSERT_EQ(f.size(), 1u);
  EXPECT_EQ(f[0].severity, Severity::kCritical);
  EXPECT_EQ(f[0].kind, sim::FindingKind::kSqli);
  EXPECT_EQ(f[0].discovered_at, 2);
  EXPECT_EQ(f[0].configuration["technique"], 5);
}

TEST(Collect, EmptyAndDeduplicated) {
  EXPECT_TRUE(collect_findings({}).empty());
  auto traces = scripted_traces();
  // Same episode twice under different episode numbers: one finding each, the earliest kept.
  auto second = traces[1];
  for (auto& s : second.steps) {
    s.episode = 7;
    s.step += 3;
  }
  auto f = collect_findings({second, traces[1]});
  ASSERT_EQ(f.size(), 2u);
  for (const auto& x : f) {
    EXPECT_EQ(x.episode, 1);
    EXPECT_LT(x.discovered_at, 7);
  }
}

TEST(Render, EmptyReport) {
  auto doc = render_report({}, {}, RunMetadata{});
  EXPECT_NE(doc.markdown.find("No vulnerabilities identified."), std::string::npos);
  EXPECT_EQ(doc.json["summary"]["finding_count"], 0);
  EXPECT_TRUE(oracle::schema_errors(report_schema(), doc.json).empty());
}

TEST(Render, SeverityCountsAndOrdering) {
  std::vector<Finding> f{make(Severity::kMedium, 1, sim::FindingKind::kSqli, 60),
                         make(Severity::kCritical, 9, sim::FindingKind::kSqli, 100),
                         make(Severity::kHigh, 4, sim::FindingKind::kXss, 90),
                         make(Severity::kCritical, 3, sim::FindingKind::kSqli, 100)};
  auto doc = render_report(f, {}, RunMetadata{});
  const auto& s = doc.json["summary"]["by_severity"];
  EXPECT_EQ(s["critical"], 2);
  EXPECT_EQ(s["high"], 1);
  EXPECT_EQ(s["medium"], 1);
  EXPECT_EQ(s["info"], 0);
  const auto& items = doc.json["findings"];
  ASSERT_EQ(items.size(), 4u);
  EXPECT_EQ(items[0]["discovered_at"], 3);
  EXPECT_EQ(items[1]["discovered_at"], 9);
  EXPECT_EQ(items[2]["severity"], "high");
  EXPECT_EQ(items[3]["severity"], "medium");
  EXPECT_EQ(items[0]["id"], "F-001");
  auto errors = oracle::schema_errors(report_schema(), doc.json);
  EXPECT_TRUE(errors.empty()) << errors.front();
  // Markdown carries the same finding set.
  for (const auto& it : items) EXPECT_NE(doc.markdown.find(it["id"].get<std::string>()), std::string::npos);
}

TEST(Render, DeterministicAndSchemaValid) {
  auto traces = scripted_traces();
  // Findings are keyed by node, so only traces of one site are combined.
  auto findings = collect_findings({traces[1]});
  ASSERT_EQ(findings.size(), 2u);
  auto cache = std::make_shared<OfflineCveCache>(OfflineCveCache::load(std::string(PENTRL_DATA_DIR) + "/cve_cache.json"));
  CveEnricher enricher(cache, nullptr);
  auto enrich = enricher.enrich_all(findings);
  auto meta = metadata_from_traces(traces);
  auto a = render_report(findings, enrich, meta);
  auto b = render_report(findings, enrich, meta);
  EXPECT_EQ(a.markdown, b.markdown);
  EXPECT_EQ(a.json.dump(), b.json.dump());
  auto errors = oracle::schema_errors(report_schema(), a.json);
  EXPECT_TRUE(errors.empty()) << errors.front();
  EXPECT_EQ(meta.episodes, 3);

  auto dir = oracle::temp_dir("report");
  write_report(dir, a);
  EXPECT_EQ(oracle::read_file(dir + "/report.md"), a.markdown);
  EXPECT_EQ(nlohmann::json::parse(oracle::read_file(dir + "/report.json")), a.json);
}

TEST(Schema, ValidatorRejectsBadDocuments) {
  auto doc = render_report({make(Severity::kHigh, 1, sim::FindingKind::kXss, 90)}, {}, RunMetadata{}).json;
  auto schema = report_schema();
  EXPECT_TRUE(oracle::schema_errors(schema, doc).empty());
  auto bad = doc;
  bad["findings"][0]["severity"] = "urgent";
  EXPECT_FALSE(oracle::schema_errors(schema, bad).empty());
  bad = doc;
  bad["unexpected"] = 1;
  EXPECT_FALSE(oracle::schema_errors(schema, bad).empty());
  bad = doc;
  bad["summary"].erase("statement");
  EXPECT_FALSE(oracle::schema_errors(schema, bad).empty());
}

TEST(Cve, IdentifierPatternAndScore) {
  EXPECT_TRUE(is_valid_cve_id("CVE-2021-41773"));
  EXPECT_TRUE(is_valid_cve_id("CVE-2014-123456"));
  EXPECT_FALSE(is_valid_cve_id("CVE-21-4177"));
  EXPECT_FALSE(is_valid_cve_id("cve-2021-41773"));
  EXPECT_THROW(validate({"CVE-2021-0001", "x", 11.0}), InvalidArgument);
  EXPECT_NO_THROW(validate({"CVE-2021-0001", "x", 10.0}));
}

TEST(Cve, CacheHitAndMiss) {
  OfflineCveCache cache({{"app-x", "1.0", "sqli", {{"CVE-2020-1234", "app-x injection", 8.1}}}});
  auto hit = cache.lookup({"App-X", "1.0", "sqli"});
  ASSERT_EQ(hit.size(), 1u);
  EXPECT_EQ(hit[0].id, "CVE-2020-1234");
  EXPECT_TRUE(cache.lookup({"app-x", "2.0", "sqli"}).empty());
  EXPECT_TRUE(cache.lookup({"app-y", "1.0", "sqli"}).empty());
  EXPECT_TRUE(cache.lookup({"app-x", "1.0", "xss"}).empty());
  auto round = OfflineCveCache::from_json(cache.to_json());
  EXPECT_EQ(round.lookup({"app-x", "1.0", "sqli"}), hit);
}

TEST(Cve, ParsesServiceResponseSkippingInvalidRecords) {
  auto records = RemoteCveClient::parse_response(kNvdBody);
  ASSERT_EQ(records.size(), 1u);
  EXPECT_EQ(records[0].id, "CVE-2021-41773");
  EXPECT_EQ(records[0].score, 7.5);
  EXPECT_THROW(RemoteCveClient::parse_response("<html>"), ParseError);
  EXPECT_THROW(RemoteCveClient::parse_response("{}"), ParseError);
}

TEST(Cve, StubServerAnswers) {
  std::string seen;
  StubServer stub([&](const httplib::Request& req, httplib::Response& res) {
    seen = req.get_param_value("keywordSearch");
    res.set_content(kNvdBody, "application/json");
  });
  RemoteCveClient client({stub.url(), 2000, 20});
  auto records = client.lookup({"apache", "2.4.49", "sqli"});
  ASSERT_EQ(records.size(), 1u);
  EXPECT_EQ(seen, keyword_for({"apache", "2.4.49", "sqli"}));
}

TEST(Cve, RemoteTimeoutDegradesToEmpty) {
  StubServer stub([](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(1500));
    res.set_content(kNvdBody, "application/json");
  });
  std::vector<std::string> warnings;
  auto previous = log::set_sink([&](log::Level l, std::string_view m) {
    if (l == log::Level::kWarn) warnings.emplace_back(m);
  });
  auto remote = std::make_shared<RemoteCveClient>(RemoteCveOptions{stub.url(), 200, 20});
  EXPECT_THROW(remote->lookup({"apache", "2.4.49", "sqli"}), Error);
  CveEnricher enricher(std::make_shared<OfflineCveCache>(), remote);
  Finding f = make(Severity::kCritical, 0, sim::FindingKind::kSqli, 100);
  f.tool_info = topology::ToolInfo{"apache", "2.4.49"};
  const auto start = std::chrono::steady_clock::now();
  auto cves = enricher.enrich(f);
  const auto elapsed = std::chrono::steady_clock::now() - start;
  log::set_sink(previous);
  EXPECT_TRUE(cves.empty());
  EXPECT_FALSE(warnings.empty());
  EXPECT_LT(elapsed, std::chrono::milliseconds(1400));
  auto doc = render_report({f}, {cves}, RunMetadata{});
  EXPECT_TRUE(oracle::schema_errors(report_schema(), doc.json).empty());
}

TEST(Cve, MalformedRemoteFallsBackToCache) {
  StubServer stub([](const httplib::Request&, httplib::Response& res) { res.set_content("{oops", "application/json"); });
  auto cache = std::make_shared<OfflineCveCache>(
      OfflineCveCache({{"apache", "2.4.49", "*", {{"CVE-2021-41773", "Path traversal", 7.5}}}}));
  CveEnricher enricher(cache, std::make_shared<RemoteCveClient>(RemoteCveOptions{stub.url(), 1000, 20}));
  Finding f = make(Severity::kCritical, 0, sim::FindingKind::kSqli, 100);
  f.tool_info = topology::ToolInfo{"apache", "2.4.49"};
  auto previous = log::set_sink([](log::Level, std::string_view) {});
  auto cves = enricher.enrich(f);
  log::set_sink(previous);
  ASSERT_EQ(cves.size(), 1u);
  // A finding without a banner has nothing to look up.
  f.tool_info.reset();
  EXPECT_TRUE(enricher.enrich(f).empty());
}
