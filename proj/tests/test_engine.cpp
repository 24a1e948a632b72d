#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "clpde/bundled.hpp"
#include "clpde/engine.hpp"
#include "clpde/error.hpp"
#include "clpde/fixtures.hpp"

using namespace clpde;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("clpde-engine-" + std::to_string(::getpid()) + "-" +
                                        std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int n = 0;
    return n;
  }
};

std::unique_ptr<Engine> seeded(ServiceConfig config = {}) {
  auto e = std::make_unique<Engine>(std::move(config), fixtures::stepping_clock());
  e->load_concepts(e->resources().concepts);
  std::istringstream corpus{std::string(bundled::corpus_jsonl())};
  e->ingest(corpus);
  return e;
}

NodeId expression_containing(const Engine& e, const std::string& needle) {
  for (const auto& [id, node] : e.snapshot()->graph.expressions()) {
    if (node.surface_text.find(needle) != std::string::npos) return id;
  }
  FAIL("no expression containing " << needle);
  return {};
}

EdgeId concept_edge(Engine& e, const std::string& needle) {
  ProposeRequest req;
  req.mode = "concept";
  req.node = expression_containing(e, needle);
  req.tau = 0.0;
  const Json resp = e.propose(req);
  REQUIRE(!resp["edges"].empty());
  return resp["edges"][0]["id"].get<std::string>();
}

ValidationDecision vote(const EdgeId& id, Role role, Verdict v = Verdict::accept) {
  ValidationDecision d;
  d.edge_id = id;
  d.validator_id = "v-" + std::string(to_string(role));
  d.role = role;
  d.verdict = v;
  return d;
}

}  // namespace

TEST_CASE("engine ingests the bundled corpus and logs events") {
  auto e = seeded();
  const auto s = e->snapshot();
  CHECK(s->graph.expressions().size() >= 10);
  CHECK(s->graph.concepts().size() == e->resources().concepts.size());
  CHECK(e->log_lines().size() == s->sequence);
  CHECK(s->graph.integrity_violations().empty());
}

TEST_CASE("idempotency keys return the first response without re-executing") {
  auto e = seeded();
  const auto edge = concept_edge(*e, "ghabraahat");
  const auto before = e->log_lines().size();
  const Json first = e->decide(vote(edge, Role::linguistic), std::string("k-1"));
  const auto after = e->log_lines().size();
  CHECK(after == before + 1);
  const Json again = e->decide(vote(edge, Role::linguistic), std::string("k-1"));
  CHECK(again == first);
  CHECK(e->log_lines().size() == after);
  // The key survives replay.
  Engine copy(ServiceConfig{}, fixtures::stepping_clock());
  copy.replay(e->log_text());
  CHECK(copy.decide(vote(edge, Role::linguistic), std::string("k-1")) == first);
  CHECK(copy.log_lines().size() == after);
}

TEST_CASE("a failed mutation leaves state and log untouched") {
  auto e = seeded();
  const auto log = e->log_text();
  const auto snap = e->snapshot();
  CHECK_THROWS_AS(e->decide(vote("edge-99999999", Role::clinical)), NotFoundError);
  ProposeRequest bad;
  bad.mode = "cross";
  bad.lang_a = "hi";
  bad.lang_b = "hi";
  CHECK_THROWS_AS(e->propose(bad), ValidationError);
  CHECK(e->log_text() == log);
  CHECK(e->snapshot() == snap);
}

TEST_CASE("unanimous review accepts and efficiency counts decisions") {
  auto e = seeded();
  const auto edge = concept_edge(*e, "ghabraahat");
  for (auto role : {Role::linguistic, Role::clinical, Role::cultural}) e->decide(vote(edge, role));
  CHECK(e->snapshot()->graph.edge(edge).status == EdgeStatus::Accepted);
  const auto r = e->efficiency();
  CHECK(r.decisions_used == 3);
  CHECK(r.accepted_edges == 1);
  CHECK(r.decisions_per_accepted_edge == 3.0);
  const auto from_log = hitl_efficiency(e->log_text(), ServiceConfig{});
  CHECK(from_log == r);
  const auto empty = hitl_efficiency("", ServiceConfig{});
  CHECK(empty.decisions_used == 0);
  CHECK(empty.accepted_edges == 0);
  CHECK(empty.decisions_per_accepted_edge == 0.0);
}

TEST_CASE("replaying the demo log reproduces state byte for byte") {
  auto demo = fixtures::demo_engine();
  Engine copy(ServiceConfig{}, fixtures::stepping_clock());
  copy.replay(demo->log_text());
  CHECK(copy.export_graph() == demo->export_graph());
  CHECK(copy.log_text() == demo->log_text());
  CHECK(copy.snapshot()->workflow.config().tau == demo->snapshot()->workflow.config().tau);
  // Export then import yields the same document.
  Engine imported(ServiceConfig{}, fixtures::stepping_clock());
  imported.import_graph(demo->export_graph());
  CHECK(imported.export_graph() == demo->export_graph());
}

TEST_CASE("replay refuses a non-empty engine and reports the corrupt event") {
  auto demo = fixtures::demo_engine();
  auto lines = demo->log_lines();
  REQUIRE(lines.size() > 5);
  CHECK_THROWS(demo->replay(demo->log_text()));

  std::string corrupt;
  for (std::size_t i = 0; i < lines.size(); ++i) corrupt += (i == 3 ? std::string("{oops") : lines[i]) + "\n";
  Engine fresh(ServiceConfig{}, fixtures::stepping_clock());
  try {
    fresh.replay(corrupt);
    FAIL("corrupt log accepted");
  } catch (const ParseError& err) {
    CHECK(std::string(err.what()).find("line 4") != std::string::npos);
  }

  std::string gap;
  for (std::size_t i = 0; i < lines.size(); ++i)
    if (i != 2) gap += lines[i] + "\n";
  Engine other(ServiceConfig{}, fixtures::stepping_clock());
  CHECK_THROWS_AS(other.replay(gap), ParseError);
}

TEST_CASE("state persists to the event log and restarts from it") {
  TempDir dir;
  ServiceConfig c;
  c.state_path = dir.path / "events.jsonl";
  std::string exported;
  {
    auto e = seeded(c);
    const auto edge = concept_edge(*e, "ghabraahat");
    e->decide(vote(edge, Role::clinical));
    exported = e->export_graph();
    std::ifstream in(*c.state_path);
    std::stringstream ss;
    ss << in.rdbuf();
    CHECK(ss.str() == e->log_text());
  }
  Engine restarted(c, fixtures::stepping_clock());
  CHECK(restarted.export_graph() == exported);
  CHECK(restarted.efficiency().decisions_used == 1);
}

TEST_CASE("unwritable state path surfaces an io error") {
  ServiceConfig c;
  c.state_path = "/nonexistent-dir/sub/events.jsonl";
  Engine e(c, fixtures::stepping_clock());
  CHECK_THROWS_AS(e.load_concepts(e.resources().concepts), IoError);
  CHECK(e.log_lines().empty());
}

TEST_CASE("explain and report") {
  auto e = seeded();
  const auto edge = concept_edge(*e, "ghabraahat");
  const Json preview = e->explanation(edge);
  CHECK(preview.contains("bundle"));
  const auto html = e->report(edge, ReportFormat::html);
  CHECK(html.find("<html") != std::string::npos);
  CHECK(e->snapshot()->graph.edge(edge).explanation.has_value());
  CHECK(e->report(edge, ReportFormat::html) == html);
  const Json b = e->explain(edge);
  CHECK(b["version"].get<int>() == 2);
  CHECK_THROWS_AS(e->explain("edge-77777777"), NotFoundError);
}

TEST_CASE("metrics report includes coherence and efficiency") {
  auto demo = fixtures::demo_engine();
  const Json m = demo->metrics_report();
  CHECK(m.contains("concept_coverage"));
  CHECK(m.contains("semantic_coherence"));
  CHECK(m["hitl_efficiency"]["decisions_used"].get<int>() > 0);
  Engine empty(ServiceConfig{}, fixtures::stepping_clock());
  const Json z = empty.metrics_report();
  CHECK(z["semantic_coherence"].is_null());
  CHECK(z["concept_coverage"].get<double>() == 0.0);
}

TEST_CASE("config parsing names the offending field") {
  auto message = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(message(R"({"workflow": {"alpha": 2}})").find("alpha") != std::string::npos);
  CHECK(message(R"({"alignment": {"tau_align": "x"}})").find("tau_align") != std::string::npos);
  CHECK(message(R"({"port": 70000})").find("port") != std::string::npos);
  CHECK(message(R"({"colour": 1})").find("colour") != std::string::npos);
  CHECK(message(R"({"alignment": {"provider": "bert"}})").find("provider") != std::string::npos);
  CHECK_THROWS(parse_config("{nope"));
  const auto c = parse_config(std::string(bundled::config_json()), "/srv");
  CHECK(c.alignment.tau_align == 0.85);
  CHECK(c.state_path == fs::path("/srv/clpde-events.jsonl"));
  CHECK(parse_config(config_to_json(c).dump()).workflow.tau == c.workflow.tau);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), IoError);
}
