#include <catch_amalgamated.hpp>

#include <random>

#include "clpde/bundled.hpp"
#include "clpde/engine.hpp"
#include "clpde/error.hpp"
#include "clpde/explain.hpp"
#include "support.hpp"

using namespace clpde;
using testsupport::ann;
using testsupport::prov;

namespace {

const std::string kCaveat =
    "This link is an aid for interpretation and does not establish a diagnosis by itself.";

struct Scene {
  OntologyGraph g;
  EmbeddingStore store;
  HashedTokenProvider provider;
  std::vector<ExplanationRule> rules = parse_rules(bundled::rules_json());

  Scene() {
    for (const auto& c : parse_concepts(bundled::concepts_json())) {
      g.add_concept(c.code, c.framework, c.label, c.description);
    }
  }

  NodeId expr(const std::string& text, std::optional<AnnotationRecord> a = ann(),
              NodeStatus status = NodeStatus::active) {
    const auto id = g.add_expression(text, "hi", a, prov("src-" + text), status);
    store.register_embedding(g, id, provider.embed(text), provider.id());
    return id;
  }

  NodeId concept_id(const std::string& code) { return *g.find_concept_by_code(code); }

  ExplanationBundle bundle(const EdgeId& id) {
    ExplainContext ctx{g, store, provider, rules};
    return generate_bundle(ctx, id);
  }

  void attach(const EdgeId& id) {
    const auto b = bundle(id);
    g.update_edge(id, [&](Edge& e) { e.explanation = b; });
  }

  EdgeId accepted(const NodeId& src, const NodeId& dst, EdgeType t = EdgeType::ExpressionConcept) {
    const auto id = g.add_edge(src, dst, t, 0.8, "r", prov()).id;
    g.transition(id, EdgeStatus::UnderValidation);
    g.transition(id, EdgeStatus::Accepted);
    return id;
  }
};

std::vector<std::string> tokens_of(const std::vector<TokenScore>& ts) {
  std::vector<std::string> out;
  for (const auto& t : ts) out.push_back(t.token);
  return out;
}

}  // namespace

TEST_CASE("rule parsing rejects bad rules") {
  CHECK(parse_rules(bundled::rules_json()).size() >= 5);
  CHECK_THROWS_AS(parse_rules(R"([{"rule_id":"","pattern":"x","template":"t","perspective":"clinical"}])"),
                  ValidationError);
  CHECK_THROWS_AS(parse_rules(R"([{"rule_id":"a","pattern":"","template":"t","perspective":"clinical"}])"),
                  ValidationError);
  CHECK_THROWS_AS(
      parse_rules(R"([{"rule_id":"a","pattern":"x","template":"{nope}","perspective":"clinical"}])"),
      ValidationError);
  CHECK_THROWS_AS(parse_rules(R"([{"rule_id":"a","pattern":"x","template":"t","perspective":"clinical"},
                                  {"rule_id":"a","pattern":"y","template":"t","perspective":"clinical"}])"),
                  ValidationError);
  CHECK_THROWS_AS(parse_rules("{}"), ParseError);
  CHECK(placeholders_in("a {match} b {language}") == std::vector<std::string>{"match", "language"});
  CHECK(fill_template("'{match}' in {language}", {{"match", "dil"}, {"language", "hi"}}) == "'dil' in hi");
}

TEST_CASE("anxiety mapping carries the non-diagnostic caveat") {
  Scene s;
  const auto src = s.expr("mujhe ghabraahat mehsoos ho rhi hai");
  const auto id = s.accepted(src, s.concept_id("6B00"));
  const auto b = s.bundle(id);
  CHECK(b.clinical.find(kCaveat) != std::string::npos);
  CHECK(std::find(b.matched_rules.begin(), b.matched_rules.end(), "felt-sense") != b.matched_rules.end());
  CHECK(!b.incomplete);
  CHECK(!b.contrastive);
}

TEST_CASE("Fig-4 expression yields three non-empty perspectives") {
  Scene s;
  auto a = ann(SemanticCategory::emotion);
  a.cultural_markers = {CulturalMarker::idiomatic};
  a.severity = Severity::mild;
  const auto src = s.expr("sab kuch samne hai, par khushi mehsoos nahi hoti", a);
  const auto id = s.accepted(src, s.concept_id("6A70"));
  const auto b = s.bundle(id);
  CHECK(!b.linguistic.empty());
  CHECK(!b.cultural.empty());
  CHECK(!b.clinical.empty());
  CHECK(b.cultural.find("idiomatic") != std::string::npos);
  CHECK(b.clinical.find("reduced pleasure") != std::string::npos);
}

TEST_CASE("missing annotation yields an incomplete but populated bundle") {
  Scene s;
  const auto src = s.expr("aankhon ke aage andhera", std::nullopt, NodeStatus::provisional);
  const auto dst = s.expr("chakkar aa raha hai");
  const auto id = s.g.add_edge(src, dst, EdgeType::IntraLingual, 0.6, "r", prov()).id;
  const auto b = s.bundle(id);
  CHECK(b.incomplete);
  CHECK(!b.linguistic.empty());
  CHECK(!b.cultural.empty());
  CHECK(!b.clinical.empty());
}

TEST_CASE("token contributions follow leave-one-token-out") {
  HashedTokenProvider p;
  // A shared token dominates the unshared ones.
  const auto shared = token_contributions("udaasi qwv zkp", "udaasi", p);
  REQUIRE(shared.size() == 3);
  CHECK(shared[0].score > shared[1].score);
  CHECK(shared[0].score > shared[2].score);
  // Identical counterpart: removing any token lowers similarity.
  for (const auto& t : token_contributions("dil bahut bhaari hai", "dil bahut bhaari hai", p)) {
    CHECK(t.score > 0.0);
  }
  // Single token: score is the full similarity.
  const auto one = token_contributions("thakan", "thakan", p);
  REQUIRE(one.size() == 1);
  CHECK(one[0].score == Catch::Approx(1.0).margin(1e-12));
  // Repeated tokens are scored per occurrence.
  CHECK(tokens_of(token_contributions("dil dil", "dil", p)) == std::vector<std::string>{"dil", "dil"});
}

TEST_CASE("token contributions match the oracle on random texts") {
  HashedTokenProvider p;
  std::mt19937_64 rng(21);
  for (int t = 0; t < 50; ++t) {
    std::vector<std::string> words, other;
    for (int i = 0, n = 1 + static_cast<int>(rng() % 6); i < n; ++i) words.push_back(testsupport::random_word(rng));
    for (int i = 0, n = 1 + static_cast<int>(rng() % 6); i < n; ++i) other.push_back(testsupport::random_word(rng));
    const auto got = token_contributions(text::join(words, " "), text::join(other, " "), p);
    const auto want = testsupport::loo_oracle(p, words, other);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i].score == Catch::Approx(want[i]).margin(1e-9));
  }
}

TEST_CASE("nearest validated examples") {
  Scene s;
  const auto a = s.expr("dil ghabra raha hai");
  const auto query = s.g.add_edge(a, s.concept_id("6B00"), EdgeType::ExpressionConcept, 0.6, "r", prov()).id;
  CHECK(nearest_validated_examples(s.g, s.store, s.provider.id(), query, 3).empty());
  // A second node with the same tokens in another order embeds identically.
  const auto twin = s.expr("ghabra dil raha hai");
  const auto acc = s.accepted(twin, s.concept_id("6B00"));
  const auto ex = nearest_validated_examples(s.g, s.store, s.provider.id(), query, 5);
  REQUIRE(ex.size() == 1);
  CHECK(ex[0].edge_id == acc);
  CHECK(ex[0].similarity == Catch::Approx(1.0).margin(1e-12));
  s.accepted(s.expr("neend nahi aati"), s.concept_id("6A70"));
  CHECK(nearest_validated_examples(s.g, s.store, s.provider.id(), query, 10).size() == 2);
  CHECK(nearest_validated_examples(s.g, s.store, s.provider.id(), query, 1).size() == 1);
}

TEST_CASE("contrastive records") {
  Scene s;
  const auto a = s.expr("man ka bhoj");
  const auto b = s.expr("dil bhaari");
  const auto c1 = s.concept_id("6A70"), c2 = s.concept_id("CCD-THINKING-TOO-MUCH");
  const CandidateEdge hi{a, c1, EdgeType::ExpressionConcept, 0.9, "r", "p"};
  const CandidateEdge lo{a, c2, EdgeType::ExpressionConcept, 0.6, "r", "p"};
  const auto r = contrastive(s.g, hi, lo);
  CHECK(r.score_delta == Catch::Approx(0.3).margin(1e-12));
  CHECK(r.chosen_dst == c1);
  CHECK(r.runner_up_dst == c2);
  const CandidateEdge tie{a, c2, EdgeType::ExpressionConcept, 0.9, "r", "p"};
  const auto t = contrastive(s.g, hi, tie);
  CHECK(t.score_delta == 0.0);
  CHECK(t.text.find("tie") != std::string::npos);
  const CandidateEdge elsewhere{b, c2, EdgeType::ExpressionConcept, 0.5, "r", "p"};
  CHECK_THROWS_AS(contrastive(s.g, hi, elsewhere), ValidationError);
  CHECK_THROWS_AS(contrastive(s.g, lo, hi), ValidationError);
}

TEST_CASE("bundles carry a contrastive record when a runner-up exists") {
  Scene s;
  const auto a = s.expr("man ka bhoj");
  const auto id = s.accepted(a, s.concept_id("6A70"));
  s.g.update_edge(id, [&](Edge& e) { e.runner_up = Alternative{s.concept_id("6B00"), 0.4, "weaker cue"}; });
  const auto b = s.bundle(id);
  REQUIRE(b.contrastive);
  CHECK(b.contrastive->score_delta >= 0.0);
  CHECK(b.contrastive->chosen_dst == s.concept_id("6A70"));
}

TEST_CASE("reports are byte-stable and list parallel alternatives") {
  Scene s;
  const auto a = s.expr("man ka bhoj");
  const auto e1 = s.g.add_edge(a, s.concept_id("6A70"), EdgeType::ExpressionConcept, 0.6, "r", prov()).id;
  const auto e2 = s.g.add_edge(a, s.concept_id("CCD-THINKING-TOO-MUCH"), EdgeType::ExpressionConcept, 0.6,
                               "r", prov()).id;
  for (const auto& id : {e1, e2}) {
    s.g.transition(id, EdgeStatus::UnderValidation);
    s.g.transition(id, EdgeStatus::Adjudication);
  }
  s.g.retain_parallel({e1, e2}, {"depressive reading", "idiom of rumination"});
  CHECK_THROWS_AS(render_report(s.g, e1, {}, ReportFormat::text), StateError);
  s.attach(e1);
  const auto text1 = render_report(s.g, e1, {}, ReportFormat::text);
  CHECK(text1 == render_report(s.g, e1, {}, ReportFormat::text));
  for (const char* section : {"Expression", "Mapping", "Perspectives", "Confidence", "Provenance", "Alternatives"}) {
    CHECK(text1.find(section) != std::string::npos);
  }
  CHECK(text1.find("ParallelRetained") != std::string::npos);
  CHECK(text1.find("depressive reading") != std::string::npos);
  CHECK(text1.find("idiom of rumination") != std::string::npos);
  const auto html = render_report(s.g, e1, {}, ReportFormat::html);
  CHECK(html.find("<html") != std::string::npos);
  CHECK(html == render_report(s.g, e1, {}, ReportFormat::html));
}

TEST_CASE("accepted report shows status and validator agreement") {
  Scene s;
  const auto id = s.accepted(s.expr("neend nahi aati"), s.concept_id("6A70"));
  s.g.update_edge(id, [](Edge& e) {
    e.validator_agreement = 1.0;
    e.combined_confidence = 0.9;
  });
  s.attach(id);
  const auto r = render_report(s.g, id, {}, ReportFormat::text);
  CHECK(r.find("Accepted") != std::string::npos);
  CHECK(r.find("validator agreement") != std::string::npos);
  CHECK(r.find("1.0000") != std::string::npos);
}

TEST_CASE("report cache re-renders after the edge changes") {
  Scene s;
  const auto a = s.expr("man ka bhoj");
  const auto id = s.g.add_edge(a, s.concept_id("6A70"), EdgeType::ExpressionConcept, 0.6, "r", prov()).id;
  s.g.transition(id, EdgeStatus::UnderValidation);
  s.attach(id);
  ReportCache cache;
  const auto first = cache.get(s.g, id, {}, ReportFormat::text);
  CHECK(cache.get(s.g, id, {}, ReportFormat::text) == first);
  CHECK(cache.size() == 1);
  s.g.transition(id, EdgeStatus::Accepted);
  const auto second = cache.get(s.g, id, {}, ReportFormat::text);
  CHECK(second != first);
  CHECK(second.find("Accepted") != std::string::npos);
}
