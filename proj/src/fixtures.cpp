#include "clpde/fixtures.hpp"

#include <random>
#include <sstream>

#include "clpde/bundled.hpp"
#include "clpde/engine.hpp"
#include "clpde/error.hpp"
#include "clpde/text.hpp"

namespace clpde::fixtures {

namespace {

Provenance synthetic(const std::string& id) {
  Provenance p;
  p.source_kind = SourceKind::synthetic;
  p.source_id = id;
  p.collected_at = epoch();
  p.anonymized = true;
  return p;
}

AnnotationRecord annotation(SemanticCategory c, Severity s, Temporal t, const std::string& who) {
  AnnotationRecord a;
  a.semantic_category = c;
  a.severity = s;
  a.temporal = t;
  a.annotator_confidence = 0.9;
  a.annotator_id = who;
  return a;
}

void accept_directly(OntologyGraph& g, const EdgeId& id) {
  g.transition(id, EdgeStatus::UnderValidation);
  g.transition(id, EdgeStatus::Accepted);
}

PlantedClusters build_planted() {
  PlantedClusters fx;
  HashedTokenProvider provider;
  fx.provider_id = provider.id();
  fx.languages = {"hi", "kn", "mr"};
  const std::vector<std::string> core[2] = {
      {"ghabrahat", "dhadkan", "bechaini", "kaanpna", "pasina", "saans", "darr", "jhatka"},
      {"udaasi", "thakan", "akelapan", "khaalipan", "nirasha", "aansu", "boriyat", "sunapan"}};
  const NodeId concepts[2] = {
      fx.graph.add_concept("6B00", Framework::ICD11, "Generalized anxiety disorder"),
      fx.graph.add_concept("6A70", Framework::ICD11, "Single episode depressive disorder")};
  for (const auto& lang : fx.languages) {
    for (int c = 0; c < 2; ++c) {
      for (int m = 0; m < 5; ++m) {
        const std::string own = lang + "-c" + std::to_string(c) + "-m" + std::to_string(m);
        const std::string surface = text::join(core[c], " ") + " " + own;
        const NodeId id = fx.graph.add_expression(
            surface, lang,
            annotation(c == 0 ? SemanticCategory::somatic_complaint : SemanticCategory::emotion,
                       Severity::mild, Temporal::chronic, "planted"),
            synthetic("planted:" + own));
        fx.cluster_of[id] = c;
        fx.store.register_embedding(fx.graph, id, provider.embed(surface), fx.provider_id);
        const Edge e = fx.graph.add_edge(id, concepts[c], EdgeType::ExpressionConcept, 0.9,
                                         "planted cluster mapping", synthetic("planted"));
        accept_directly(fx.graph, e.id);
      }
    }
  }
  return fx;
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

SimulationFixture build_simulation() {
  SimulationFixture fx;
  HashedTokenProvider provider;
  std::vector<NodeId> concepts;
  for (const auto& c : parse_concepts(bundled::concepts_json())) {
    concepts.push_back(fx.graph.add_concept(c.code, c.framework, c.label, c.description));
  }
  std::mt19937_64 rng(20250101);
  const SemanticCategory cats[] = {SemanticCategory::emotion, SemanticCategory::somatic_complaint,
                                   SemanticCategory::behavior};
  const char* stems[] = {"mann", "dil", "neend", "sar", "bhook", "kaam", "ghar"};
  for (int i = 0; i < 100; ++i) {
    char num[8];
    std::snprintf(num, sizeof num, "%03d", i);
    const std::string surface = std::string(stems[i % 7]) + " pareshan hai " + "vakya" + num;
    const NodeId id = fx.graph.add_expression(
        surface, "hi", annotation(cats[i % 3], Severity::unknown, Temporal::unknown, "sim-annotator"),
        synthetic(std::string("sim:") + num));
    fx.store.register_embedding(fx.graph, id, provider.embed(surface), provider.id());
    const std::size_t a = static_cast<std::size_t>(i) % concepts.size();
    const std::size_t b = (a + 3) % concepts.size();
    for (std::size_t dst : {a, b}) {
      CandidateEdge c;
      c.src = id;
      c.dst = concepts[dst];
      c.edge_type = EdgeType::ExpressionConcept;
      c.score = 0.02 + 0.96 * uniform01(rng);
      c.rationale = "simulated proposer score";
      c.proposer_id = "simulated";
      if (uniform01(rng) < c.score) fx.truth.insert(candidate_key(c));
      fx.candidates.push_back(std::move(c));
    }
  }
  return fx;
}

ValidationDecision vote(const EdgeId& edge, Role role, Verdict verdict,
                        std::optional<Modification> mod = std::nullopt) {
  ValidationDecision d;
  d.edge_id = edge;
  d.validator_id = "demo-" + std::string(to_string(role));
  d.role = role;
  d.verdict = verdict;
  d.modification = std::move(mod);
  d.comment = "demo review";
  return d;
}

}  // namespace

Timestamp epoch() { return text::parse_timestamp("2025-01-01T00:00:00Z"); }

std::function<Timestamp()> stepping_clock() {
  auto ticks = std::make_shared<long>(0);
  return [ticks]() { return epoch() + std::chrono::minutes((*ticks)++); };
}

const PlantedClusters& planted_clusters() {
  static const PlantedClusters fx = build_planted();
  return fx;
}

const SimulationFixture& simulation_fixture() {
  static const SimulationFixture fx = build_simulation();
  return fx;
}

std::unique_ptr<Engine> demo_engine() {
  auto engine = std::make_unique<Engine>(ServiceConfig{}, stepping_clock());
  Engine& e = *engine;
  e.load_concepts(e.resources().concepts);
  std::istringstream corpus{std::string(bundled::corpus_jsonl())};
  e.ingest(corpus);

  ProposeRequest concept_req;
  concept_req.mode = "concept";
  concept_req.tau = 0.5;
  e.propose(concept_req);
  ProposeRequest cross;
  cross.mode = "cross";
  cross.tau = 0.55;
  for (auto [a, b] : {std::pair{"hi", "kn"}, {"hi", "mr"}, {"kn", "mr"}}) {
    cross.lang_a = a;
    cross.lang_b = b;
    e.propose(cross);
  }
  ProposeRequest intra;
  intra.mode = "intra";
  intra.language = "hi";
  intra.tau = 0.55;
  e.propose(intra);

  // Source nodes with two pending concept edges go to parallel retention.
  const auto snap = e.snapshot();
  std::map<NodeId, std::vector<EdgeId>> concept_edges;
  std::vector<EdgeId> pending;
  for (const auto& [id, edge] : snap->graph.edges()) {
    if (edge.status != EdgeStatus::UnderValidation) continue;
    pending.push_back(id);
    if (edge.edge_type == EdgeType::ExpressionConcept) concept_edges[edge.src].push_back(id);
  }
  std::set<EdgeId> parallel;
  for (const auto& [src, ids] : concept_edges) {
    if (ids.size() == 2 && parallel.empty()) parallel.insert(ids.begin(), ids.end());
  }

  const Role roles[] = {Role::linguistic, Role::clinical, Role::cultural};
  std::size_t i = 0;
  bool modified = false;
  for (const auto& id : pending) {
    const Edge& edge = snap->graph.edge(id);
    if (parallel.count(id)) {
      e.decide(vote(id, Role::linguistic, Verdict::accept));
      e.decide(vote(id, Role::clinical, Verdict::reject));
      e.decide(vote(id, Role::cultural, Verdict::accept));
      continue;
    }
    const std::size_t pattern = i++ % 5;
    if (pattern == 3 && !modified && edge.edge_type == EdgeType::ExpressionConcept) {
      // Redirect to burnout, which the lexicon rarely proposes directly.
      const auto burnout = snap->graph.find_concept_by_code("QD85");
      if (burnout && *burnout != edge.dst && !snap->graph.find_edge(edge.src, *burnout, edge.edge_type)) {
        Modification mod;
        mod.new_dst = *burnout;
        e.decide(vote(id, Role::linguistic, Verdict::accept));
        e.decide(vote(id, Role::clinical, Verdict::modify, mod));
        e.decide(vote(id, Role::cultural, Verdict::accept));
        modified = true;
        continue;
      }
    }
    for (Role r : roles) {
      Verdict v = Verdict::accept;
      if (pattern == 2) v = Verdict::reject;
      if (pattern == 4 && r == Role::cultural) v = Verdict::reject;
      e.decide(vote(id, r, v));
    }
    if (pattern == 4) {
      AdjudicationRequest req;
      req.outcome = AdjudicationOutcome::consensus_accept;
      req.note = "cultural reviewer persuaded after discussion";
      e.adjudicate(id, req);
    }
  }
  if (parallel.size() == 2) {
    AdjudicationRequest req;
    req.outcome = AdjudicationOutcome::retain_parallel;
    const EdgeId first = *parallel.begin();
    req.parallel_edges = {*std::next(parallel.begin())};
    req.reasons = {"anxious reading favoured by linguistic and cultural reviewers",
                   "acute panic reading favoured by the clinical reviewer"};
    req.note = "both readings are clinically plausible";
    e.adjudicate(first, req);
  }

  AlignRequest near;
  near.surface_text = "mujhe bahut ghabraahat mehsoos ho rhi hai";
  near.language = "hi";
  near.provenance = synthetic("demo-align-1");
  e.align(near);
  AlignRequest unknown;
  unknown.surface_text = "aankhon ke aage andhera chha jata hai";
  unknown.language = "hi";
  unknown.provenance = synthetic("demo-align-2");
  e.align(unknown);

  for (const auto& [id, edge] : e.snapshot()->graph.edges()) {
    if (edge.status == EdgeStatus::Rejected) {
      e.explain(id);
      break;
    }
  }
  return engine;
}

}  // namespace clpde::fixtures
