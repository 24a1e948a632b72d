// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit when any
// criterion fails.

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include "clpde/bundled.hpp"
#include "clpde/engine.hpp"
#include "clpde/error.hpp"
#include "clpde/explain.hpp"
#include "clpde/fixtures.hpp"
#include "clpde/metrics.hpp"
#include "clpde/workflow.hpp"
#include "support.hpp"

using namespace clpde;
using testsupport::ann;
using testsupport::prov;

namespace {

constexpr double kOracleTol = 1e-9;
constexpr double kKappaSeconds = 5.0;
constexpr double kStateMachineSeconds = 30.0;
constexpr double kRecallSeconds = 5.0;

// Collects failures for one criterion.
struct Check {
  std::vector<std::string> failures;
  std::size_t count = 0;

  void expect(bool ok, const std::string& what) {
    ++count;
    if (!ok && failures.size() < 5) failures.push_back(what);
    if (!ok && failures.size() == 5) failures.push_back("...");
  }
  bool ok() const { return failures.empty(); }
};

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string secs(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << v << " s";
  return os.str();
}

bool report(const std::string& name, const Check& c, const std::string& detail) {
  if (c.ok()) {
    std::cout << "PASS " << name << " (" << detail << ")\n";
    return true;
  }
  std::cout << "FAIL " << name << ": ";
  for (std::size_t i = 0; i < c.failures.size(); ++i) std::cout << (i ? "; " : "") << c.failures[i];
  std::cout << "\n";
  return false;
}

// ---------------------------------------------------------------------------

bool kappa_oracle_equivalence() {
  Check c;
  const auto start = Clock::now();
  using V = std::vector<std::string>;
  c.expect(cohen_kappa(V{"E", "S", "B"}, V{"E", "S", "B"}) == 1.0, "identical labels != 1.0");
  c.expect(cohen_kappa(V{"A", "A", "B", "B"}, V{"A", "B", "A", "B"}) == 0.0, "chance agreement != 0.0");
  c.expect(cohen_kappa(V{"E", "E", "S", "S", "B", "B"}, V{"E", "E", "S", "B", "B", "B"}) == 0.75,
           "5/6 agreement != 0.75");

  std::mt19937_64 rng(20250101);
  const std::vector<std::string> letters{"a", "b", "c", "d", "e"};
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 2 + rng() % 49;
    const std::size_t m = 2 + rng() % 4;
    V a, b;
    for (std::size_t i = 0; i < n; ++i) {
      a.push_back(letters[rng() % m]);
      b.push_back(letters[rng() % m]);
    }
    const double got = cohen_kappa(a, b);
    const double want = testsupport::kappa_oracle(a, b);
    worst = std::max(worst, std::abs(got - want));
    c.expect(std::abs(got - want) <= kOracleTol, "trial " + std::to_string(t) + ": " + fmt(got) + " vs " + fmt(want));
  }
  const double elapsed = seconds_since(start);
  c.expect(elapsed < kKappaSeconds, "runtime " + secs(elapsed));
  return report("kappa-oracle-equivalence", c, "1000 random lists, max |diff| " + fmt(worst) + ", " + secs(elapsed));
}

// ---------------------------------------------------------------------------

bool legal(std::optional<EdgeStatus> from, EdgeStatus to) {
  using S = EdgeStatus;
  if (!from) return to == S::Proposed;
  switch (*from) {
    case S::Proposed: return to == S::UnderValidation;
    case S::UnderValidation:
      return to == S::Accepted || to == S::Rejected || to == S::Superseded || to == S::Adjudication;
    case S::Adjudication: return to == S::Accepted || to == S::Rejected || to == S::ParallelRetained;
    default: return false;
  }
}

struct Universe {
  OntologyGraph graph;
  std::vector<NodeId> expressions;
  std::vector<NodeId> concepts;
  std::vector<EdgeId> edges;
};

// 20 expressions, 8 concepts, 100 distinct expression-concept edges.
Universe seed_universe(std::mt19937_64& rng) {
  Universe u;
  for (int i = 0; i < 20; ++i) {
    u.expressions.push_back(u.graph.add_expression("vakya " + std::to_string(i), i % 2 ? "kn" : "hi", ann(), prov()));
  }
  for (int i = 0; i < 8; ++i) {
    u.concepts.push_back(u.graph.add_concept("SM" + std::to_string(i), Framework::CULTURAL, "concept " + std::to_string(i)));
  }
  std::vector<std::pair<std::size_t, std::size_t>> combos;
  for (std::size_t e = 0; e < 20; ++e)
    for (std::size_t k = 0; k < 8; ++k) combos.push_back({e, k});
  std::shuffle(combos.begin(), combos.end(), rng);
  std::uniform_real_distribution<double> conf(0.05, 0.95);
  for (std::size_t i = 0; i < 100; ++i) {
    const auto [e, k] = combos[i];
    u.edges.push_back(u.graph.add_edge(u.expressions[e], u.concepts[k], EdgeType::ExpressionConcept, conf(rng), "seeded", prov()).id);
  }
  return u;
}

ValidationDecision random_decision(std::mt19937_64& rng, const EdgeId& edge, const std::vector<NodeId>& concepts) {
  static const Role roles[] = {Role::linguistic, Role::clinical, Role::cultural};
  ValidationDecision d;
  d.edge_id = edge;
  d.role = roles[rng() % 3];
  d.validator_id = std::string(to_string(d.role)) + "-" + std::to_string(rng() % 2);
  const auto r = rng() % 100;
  d.verdict = r < 50 ? Verdict::accept : r < 88 ? Verdict::reject : Verdict::modify;
  if (d.verdict == Verdict::modify) d.modification = Modification{concepts[rng() % concepts.size()], std::nullopt};
  return d;
}

struct Action {
  bool adjudicate = false;
  ValidationDecision decision;
  AdjudicationOutcome outcome = AdjudicationOutcome::consensus_accept;
  std::vector<EdgeId> parallel;
  std::vector<std::string> reasons;
};

// One step of a random sequence targeting `edge`; partners share its source.
Action random_action(std::mt19937_64& rng, const OntologyGraph& g, const EdgeId& edge,
                     const std::vector<NodeId>& concepts) {
  Action a;
  if (rng() % 100 >= 75) {
    a.adjudicate = true;
    const auto r = rng() % 3;
    a.outcome = r == 0 ? AdjudicationOutcome::consensus_accept
                : r == 1 ? AdjudicationOutcome::consensus_reject
                         : AdjudicationOutcome::retain_parallel;
    if (a.outcome == AdjudicationOutcome::retain_parallel) {
      std::vector<EdgeId> partners;
      for (const auto& n : g.neighbors(g.edge(edge).src, EdgeType::ExpressionConcept)) {
        if (n.edge.id != edge && n.edge.src == g.edge(edge).src) partners.push_back(n.edge.id);
      }
      if (!partners.empty()) a.parallel.push_back(partners[rng() % partners.size()]);
      for (std::size_t i = 0; i <= a.parallel.size(); ++i) a.reasons.push_back("reading " + std::to_string(i));
    }
    return a;
  }
  a.decision = random_decision(rng, edge, concepts);
  return a;
}

// Every Accepted edge has unanimous accepts from all required roles or an
// adjudication note.
bool accepted_justified(const Edge& e, const std::vector<ValidationDecision>& ds, const WorkflowConfig& cfg) {
  if (e.adjudication_note && !e.adjudication_note->empty()) return true;
  std::set<Role> roles;
  for (const auto& d : ds) {
    if (d.verdict != Verdict::accept) return false;
    roles.insert(d.role);
  }
  return std::includes(roles.begin(), roles.end(), cfg.required_roles.begin(), cfg.required_roles.end());
}

bool state_machine_safety() {
  Check c;
  const auto start = Clock::now();
  std::mt19937_64 rng(77);
  std::size_t sequences = 0, applied = 0, refused = 0, illegal = 0, violations = 0, accepted = 0;

  // Workflow level: 100 universes x 100 sequences.
  for (int round = 0; round < 100; ++round) {
    Universe u = seed_universe(rng);
    ValidationWorkflow wf;
    for (const auto& id : u.edges) wf.enqueue(u.graph, id, fixtures::epoch());
    for (int s = 0; s < 100; ++s, ++sequences) {
      std::vector<EdgeId> live;
      for (const auto& [id, e] : u.graph.edges()) {
        if (e.status == EdgeStatus::UnderValidation || e.status == EdgeStatus::Adjudication) live.push_back(id);
      }
      const EdgeId target = live.empty() ? u.edges[rng() % u.edges.size()] : live[rng() % live.size()];
      for (int step = 0, n = 1 + static_cast<int>(rng() % 8); step < n; ++step) {
        const Action a = random_action(rng, u.graph, target, u.concepts);
        try {
          if (a.adjudicate) {
            wf.resolve_adjudication(u.graph, target, a.outcome, a.parallel, a.reasons, "random");
          } else {
            const auto out = wf.submit_decision(u.graph, a.decision);
            if (out.revision) wf.enqueue(u.graph, out.revision->id, fixtures::epoch());
          }
          ++applied;
        } catch (const Error&) {
          ++refused;
        }
      }
    }
    for (const auto& t : u.graph.transitions()) {
      if (!legal(t.from, t.to)) {
        ++illegal;
        c.expect(false, "illegal " + t.edge_id + " " + (t.from ? std::string(to_string(*t.from)) : "-") + "->" +
                            std::string(to_string(t.to)));
      }
    }
    const auto v = u.graph.integrity_violations();
    violations += v.size();
    for (const auto& msg : v) c.expect(false, msg);
    for (const auto& [id, e] : u.graph.edges()) {
      if (e.status != EdgeStatus::Accepted) continue;
      ++accepted;
      c.expect(accepted_justified(e, wf.decisions(id), wf.config()), id + " accepted without unanimity or note");
    }
  }

  // Engine level: the transitions written to the event log.
  std::size_t logged = 0;
  for (int round = 0; round < 10; ++round) {
    Universe u = seed_universe(rng);
    for (const auto& id : u.edges) u.graph.transition(id, EdgeStatus::UnderValidation);
    Engine engine(ServiceConfig{}, fixtures::stepping_clock());
    engine.import_graph(u.graph.export_graph());
    for (int s = 0; s < 100; ++s) {
      const auto snap = engine.snapshot();
      std::vector<EdgeId> live;
      for (const auto& [id, e] : snap->graph.edges()) {
        if (e.status == EdgeStatus::UnderValidation || e.status == EdgeStatus::Adjudication) live.push_back(id);
      }
      if (live.empty()) break;
      const EdgeId target = live[rng() % live.size()];
      for (int step = 0, n = 1 + static_cast<int>(rng() % 6); step < n; ++step) {
        const Action a = random_action(rng, engine.snapshot()->graph, target, u.concepts);
        try {
          if (a.adjudicate) {
            engine.adjudicate(target, AdjudicationRequest{a.outcome, a.parallel, a.reasons, "random"});
          } else {
            engine.decide(a.decision);
          }
        } catch (const Error&) {
        }
      }
    }
    for (const auto& line : engine.log_lines()) {
      const Json ev = Json::parse(line);
      if (!ev["payload"].contains("transitions")) continue;
      for (const auto& t : ev["payload"]["transitions"]) {
        ++logged;
        std::optional<EdgeStatus> from;
        if (!t["from"].is_null()) from = enum_from_string<EdgeStatus>(t["from"].get<std::string>());
        const auto to = enum_from_string<EdgeStatus>(t["to"].get<std::string>());
        if (!legal(from, to)) {
          ++illegal;
          c.expect(false, "logged illegal transition on " + t["edge_id"].get<std::string>());
        }
      }
    }
    const auto snap = engine.snapshot();
    for (const auto& msg : snap->graph.integrity_violations()) c.expect(false, "engine: " + msg);
    for (const auto& [id, e] : snap->graph.edges()) {
      if (e.status == EdgeStatus::Accepted) {
        c.expect(accepted_justified(e, snap->workflow.decisions(id), snap->workflow.config()),
                 "engine: " + id + " accepted without unanimity or note");
      }
    }
  }

  const double elapsed = seconds_since(start);
  c.expect(elapsed < kStateMachineSeconds, "runtime " + secs(elapsed));
  std::ostringstream d;
  d << sequences << " sequences, " << applied << " applied, " << refused << " refused, " << illegal
    << " illegal, " << violations << " integrity violations, " << accepted << " accepted checked, " << logged
    << " logged transitions, " << secs(elapsed);
  return report("state-machine-safety", c, d.str());
}

// ---------------------------------------------------------------------------

using PairSet = std::set<std::pair<NodeId, NodeId>>;

PairSet pairs_of(const std::vector<CandidateEdge>& cs, bool ordered) {
  PairSet out;
  for (const auto& c : cs) out.insert(ordered || c.src < c.dst ? std::pair{c.src, c.dst} : std::pair{c.dst, c.src});
  return out;
}

bool planted_recall() {
  Check c;
  const auto start = Clock::now();
  const auto& f = fixtures::planted_clusters();
  const ProposalParams params{f.provider_id, 5, 0.8};
  const auto& vecs = *f.store.vectors(f.provider_id);
  auto lang = [&](const NodeId& id) { return f.graph.expression(id).language; };
  auto sim = [&](const NodeId& a, const NodeId& b) {
    return (testsupport::cosine_oracle(vecs.at(a), vecs.at(b)) + 1.0) / 2.0;
  };
  std::size_t within_total = 0, within_found = 0, cross_found = 0;

  for (const auto& l : f.languages) {
    PairSet oracle, planted;
    for (const auto& [a, _] : vecs) {
      for (const auto& [b, __] : vecs) {
        if (!(a < b) || lang(a) != l || lang(b) != l) continue;
        if (sim(a, b) >= params.tau) oracle.insert({a, b});
        if (f.cluster_of.at(a) == f.cluster_of.at(b)) planted.insert({a, b});
      }
    }
    const PairSet got = pairs_of(propose_intra_lingual(f.graph, f.store, l, params), false);
    c.expect(got == oracle, "intra " + l + " differs from all-pairs oracle");
    c.expect(oracle == planted, "intra " + l + " oracle differs from planted clusters");
    within_total += planted.size();
    for (const auto& p : got) (f.cluster_of.at(p.first) == f.cluster_of.at(p.second) ? within_found : cross_found)++;
  }
  for (std::size_t i = 0; i < f.languages.size(); ++i) {
    for (std::size_t j = i + 1; j < f.languages.size(); ++j) {
      const auto& la = f.languages[i];
      const auto& lb = f.languages[j];
      PairSet oracle, planted;
      for (const auto& [a, _] : vecs) {
        for (const auto& [b, __] : vecs) {
          if (lang(a) != la || lang(b) != lb) continue;
          if (sim(a, b) >= params.tau) oracle.insert({a, b});
          if (f.cluster_of.at(a) == f.cluster_of.at(b)) planted.insert({a, b});
        }
      }
      const PairSet got = pairs_of(propose_cross_lingual(f.graph, f.store, la, lb, params), true);
      c.expect(got == oracle, "cross " + la + "-" + lb + " differs from all-pairs oracle");
      c.expect(oracle == planted, "cross " + la + "-" + lb + " oracle differs from planted clusters");
      within_total += planted.size();
      for (const auto& p : got) (f.cluster_of.at(p.first) == f.cluster_of.at(p.second) ? within_found : cross_found)++;
    }
  }
  c.expect(cross_found == 0, std::to_string(cross_found) + " cross-cluster pairs proposed");
  c.expect(within_found == within_total, "recall " + std::to_string(within_found) + "/" + std::to_string(within_total));
  const double elapsed = seconds_since(start);
  c.expect(elapsed < kRecallSeconds, "runtime " + secs(elapsed));
  return report("planted-similarity-recall", c,
                "within-cluster " + std::to_string(within_found) + "/" + std::to_string(within_total) +
                    ", cross-cluster " + std::to_string(cross_found) + ", " + secs(elapsed));
}

// ---------------------------------------------------------------------------

bool threshold_monotonicity() {
  Check c;
  const auto& f = fixtures::planted_clusters();
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int t = 0; t < 1000; ++t) {
    double t1 = unit(rng), t2 = unit(rng);
    if (t1 > t2) std::swap(t1, t2);
    const std::size_t k = 1 + rng() % 15;
    const auto& la = f.languages[rng() % f.languages.size()];
    const auto& lb = f.languages[rng() % f.languages.size()];
    PairSet lo, hi;
    if (la == lb) {
      lo = pairs_of(propose_intra_lingual(f.graph, f.store, la, {f.provider_id, k, t1}), false);
      hi = pairs_of(propose_intra_lingual(f.graph, f.store, la, {f.provider_id, k, t2}), false);
    } else {
      lo = pairs_of(propose_cross_lingual(f.graph, f.store, la, lb, {f.provider_id, k, t1}), true);
      hi = pairs_of(propose_cross_lingual(f.graph, f.store, la, lb, {f.provider_id, k, t2}), true);
    }
    c.expect(std::includes(lo.begin(), lo.end(), hi.begin(), hi.end()),
             "candidates(" + fmt(t2) + ") not within candidates(" + fmt(t1) + ")");
  }

  static const EdgeStatus outcomes[] = {EdgeStatus::Accepted, EdgeStatus::Rejected, EdgeStatus::Superseded,
                                        EdgeStatus::ParallelRetained};
  WorkflowConfig cfg;
  double lowest = 1.0, highest = 0.0;
  for (int t = 0; t < 1000; ++t) {
    cfg.eta = unit(rng);
    cfg.target_reject_rate = unit(rng);
    std::vector<EdgeStatus> window(1 + rng() % 60);
    for (auto& s : window) s = outcomes[rng() % 4];
    cfg.tau = update_thresholds(window, cfg);
    lowest = std::min(lowest, cfg.tau);
    highest = std::max(highest, cfg.tau);
    c.expect(cfg.tau >= cfg.tau_min && cfg.tau <= cfg.tau_max, "tau " + fmt(cfg.tau) + " left bounds");
  }
  return report("threshold-monotonicity", c,
                "1000 tau pairs subset-ordered, 1000 windows kept tau in [" + fmt(lowest) + ", " + fmt(highest) + "]");
}

// ---------------------------------------------------------------------------

bool active_learning_lift() {
  Check c;
  const auto& f = fixtures::simulation_fixture();
  c.expect(f.candidates.size() == 200, "fixture has " + std::to_string(f.candidates.size()) + " candidates");
  double active = 0.0, random = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    for (auto policy : {Policy::active, Policy::random}) {
      SimulationConfig cfg;
      cfg.seed = seed;
      cfg.validator_accuracy = 1.0;
      cfg.target_f1 = 0.9;
      cfg.policy = policy;
      cfg.true_edge_set = f.truth;
      const auto a = simulate_validation(cfg, f.candidates, f.graph).report;
      const auto b = simulate_validation(cfg, f.candidates, f.graph).report;
      c.expect(Json(a).dump() == Json(b).dump(), "seed " + std::to_string(seed) + " report not reproducible");
      c.expect(a.target_reached, "seed " + std::to_string(seed) + " " + std::string(to_string(policy)) +
                                     " never reached the target");
      (policy == Policy::active ? active : random) += static_cast<double>(a.decisions_used);
    }
  }
  active /= 20.0;
  random /= 20.0;
  c.expect(active <= random, "active mean " + fmt(active) + " > random mean " + fmt(random));
  return report("active-learning-lift", c,
                "mean decisions to F1 0.9: active " + fmt(active) + ", random " + fmt(random));
}

// ---------------------------------------------------------------------------

bool combined_confidence_contract() {
  Check c;
  auto votes = [](std::vector<Verdict> vs) {
    std::vector<ValidationDecision> out;
    for (auto v : vs) {
      ValidationDecision d;
      d.verdict = v;
      out.push_back(d);
    }
    return out;
  };
  const double a = combined_confidence(0.8, votes({Verdict::accept, Verdict::accept, Verdict::accept}), 0.5);
  const double b = combined_confidence(0.6, votes({Verdict::accept, Verdict::reject}), 0.5);
  c.expect(a == 0.9, "(0.8, 3 accepts) gave " + fmt(a));
  c.expect(b == 0.55, "(0.6, accept+reject) gave " + fmt(b));

  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  static const Verdict all[] = {Verdict::accept, Verdict::reject, Verdict::modify};
  for (int t = 0; t < 1000; ++t) {
    const double model = unit(rng), alpha = unit(rng);
    std::vector<Verdict> vs(rng() % 8);
    for (auto& v : vs) v = all[rng() % 3];
    const double base = combined_confidence(model, votes(vs), alpha);
    auto more = vs;
    more.push_back(Verdict::accept);
    c.expect(combined_confidence(model, votes(more), alpha) >= base - 1e-15, "adding an accept lowered confidence");
    auto it = std::find(vs.begin(), vs.end(), Verdict::reject);
    if (it != vs.end()) {
      auto flipped = vs;
      flipped[static_cast<std::size_t>(it - vs.begin())] = Verdict::accept;
      c.expect(combined_confidence(model, votes(flipped), alpha) >= base - 1e-15,
               "turning a reject into an accept lowered confidence");
    }
  }
  return report("combined-confidence-contract", c, "hand cases " + fmt(a) + ", " + fmt(b) + "; 1000 random sets monotone");
}

// ---------------------------------------------------------------------------

bool explainability_completeness() {
  Check c;
  const auto& f = fixtures::simulation_fixture();
  const HashedTokenProvider provider;
  const auto rules = parse_rules(bundled::rules_json());
  std::size_t settled = 0, reports = 0;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    for (auto policy : {Policy::active, Policy::random}) {
      SimulationConfig cfg;
      cfg.seed = seed;
      cfg.policy = policy;
      cfg.validator_accuracy = 0.8;
      cfg.target_f1 = std::nullopt;
      cfg.true_edge_set = f.truth;
      EmbeddingStore store = f.store;
      SettledHook hook = [&](OntologyGraph& g, const EdgeId& id) {
        ExplainContext ctx{g, store, provider, rules};
        const auto bundle = generate_bundle(ctx, id);
        g.update_edge(id, [&](Edge& e) { e.explanation = bundle; });
      };
      const auto run = simulate_validation(cfg, f.candidates, f.graph, {}, hook);
      for (const auto& [id, e] : run.graph.edges()) {
        if (e.status != EdgeStatus::Accepted && e.status != EdgeStatus::ParallelRetained) continue;
        ++settled;
        if (!e.explanation) {
          c.expect(false, id + " settled without a bundle");
          continue;
        }
        const auto& b = *e.explanation;
        c.expect(!b.linguistic.empty() && !b.cultural.empty() && !b.clinical.empty(), id + " has an empty perspective");
        if (reports < 50) {
          const auto decisions = run.workflow.decisions(id);
          const auto first = render_report(run.graph, id, decisions, ReportFormat::html);
          const auto second = render_report(run.graph, id, decisions, ReportFormat::html);
          c.expect(first == second, id + " report not byte-stable");
          c.expect(render_report(run.graph, id, decisions, ReportFormat::text) ==
                       render_report(run.graph, id, decisions, ReportFormat::text),
                   id + " text report not byte-stable");
          ++reports;
        }
      }
    }
  }
  c.expect(settled > 0, "no settled edges");

  // The engine persists bundles for edges it settles.
  const auto demo = fixtures::demo_engine();
  for (const auto& [id, e] : demo->snapshot()->graph.edges()) {
    if (e.status != EdgeStatus::Accepted && e.status != EdgeStatus::ParallelRetained) continue;
    ++settled;
    c.expect(e.explanation && !e.explanation->linguistic.empty() && !e.explanation->cultural.empty() &&
                 !e.explanation->clinical.empty(),
             "engine edge " + id + " lacks a complete bundle");
  }

  std::mt19937_64 rng(314);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    std::vector<std::string> words, other;
    for (int i = 0, n = 1 + static_cast<int>(rng() % 8); i < n; ++i) words.push_back(testsupport::random_word(rng));
    for (int i = 0, n = 1 + static_cast<int>(rng() % 8); i < n; ++i) {
      other.push_back(rng() % 3 == 0 ? words[rng() % words.size()] : testsupport::random_word(rng));
    }
    const auto got = token_contributions(text::join(words, " "), text::join(other, " "), provider);
    const auto want = testsupport::loo_oracle(provider, words, other);
    c.expect(got.size() == want.size(), "token count differs on text " + std::to_string(t));
    for (std::size_t i = 0; i < std::min(got.size(), want.size()); ++i) {
      worst = std::max(worst, std::abs(got[i].score - want[i]));
      c.expect(std::abs(got[i].score - want[i]) <= kOracleTol, "text " + std::to_string(t) + " token " + got[i].token);
    }
  }
  return report("explainability-completeness", c,
                std::to_string(settled) + " settled edges with full bundles, " + std::to_string(reports) +
                    " reports byte-stable, LOO max |diff| " + fmt(worst));
}

// ---------------------------------------------------------------------------

bool round_trip_integrity() {
  Check c;
  const auto demo = fixtures::demo_engine();
  const std::string first = demo->export_graph();
  const std::string second = OntologyGraph::import_graph(first).export_graph();
  c.expect(first == second, "export -> import -> export differs");

  Engine fresh(ServiceConfig{}, fixtures::stepping_clock());
  fresh.replay(demo->log_text());
  c.expect(fresh.export_graph() == first, "replayed export differs");

  Engine imported(ServiceConfig{}, fixtures::stepping_clock());
  imported.import_graph(first);
  c.expect(imported.export_graph() == first, "engine import differs");

  using V = std::vector<std::string>;
  const V base{"E", "E", "S", "S", "B", "B"};
  const auto above = agreement_report({base, V{"E", "E", "S", "B", "B", "B"}});
  const auto below = agreement_report({V{"A", "A", "B", "B"}, V{"A", "B", "A", "B"}});
  c.expect(above.kappa == 0.75 && above.meets_target(), "kappa 0.75 should pass the flag");
  c.expect(below.kappa == 0.0 && !below.meets_target(), "kappa 0.0 should fail the flag");
  AgreementReport edge;
  edge.kappa = 0.7;
  c.expect(!edge.meets_target(), "kappa exactly 0.7 should fail the flag");

  return report("round-trip-integrity", c,
                std::to_string(demo->log_lines().size()) + " events replayed, export " +
                    std::to_string(first.size()) + " bytes identical, kappa flag 0.75 pass / 0.0 fail");
}

// ---------------------------------------------------------------------------

bool connectivity_coherence_oracles() {
  Check c;
  auto accept = [](OntologyGraph& g, const NodeId& s, const NodeId& d, EdgeType t) {
    const auto id = g.add_edge(s, d, t, 0.8, "r", prov()).id;
    g.transition(id, EdgeStatus::UnderValidation);
    g.transition(id, EdgeStatus::Accepted);
  };
  auto compare = [&](const std::string& name, const OntologyGraph& g) {
    const auto m = connectivity_metrics(g);
    const auto o = testsupport::connectivity_oracle(g);
    c.expect(m.weakly_connected_components == o.components, name + ": components");
    c.expect(std::abs(m.mean_degree - o.mean_degree) <= kOracleTol, name + ": mean degree");
    c.expect(std::abs(m.isolated_expression_ratio - o.isolated_ratio) <= kOracleTol, name + ": isolated ratio");
    c.expect(std::abs(m.concept_coverage - o.coverage) <= kOracleTol, name + ": coverage");
    return m;
  };

  const auto empty = connectivity_metrics(OntologyGraph{});
  c.expect(empty.weakly_connected_components == 0 && empty.concept_coverage == 0.0 &&
               empty.isolated_expression_ratio == 0.0,
           "empty graph not all zero");

  OntologyGraph three;
  const auto a = three.add_expression("dil ghabrata hai", "hi", ann(), prov());
  three.add_expression("neend nahi aati", "hi", ann(), prov());
  const auto k = three.add_concept("6B00", Framework::ICD11, "Generalized anxiety disorder");
  accept(three, a, k, EdgeType::ExpressionConcept);
  const auto m3 = compare("3-node", three);
  c.expect(m3.concept_coverage == 0.5 && m3.isolated_expression_ratio == 0.5 && m3.weakly_connected_components == 2,
           "3-node fixture: coverage " + fmt(m3.concept_coverage) + ", isolated " +
               fmt(m3.isolated_expression_ratio) + ", components " + std::to_string(m3.weakly_connected_components));

  OntologyGraph chain;
  const auto x = chain.add_expression("man ka bhoj", "hi", ann(), prov());
  const auto y = chain.add_expression("dil bhaari hai", "hi", ann(), prov());
  const auto kc = chain.add_concept("6A70", Framework::ICD11, "Single episode depressive disorder");
  accept(chain, x, y, EdgeType::IntraLingual);
  accept(chain, y, kc, EdgeType::ExpressionConcept);
  const auto mc = compare("chain", chain);
  c.expect(mc.concept_coverage == 1.0, "chain coverage " + fmt(mc.concept_coverage));

  const auto& f = fixtures::planted_clusters();
  const auto got = semantic_coherence(f.graph, f.store, f.provider_id);
  const auto want = testsupport::coherence_oracle(f.graph, f.store, f.provider_id);
  c.expect(got && want && std::abs(*got - *want) <= kOracleTol, "planted coherence differs from all-pairs oracle");
  c.expect(got && *got > 0.5, "planted coherence not above 0.5");

  HashedTokenProvider p;
  OntologyGraph same;
  EmbeddingStore store;
  std::vector<NodeId> ids;
  for (const char* t : {"one", "two", "three"}) {
    ids.push_back(same.add_expression(t, "hi", ann(), prov()));
    store.register_embedding(same, ids.back(), p.embed("shared words"), p.id());
  }
  const auto c1 = same.add_concept("C1", Framework::CULTURAL, "first");
  const auto c2 = same.add_concept("C2", Framework::CULTURAL, "second");
  accept(same, ids[0], c1, EdgeType::ExpressionConcept);
  accept(same, ids[1], c1, EdgeType::ExpressionConcept);
  c.expect(!semantic_coherence(same, store, p.id()), "single concept should be undefined");
  accept(same, ids[2], c2, EdgeType::ExpressionConcept);
  const auto degenerate = semantic_coherence(same, store, p.id());
  c.expect(degenerate && std::abs(*degenerate) <= kOracleTol, "identical vectors should give 0.0");

  return report("connectivity-coherence-oracles", c,
                "3-node and chain fixtures match, planted coherence " + (got ? fmt(*got) : std::string("undefined")) +
                    " vs oracle " + (want ? fmt(*want) : std::string("undefined")));
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<bool()>>> criteria{
      {"kappa-oracle-equivalence", kappa_oracle_equivalence},
      {"state-machine-safety", state_machine_safety},
      {"planted-similarity-recall", planted_recall},
      {"threshold-monotonicity", threshold_monotonicity},
      {"active-learning-lift", active_learning_lift},
      {"combined-confidence-contract", combined_confidence_contract},
      {"explainability-completeness", explainability_completeness},
      {"round-trip-integrity", round_trip_integrity},
      {"connectivity-coherence-oracles", connectivity_coherence_oracles},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    bool ok = false;
    try {
      ok = run();
    } catch (const std::exception& e) {
      std::cout << "FAIL " << name << ": uncaught " << e.what() << "\n";
    }
    if (!ok) ++failed;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
