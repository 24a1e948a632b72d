#include "clpde/metrics.hpp"

#include <algorithm>
#include <deque>
#include <random>

#include "clpde/error.hpp"

namespace clpde {

namespace {

constexpr EdgeType kEdgeTypes[] = {EdgeType::IntraLingual, EdgeType::CrossLingual,
                                   EdgeType::ExpressionConcept};
constexpr EdgeStatus kEdgeStatuses[] = {
    EdgeStatus::Proposed,   EdgeStatus::UnderValidation, EdgeStatus::Accepted,
    EdgeStatus::Rejected,   EdgeStatus::Superseded,      EdgeStatus::Adjudication,
    EdgeStatus::ParallelRetained};

bool live(const Edge& e) {
  return e.status != EdgeStatus::Rejected && e.status != EdgeStatus::Superseded;
}

using Adjacency = std::map<NodeId, std::vector<NodeId>>;

Adjacency undirected(const OntologyGraph& graph, bool (*keep)(const Edge&)) {
  Adjacency adj;
  for (const auto& [id, _] : graph.expressions()) adj[id];
  for (const auto& [id, _] : graph.concepts()) adj[id];
  for (const auto& [_, e] : graph.edges()) {
    if (!keep(e)) continue;
    adj[e.src].push_back(e.dst);
    adj[e.dst].push_back(e.src);
  }
  return adj;
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

void to_json(Json& j, const GraphMetrics& v) {
  j = Json{{"node_counts", v.node_counts},
           {"edge_counts_by_type", v.edge_counts_by_type},
           {"edge_counts_by_status", v.edge_counts_by_status},
           {"weakly_connected_components", v.weakly_connected_components},
           {"mean_degree", v.mean_degree},
           {"isolated_expression_ratio", v.isolated_expression_ratio},
           {"concept_coverage", v.concept_coverage}};
}

GraphMetrics connectivity_metrics(const OntologyGraph& graph) {
  GraphMetrics m;
  std::size_t provisional = 0;
  for (const auto& [_, e] : graph.expressions()) {
    if (e.status == NodeStatus::provisional) ++provisional;
  }
  m.node_counts = {{"expression", graph.expressions().size()},
                   {"provisional", provisional},
                   {"concept", graph.concepts().size()}};
  for (auto t : kEdgeTypes) m.edge_counts_by_type[std::string(to_string(t))] = 0;
  for (auto s : kEdgeStatuses) m.edge_counts_by_status[std::string(to_string(s))] = 0;
  for (const auto& [_, e] : graph.edges()) {
    ++m.edge_counts_by_type[std::string(to_string(e.edge_type))];
    ++m.edge_counts_by_status[std::string(to_string(e.status))];
  }

  const Adjacency adj = undirected(graph, live);
  const std::size_t n = adj.size();
  if (n == 0) return m;

  std::size_t degree_sum = 0;
  for (const auto& [_, nbrs] : adj) degree_sum += nbrs.size();
  m.mean_degree = static_cast<double>(degree_sum) / static_cast<double>(n);

  std::set<NodeId> seen;
  for (const auto& [start, _] : adj) {
    if (seen.count(start)) continue;
    ++m.weakly_connected_components;
    std::deque<NodeId> todo{start};
    seen.insert(start);
    while (!todo.empty()) {
      const NodeId cur = todo.front();
      todo.pop_front();
      for (const auto& nb : adj.at(cur)) {
        if (seen.insert(nb).second) todo.push_back(nb);
      }
    }
  }

  const std::size_t expressions = graph.expressions().size();
  if (expressions > 0) {
    std::size_t isolated = 0;
    for (const auto& [id, _] : graph.expressions()) {
      if (adj.at(id).empty()) ++isolated;
    }
    m.isolated_expression_ratio = static_cast<double>(isolated) / static_cast<double>(expressions);

    // Multi-source search from every concept over Accepted edges.
    const Adjacency accepted =
        undirected(graph, [](const Edge& e) { return e.status == EdgeStatus::Accepted; });
    std::set<NodeId> reached;
    std::deque<NodeId> todo;
    for (const auto& [id, _] : graph.concepts()) {
      reached.insert(id);
      todo.push_back(id);
    }
    while (!todo.empty()) {
      const NodeId cur = todo.front();
      todo.pop_front();
      for (const auto& nb : accepted.at(cur)) {
        if (reached.insert(nb).second) todo.push_back(nb);
      }
    }
    std::size_t covered = 0;
    for (const auto& [id, _] : graph.expressions()) {
      if (reached.count(id)) ++covered;
    }
    m.concept_coverage = static_cast<double>(covered) / static_cast<double>(expressions);
  }
  return m;
}

std::optional<double> semantic_coherence(const OntologyGraph& graph, const EmbeddingStore& store,
                                         const std::string& provider_id) {
  std::map<NodeId, std::vector<NodeId>> groups;  // concept -> expressions
  for (const auto& [_, e] : graph.edges()) {
    if (e.edge_type == EdgeType::ExpressionConcept && e.status == EdgeStatus::Accepted) {
      groups[e.dst].push_back(e.src);
    }
  }
  for (auto& [_, members] : groups) {
    std::sort(members.begin(), members.end());
    members.erase(std::unique(members.begin(), members.end()), members.end());
  }
  const bool any_pair = std::any_of(groups.begin(), groups.end(),
                                    [](const auto& kv) { return kv.second.size() >= 2; });
  if (!any_pair || groups.size() < 2) return std::nullopt;

  auto vec = [&](const NodeId& id) -> const Vector& {
    const Vector* v = store.find(provider_id, id);
    if (!v) throw ValidationError("no '" + provider_id + "' embedding for " + id);
    return *v;
  };

  double intra_sum = 0.0, inter_sum = 0.0;
  std::size_t intra_n = 0, inter_n = 0;
  for (const auto& [_, members] : groups) {
    for (std::size_t i = 0; i < members.size(); ++i) {
      for (std::size_t j = i + 1; j < members.size(); ++j) {
        intra_sum += cosine(vec(members[i]), vec(members[j]));
        ++intra_n;
      }
    }
  }
  for (auto a = groups.begin(); a != groups.end(); ++a) {
    for (auto b = std::next(a); b != groups.end(); ++b) {
      for (const auto& x : a->second) {
        for (const auto& y : b->second) {
          if (x == y) continue;
          inter_sum += cosine(vec(x), vec(y));
          ++inter_n;
        }
      }
    }
  }
  if (intra_n == 0 || inter_n == 0) return std::nullopt;
  return intra_sum / static_cast<double>(intra_n) - inter_sum / static_cast<double>(inter_n);
}

std::string_view to_string(Policy p) { return p == Policy::active ? "active" : "random"; }

Policy policy_from_string(std::string_view s) {
  if (s == "active") return Policy::active;
  if (s == "random") return Policy::random;
  throw ValidationError("unknown policy '" + std::string(s) + "' (expected active or random)");
}

void SimulationConfig::validate() const {
  if (!(validator_accuracy >= 0.0 && validator_accuracy <= 1.0)) {
    throw ValidationError("validator_accuracy must lie in [0,1]");
  }
  if (target_f1 && !(*target_f1 >= 0.0 && *target_f1 <= 1.0)) {
    throw ValidationError("target_f1 must lie in [0,1]");
  }
  if (!(default_accept_score >= 0.0 && default_accept_score <= 1.0)) {
    throw ValidationError("default_accept_score must lie in [0,1]");
  }
}

void to_json(Json& j, const SimulationConfig& v) {
  j = Json{{"seed", v.seed},
           {"true_edge_set", v.true_edge_set},
           {"validator_accuracy", v.validator_accuracy},
           {"policy", std::string(to_string(v.policy))},
           {"target_f1", v.target_f1 ? Json(*v.target_f1) : Json(nullptr)},
           {"default_accept_score", v.default_accept_score}};
}

void from_json(const Json& j, SimulationConfig& v) {
  v = SimulationConfig{};
  if (j.contains("seed")) v.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("true_edge_set")) v.true_edge_set = j.at("true_edge_set").get<std::set<std::string>>();
  if (j.contains("validator_accuracy")) v.validator_accuracy = j.at("validator_accuracy").get<double>();
  if (j.contains("policy")) v.policy = policy_from_string(j.at("policy").get<std::string>());
  if (j.contains("target_f1")) {
    v.target_f1 = j.at("target_f1").is_null() ? std::nullopt
                                               : std::optional<double>(j.at("target_f1").get<double>());
  }
  if (j.contains("default_accept_score")) {
    v.default_accept_score = j.at("default_accept_score").get<double>();
  }
  v.validate();
}

void to_json(Json& j, const EfficiencyReport& v) {
  j = Json{{"decisions_used", v.decisions_used},
           {"reviewed_edges", v.reviewed_edges},
           {"accepted_edges", v.accepted_edges},
           {"accepted_edge_precision", v.accepted_edge_precision},
           {"accepted_edge_recall", v.accepted_edge_recall},
           {"f1", v.f1},
           {"decisions_per_accepted_edge", v.decisions_per_accepted_edge},
           {"target_reached", v.target_reached}};
}

PrecisionRecall precision_recall(const std::set<std::string>& kept,
                                 const std::set<std::string>& truth) {
  std::size_t hits = 0;
  for (const auto& k : kept) hits += truth.count(k);
  PrecisionRecall pr;
  pr.precision = kept.empty() ? 1.0 : static_cast<double>(hits) / static_cast<double>(kept.size());
  pr.recall = truth.empty() ? 1.0 : static_cast<double>(hits) / static_cast<double>(truth.size());
  pr.f1 = pr.precision + pr.recall == 0.0
              ? 0.0
              : 2.0 * pr.precision * pr.recall / (pr.precision + pr.recall);
  return pr;
}

SimulationRun simulate_validation(const SimulationConfig& config,
                                  const std::vector<CandidateEdge>& candidates,
                                  const OntologyGraph& graph, WorkflowConfig workflow_config,
                                  const SettledHook& on_settled) {
  config.validate();
  SimulationRun run{EfficiencyReport{}, graph, ValidationWorkflow(workflow_config)};
  if (candidates.empty()) return run;

  std::set<std::string> keys;
  for (const auto& c : candidates) {
    if (!keys.insert(candidate_key(c)).second) {
      throw ValidationError("duplicate candidate " + candidate_key(c));
    }
  }
  for (const auto& t : config.true_edge_set) {
    if (!keys.count(t)) throw ValidationError("true edge " + t + " is not a candidate");
  }

  OntologyGraph& g = run.graph;
  ValidationWorkflow& wf = run.workflow;
  const Timestamp now{};
  Provenance prov;
  prov.source_kind = SourceKind::synthetic;
  prov.source_id = "simulation:" + std::to_string(config.seed);
  prov.anonymized = true;

  struct Tracked {
    std::string key;
    double score;
    bool reviewed = false;
  };
  std::map<EdgeId, Tracked> tracked;
  for (const auto& c : candidates) {
    const Edge e = g.add_edge(c.src, c.dst, c.edge_type, c.score, c.rationale, prov);
    if (e.status != EdgeStatus::Proposed) {
      throw ValidationError("candidate " + candidate_key(c) + " collides with existing edge " + e.id);
    }
    wf.enqueue(g, e.id, now);
    tracked[e.id] = {candidate_key(c), c.score};
  }

  std::mt19937_64 rng(config.seed);
  std::vector<EdgeId> order;
  if (config.policy == Policy::random) {
    for (const auto& [id, _] : tracked) order.push_back(id);
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng() % i)]);
    }
  }

  auto evaluate = [&]() {
    std::set<std::string> kept;
    for (const auto& [id, t] : tracked) {
      const EdgeStatus s = g.edge(id).status;
      const bool keep = t.reviewed ? (s == EdgeStatus::Accepted || s == EdgeStatus::ParallelRetained)
                                   : t.score >= config.default_accept_score;
      if (keep) kept.insert(t.key);
    }
    return precision_recall(kept, config.true_edge_set);
  };

  EfficiencyReport& report = run.report;
  std::size_t cursor = 0;
  PrecisionRecall pr = evaluate();
  while (!(config.target_f1 && pr.f1 >= *config.target_f1)) {
    EdgeId next;
    if (config.policy == Policy::active) {
      const auto batch = wf.next_batch(g, *wf.config().required_roles.begin(), 1);
      if (batch.empty()) break;
      next = batch.front().edge_id;
    } else {
      if (cursor == order.size()) break;
      next = order[cursor++];
    }
    Tracked& t = tracked.at(next);
    const bool truth = config.true_edge_set.count(t.key) != 0;
    std::size_t accepts = 0, rejects = 0;
    for (Role role : wf.config().required_roles) {
      const bool correct = uniform01(rng) < config.validator_accuracy;
      ValidationDecision d;
      d.edge_id = next;
      d.validator_id = "sim-" + std::string(to_string(role));
      d.role = role;
      d.verdict = truth == correct ? Verdict::accept : Verdict::reject;
      d.decided_at = now;
      (d.verdict == Verdict::accept ? accepts : rejects)++;
      wf.submit_decision(g, d);
      ++report.decisions_used;
    }
    if (g.edge(next).status == EdgeStatus::Adjudication) {
      wf.resolve_adjudication(g, next,
                              accepts > rejects ? AdjudicationOutcome::consensus_accept
                                                : AdjudicationOutcome::consensus_reject,
                              {}, {}, "simulated majority");
    }
    t.reviewed = true;
    ++report.reviewed_edges;
    if (g.edge(next).status == EdgeStatus::Accepted && on_settled) on_settled(g, next);
    pr = evaluate();
  }

  for (const auto& [id, _] : tracked) {
    if (g.edge(id).status == EdgeStatus::Accepted) ++report.accepted_edges;
  }
  report.accepted_edge_precision = pr.precision;
  report.accepted_edge_recall = pr.recall;
  report.f1 = pr.f1;
  report.target_reached = config.target_f1 && pr.f1 >= *config.target_f1;
  report.decisions_per_accepted_edge =
      report.accepted_edges == 0
          ? 0.0
          : static_cast<double>(report.decisions_used) / static_cast<double>(report.accepted_edges);
  return run;
}

}  // namespace clpde
