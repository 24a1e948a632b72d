#pragma once
// Intrinsic graph metrics, semantic coherence and the seeded validator
// simulator used to compare review policies.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "clpde/alignment.hpp"
#include "clpde/graph.hpp"
#include "clpde/json_io.hpp"
#include "clpde/workflow.hpp"

namespace clpde {

struct GraphMetrics {
  std::map<std::string, std::size_t> node_counts;            // expression, provisional, concept
  std::map<std::string, std::size_t> edge_counts_by_type;    // every EdgeType present
  std::map<std::string, std::size_t> edge_counts_by_status;  // every EdgeStatus present
  std::size_t weakly_connected_components = 0;
  double mean_degree = 0.0;
  double isolated_expression_ratio = 0.0;
  double concept_coverage = 0.0;

  bool operator==(const GraphMetrics&) const = default;
};

void to_json(Json& j, const GraphMetrics& v);

// Structure over the undirected view of edges that are neither Rejected nor
// Superseded. Coverage counts expressions that reach a concept through
// Accepted edges only.
GraphMetrics connectivity_metrics(const OntologyGraph& graph);

// Pooled mean pairwise cosine among expressions sharing an Accepted concept,
// minus the pooled mean across expressions of different concepts. nullopt
// when no concept has two linked expressions or only one concept is linked.
std::optional<double> semantic_coherence(const OntologyGraph& graph, const EmbeddingStore& store,
                                         const std::string& provider_id);

enum class Policy { active, random };
std::string_view to_string(Policy p);
Policy policy_from_string(std::string_view s);

struct SimulationConfig {
  std::uint64_t seed = 1;
  std::set<std::string> true_edge_set;  // candidate keys
  double validator_accuracy = 1.0;
  Policy policy = Policy::active;
  std::optional<double> target_f1 = 0.9;  // nullopt reviews every candidate
  // Unreviewed candidates scoring at least this count as kept when the
  // stop criterion is evaluated.
  double default_accept_score = 0.5;

  void validate() const;
};

void to_json(Json& j, const SimulationConfig& v);
void from_json(const Json& j, SimulationConfig& v);

struct EfficiencyReport {
  std::size_t decisions_used = 0;
  std::size_t reviewed_edges = 0;
  std::size_t accepted_edges = 0;
  double accepted_edge_precision = 0.0;
  double accepted_edge_recall = 0.0;
  double f1 = 0.0;
  double decisions_per_accepted_edge = 0.0;
  bool target_reached = false;

  bool operator==(const EfficiencyReport&) const = default;
};

void to_json(Json& j, const EfficiencyReport& v);

struct PrecisionRecall {
  double precision = 1.0;
  double recall = 1.0;
  double f1 = 1.0;
};

// Empty kept set gives precision 1 and empty truth gives recall 1.
PrecisionRecall precision_recall(const std::set<std::string>& kept,
                                 const std::set<std::string>& truth);

struct SimulationRun {
  EfficiencyReport report;
  OntologyGraph graph;
  ValidationWorkflow workflow;
};

// Called whenever an edge settles as Accepted or ParallelRetained.
using SettledHook = std::function<void(OntologyGraph&, const EdgeId&)>;

// Materializes the candidates on a copy of `graph`, then drives simulated
// validators through the real workflow in policy order until the stop
// criterion or exhaustion. Conflicts go to adjudication and are resolved by
// majority.
SimulationRun simulate_validation(const SimulationConfig& config,
                                  const std::vector<CandidateEdge>& candidates,
                                  const OntologyGraph& graph, WorkflowConfig workflow = {},
                                  const SettledHook& on_settled = {});

}  // namespace clpde
