#pragma once
// Human-in-the-loop edge lifecycle: uncertainty-prioritized queue, grouped
// batches, three-role decision aggregation, adjudication and the
// threshold feedback controller.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "clpde/graph.hpp"
#include "clpde/json_io.hpp"
#include "clpde/types.hpp"

namespace clpde {

struct WorkflowConfig {
  double alpha = 0.5;  // weight of the model estimate in combined confidence
  std::set<Role> required_roles{Role::linguistic, Role::clinical, Role::cultural};
  double tau = 0.70;  // proposal threshold shared with the alignment engine
  double eta = 0.1;
  double target_reject_rate = 0.2;
  double tau_min = 0.5;
  double tau_max = 0.95;
  std::uint32_t adjudication_rounds = 1;  // rounds required before parallel retention
  std::size_t feedback_window = 50;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

void to_json(Json& j, const WorkflowConfig& v);
void from_json(const Json& j, WorkflowConfig& v);

// 1 - |2c - 1|: maximal at 0.5, zero at 0 and 1.
double uncertainty(double confidence);

// alpha * model + (1 - alpha) * accepts / (accepts + rejects); modify votes
// count as neither. Without accept/reject votes the model confidence stands.
double combined_confidence(double model_confidence, std::span<const ValidationDecision> decisions,
                           double alpha);

// Proportional controller: tau + eta * (reject_rate - target), clamped to
// [tau_min, tau_max]. Windows without Accepted/Rejected outcomes leave tau
// unchanged; an empty window is a validation error.
double update_thresholds(std::span<const EdgeStatus> window, const WorkflowConfig& config);

struct QueueItem {
  EdgeId edge_id;
  double priority = 0.0;
  std::string batch_key;
  Timestamp enqueued_at{};

  bool operator==(const QueueItem&) const = default;
};

void to_json(Json& j, const QueueItem& v);

enum class AdjudicationOutcome { consensus_accept, consensus_reject, retain_parallel };
std::string_view to_string(AdjudicationOutcome v);
AdjudicationOutcome adjudication_outcome_from_string(std::string_view s);

struct DecisionOutcome {
  Edge edge;
  std::optional<Edge> revision;  // set when a modify verdict superseded the edge
};

// Grouping key for batch validation: target concept for concept mappings,
// language pair for expression-expression links.
std::string batch_key(const OntologyGraph& graph, const Edge& edge);

class ValidationWorkflow {
 public:
  explicit ValidationWorkflow(WorkflowConfig config = {});

  const WorkflowConfig& config() const { return config_; }

  // Proposed -> UnderValidation, priority = uncertainty(model confidence).
  QueueItem enqueue(OntologyGraph& graph, const EdgeId& edge_id, Timestamp now);

  // Takes over an edge that entered UnderValidation or Adjudication
  // elsewhere (graph import).
  void adopt(const OntologyGraph& graph, const EdgeId& edge_id, Timestamp now);

  // Up to batch_size items sharing the batch key of the highest-priority
  // item still awaiting this role; ordered by priority, then edge id.
  std::vector<QueueItem> next_batch(const OntologyGraph& graph, Role role,
                                    std::size_t batch_size) const;

  DecisionOutcome submit_decision(OntologyGraph& graph, const ValidationDecision& decision);

  // `parallel_edges` lists the competing edges besides `edge_id`; reasons
  // align with [edge_id, parallel_edges...].
  std::vector<Edge> resolve_adjudication(OntologyGraph& graph, const EdgeId& edge_id,
                                         AdjudicationOutcome outcome,
                                         const std::vector<EdgeId>& parallel_edges = {},
                                         const std::vector<std::string>& reasons = {},
                                         const std::string& note = {});

  // Applies the feedback controller and stores the new tau.
  double apply_threshold_update(std::span<const EdgeStatus> window);

  std::vector<ValidationDecision> decisions(const EdgeId& edge_id) const;
  const std::map<EdgeId, QueueItem>& queue() const { return queue_; }
  std::vector<EdgeId> pending_adjudications(const OntologyGraph& graph) const;
  std::uint32_t adjudication_round(const EdgeId& edge_id) const;

 private:
  void refresh_confidence(OntologyGraph& graph, const EdgeId& edge_id) const;
  bool all_roles_decided(const EdgeId& edge_id, std::optional<std::uint32_t> round) const;

  struct Recorded {
    ValidationDecision decision;
    std::uint32_t round = 0;
  };

  WorkflowConfig config_;
  std::map<EdgeId, QueueItem> queue_;
  std::map<EdgeId, std::map<std::string, Recorded>> decisions_;  // by validator id
  std::map<EdgeId, std::uint32_t> rounds_;
};

}  // namespace clpde
