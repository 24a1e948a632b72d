#pragma once
// Typed heterogeneous graph of patient expressions, clinical concepts and the
// metadata-carrying edges between them.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "clpde/json_io.hpp"
#include "clpde/types.hpp"

namespace clpde {

struct Neighbor {
  Edge edge;
  Node node;
};

class OntologyGraph {
 public:
  // Idempotent on the normalized (surface_text, language) pair: re-adding
  // returns the existing id. Active nodes require an annotation.
  NodeId add_expression(std::string_view surface_text, std::string_view language,
                        std::optional<AnnotationRecord> annotation, const Provenance& provenance,
                        NodeStatus status = NodeStatus::active,
                        std::optional<std::string> gloss = std::nullopt);

  // Idempotent on (code, framework); a different label for an existing pair
  // is a conflict.
  NodeId add_concept(std::string_view code, Framework framework, std::string_view label,
                     std::optional<std::string> description = std::nullopt);

  // New edges start Proposed. An existing live edge between the same
  // endpoints with the same type is returned instead of a duplicate
  // (symmetric for expression-expression types).
  Edge add_edge(const NodeId& src, const NodeId& dst, EdgeType type, double model_confidence,
                std::string rationale, const Provenance& provenance);

  // Verbatim insertion used by import and event replay. Identical content
  // under an existing id is a no-op; different content is a conflict.
  void restore_expression(const ExpressionNode& node);
  void restore_concept(const ConceptNode& node);
  void restore_edge(const Edge& edge);

  std::vector<Neighbor> neighbors(const NodeId& node,
                                  std::optional<EdgeType> type_filter = std::nullopt,
                                  const std::optional<std::set<EdgeStatus>>& status_filter =
                                      std::nullopt) const;

  // Moves >=2 adjudicated edges sharing one src into a parallel group, one
  // reason per edge. Returns the group id.
  std::string retain_parallel(const std::vector<EdgeId>& edge_ids,
                              const std::vector<std::string>& reasons);

  // Applies a lifecycle transition; illegal transitions throw StateError.
  const Edge& transition(const EdgeId& id, EdgeStatus to);

  // Mutates edge metadata. Identity, endpoints, type and status are fixed.
  const Edge& update_edge(const EdgeId& id, const std::function<void(Edge&)>& mutate);

  // Throws TypeError/NotFoundError when (src, dst) cannot carry `type`.
  void validate_edge_endpoints(const NodeId& src, const NodeId& dst, EdgeType type) const {
    check_edge_endpoints(src, dst, type);
  }

  bool has_node(const NodeId& id) const;
  bool is_expression(const NodeId& id) const { return expressions_.count(id) != 0; }
  bool is_concept(const NodeId& id) const { return concepts_.count(id) != 0; }
  bool has_edge(const EdgeId& id) const { return edges_.count(id) != 0; }

  const ExpressionNode& expression(const NodeId& id) const;
  const ConceptNode& concept_node(const NodeId& id) const;
  const Edge& edge(const EdgeId& id) const;
  Node node(const NodeId& id) const;

  std::optional<NodeId> find_expression(std::string_view surface_text,
                                        std::string_view language) const;
  std::optional<NodeId> find_concept(std::string_view code, Framework framework) const;
  std::optional<NodeId> find_concept_by_code(std::string_view code) const;
  std::optional<EdgeId> find_edge(const NodeId& src, const NodeId& dst, EdgeType type) const;

  const std::map<NodeId, ExpressionNode>& expressions() const { return expressions_; }
  const std::map<NodeId, ConceptNode>& concepts() const { return concepts_; }
  const std::map<EdgeId, Edge>& edges() const { return edges_; }
  std::vector<EdgeId> parallel_group(const std::string& group) const;

  // Every status change since the graph was created, creation included.
  const std::vector<StatusTransition>& transitions() const { return transitions_; }

  // Full-graph scan of edge-type endpoint invariants, referential integrity,
  // confidence ranges and parallel-group consistency.
  std::vector<std::string> integrity_violations() const;

  Json to_document() const;
  std::string export_graph() const;
  static OntologyGraph from_document(const Json& doc);
  static OntologyGraph import_graph(std::string_view document);

 private:
  std::string next_id(std::string_view prefix, std::uint64_t& counter,
                      const std::function<bool(const std::string&)>& taken);
  void check_edge_endpoints(const NodeId& src, const NodeId& dst, EdgeType type) const;
  void check_edge_values(const Edge& e) const;
  void index_edge(const Edge& e);
  static std::string expression_key(std::string_view text, std::string_view language);
  static std::string concept_key(std::string_view code, Framework framework);
  std::string edge_key(const NodeId& src, const NodeId& dst, EdgeType type) const;
  void bump_counter(const std::string& id, std::string_view prefix, std::uint64_t& counter);

  std::map<NodeId, ExpressionNode> expressions_;
  std::map<NodeId, ConceptNode> concepts_;
  std::map<EdgeId, Edge> edges_;
  std::map<std::string, NodeId> expression_index_;
  std::map<std::string, NodeId> concept_index_;
  std::map<std::string, EdgeId> edge_index_;
  std::map<NodeId, std::set<EdgeId>> incident_;
  std::vector<StatusTransition> transitions_;
  std::uint64_t expression_counter_ = 0;
  std::uint64_t concept_counter_ = 0;
  std::uint64_t edge_counter_ = 0;
  std::uint64_t group_counter_ = 0;
};

// Language tags are lowercased; empty tags are rejected.
std::string normalize_language(std::string_view language);

void check_provenance_policy(const Provenance& p);

}  // namespace clpde
