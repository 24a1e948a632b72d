#pragma once
// Domain model shared by every module: nodes, edges, annotations, decisions
// and explanation bundles.

#include <chrono>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace clpde {

using NodeId = std::string;
using EdgeId = std::string;
using Timestamp = std::chrono::sys_seconds;

enum class NodeStatus { active, provisional };
enum class Framework { ICD11, DSM5, CULTURAL };
enum class EdgeType { IntraLingual, CrossLingual, ExpressionConcept };
enum class EdgeStatus {
  Proposed,
  UnderValidation,
  Accepted,
  Rejected,
  Superseded,
  Adjudication,
  ParallelRetained,
};
enum class SourceKind {
  counseling_transcript,
  helpline,
  forum,
  community_health,
  expert_interview,
  synthetic,
};
enum class SemanticCategory { emotion, somatic_complaint, behavior, other };
enum class CulturalMarker { idiomatic, metaphorical, belief_system_reference, code_mixed };
enum class Severity { mild, severe, unknown };
enum class Temporal { acute, chronic, unknown };
enum class Role { linguistic, clinical, cultural };
enum class Verdict { accept, reject, modify };
enum class Perspective { linguistic, cultural, clinical };

std::string_view to_string(NodeStatus v);
std::string_view to_string(Framework v);
std::string_view to_string(EdgeType v);
std::string_view to_string(EdgeStatus v);
std::string_view to_string(SourceKind v);
std::string_view to_string(SemanticCategory v);
std::string_view to_string(CulturalMarker v);
std::string_view to_string(Severity v);
std::string_view to_string(Temporal v);
std::string_view to_string(Role v);
std::string_view to_string(Verdict v);
std::string_view to_string(Perspective v);

// Parses the canonical name of an enum value; throws ValidationError naming
// the enum on unknown input.
template <typename Enum>
Enum enum_from_string(std::string_view text);

// Terminal from the workflow's point of view: no further decisions apply.
bool is_terminal(EdgeStatus s);

// The lifecycle table. Creation (no prior status) may only yield Proposed.
bool is_legal_transition(std::optional<EdgeStatus> from, EdgeStatus to);

struct Provenance {
  SourceKind source_kind = SourceKind::synthetic;
  std::string source_id;
  Timestamp collected_at{};
  bool anonymized = true;

  bool operator==(const Provenance&) const = default;
};

struct AnnotationRecord {
  SemanticCategory semantic_category = SemanticCategory::other;
  std::set<CulturalMarker> cultural_markers;
  Severity severity = Severity::unknown;
  Temporal temporal = Temporal::unknown;
  double annotator_confidence = 1.0;
  std::string annotator_id;

  bool operator==(const AnnotationRecord&) const = default;
};

// Returns every invariant violation of an annotation (empty when valid).
std::vector<std::string> annotation_violations(const AnnotationRecord& a);

struct ExpressionNode {
  NodeId id;
  std::string surface_text;
  std::string language;
  std::optional<std::string> gloss;
  std::optional<AnnotationRecord> annotation;
  Provenance provenance;
  NodeStatus status = NodeStatus::active;

  bool operator==(const ExpressionNode&) const = default;
};

struct ConceptNode {
  NodeId id;
  std::string code;
  Framework framework = Framework::ICD11;
  std::string label;
  std::optional<std::string> description;

  bool operator==(const ConceptNode&) const = default;
};

using Node = std::variant<ExpressionNode, ConceptNode>;

// The strongest competing candidate from the proposal that produced an edge.
struct Alternative {
  NodeId dst;
  double score = 0.0;
  std::string rationale;

  bool operator==(const Alternative&) const = default;
};

struct Contrastive {
  NodeId chosen_dst;
  NodeId runner_up_dst;
  double score_delta = 0.0;
  std::string text;

  bool operator==(const Contrastive&) const = default;
};

struct TokenScore {
  std::string token;
  double score = 0.0;

  bool operator==(const TokenScore&) const = default;
};

struct SimilarExample {
  EdgeId edge_id;
  double similarity = 0.0;

  bool operator==(const SimilarExample&) const = default;
};

struct ExplanationBundle {
  EdgeId edge_id;
  std::string linguistic;
  std::string cultural;
  std::string clinical;
  std::vector<TokenScore> token_contributions;
  std::vector<std::string> matched_rules;
  std::vector<SimilarExample> nearest_examples;
  std::optional<Contrastive> contrastive;
  double confidence = 0.0;
  std::vector<std::string> provenance_refs;
  bool incomplete = false;
  std::uint32_t version = 1;

  bool operator==(const ExplanationBundle&) const = default;
};

struct Edge {
  EdgeId id;
  NodeId src;
  NodeId dst;
  EdgeType edge_type = EdgeType::IntraLingual;
  EdgeStatus status = EdgeStatus::Proposed;
  double model_confidence = 0.0;
  std::optional<double> validator_agreement;
  std::optional<double> combined_confidence;
  std::string rationale;
  Provenance provenance;
  std::optional<std::string> parallel_group;
  std::optional<EdgeId> revision_of;
  std::optional<std::string> parallel_reason;
  std::optional<std::string> adjudication_note;
  std::optional<Alternative> runner_up;
  std::optional<ExplanationBundle> explanation;

  bool operator==(const Edge&) const = default;
};

struct CandidateEdge {
  NodeId src;
  NodeId dst;
  EdgeType edge_type = EdgeType::IntraLingual;
  double score = 0.0;
  std::string rationale;
  std::string proposer_id;

  bool operator==(const CandidateEdge&) const = default;
};

// Stable identifier of a candidate, used by ground-truth files.
std::string candidate_key(const CandidateEdge& c);
std::string candidate_key(const NodeId& src, const NodeId& dst, EdgeType type);

struct Modification {
  std::optional<NodeId> new_dst;
  std::optional<EdgeType> new_edge_type;

  bool empty() const { return !new_dst && !new_edge_type; }
  bool operator==(const Modification&) const = default;
};

struct ValidationDecision {
  EdgeId edge_id;
  std::string validator_id;
  Role role = Role::linguistic;
  Verdict verdict = Verdict::accept;
  std::optional<Modification> modification;
  std::string comment;
  Timestamp decided_at{};

  bool operator==(const ValidationDecision&) const = default;
};

struct StatusTransition {
  EdgeId edge_id;
  std::optional<EdgeStatus> from;
  EdgeStatus to = EdgeStatus::Proposed;

  bool operator==(const StatusTransition&) const = default;
};

}  // namespace clpde
