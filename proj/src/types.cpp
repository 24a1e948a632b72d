#include "clpde/types.hpp"

#include <array>
#include <span>

#include "clpde/error.hpp"

namespace clpde {

namespace {

template <typename Enum>
struct EnumNames;

#define CLPDE_ENUM_NAMES(Enum, label, ...)                              \
  template <>                                                           \
  struct EnumNames<Enum> {                                              \
    static constexpr std::string_view name = label;                     \
    static constexpr std::array<std::string_view,                       \
                                std::size({__VA_ARGS__})> values = {__VA_ARGS__}; \
  };

CLPDE_ENUM_NAMES(NodeStatus, "node status", "active", "provisional")
CLPDE_ENUM_NAMES(Framework, "framework", "ICD11", "DSM5", "CULTURAL")
CLPDE_ENUM_NAMES(EdgeType, "edge type", "IntraLingual", "CrossLingual", "ExpressionConcept")
CLPDE_ENUM_NAMES(EdgeStatus, "edge status", "Proposed", "UnderValidation", "Accepted",
                 "Rejected", "Superseded", "Adjudication", "ParallelRetained")
CLPDE_ENUM_NAMES(SourceKind, "source kind", "counseling_transcript", "helpline", "forum",
                 "community_health", "expert_interview", "synthetic")
CLPDE_ENUM_NAMES(SemanticCategory, "semantic category", "emotion", "somatic_complaint",
                 "behavior", "other")
CLPDE_ENUM_NAMES(CulturalMarker, "cultural marker", "idiomatic", "metaphorical",
                 "belief_system_reference", "code_mixed")
CLPDE_ENUM_NAMES(Severity, "severity", "mild", "severe", "unknown")
CLPDE_ENUM_NAMES(Temporal, "temporal profile", "acute", "chronic", "unknown")
CLPDE_ENUM_NAMES(Role, "role", "linguistic", "clinical", "cultural")
CLPDE_ENUM_NAMES(Verdict, "verdict", "accept", "reject", "modify")
CLPDE_ENUM_NAMES(Perspective, "perspective", "linguistic", "cultural", "clinical")

#undef CLPDE_ENUM_NAMES

template <typename Enum>
std::string_view name_of(Enum v) {
  return EnumNames<Enum>::values.at(static_cast<std::size_t>(v));
}

}  // namespace

template <typename Enum>
Enum enum_from_string(std::string_view text) {
  const auto& values = EnumNames<Enum>::values;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] == text) return static_cast<Enum>(i);
  }
  throw ValidationError("unknown " + std::string(EnumNames<Enum>::name) + " '" +
                        std::string(text) + "'");
}

template NodeStatus enum_from_string<NodeStatus>(std::string_view);
template Framework enum_from_string<Framework>(std::string_view);
template EdgeType enum_from_string<EdgeType>(std::string_view);
template EdgeStatus enum_from_string<EdgeStatus>(std::string_view);
template SourceKind enum_from_string<SourceKind>(std::string_view);
template SemanticCategory enum_from_string<SemanticCategory>(std::string_view);
template CulturalMarker enum_from_string<CulturalMarker>(std::string_view);
template Severity enum_from_string<Severity>(std::string_view);
template Temporal enum_from_string<Temporal>(std::string_view);
template Role enum_from_string<Role>(std::string_view);
template Verdict enum_from_string<Verdict>(std::string_view);
template Perspective enum_from_string<Perspective>(std::string_view);

std::string_view to_string(NodeStatus v) { return name_of(v); }
std::string_view to_string(Framework v) { return name_of(v); }
std::string_view to_string(EdgeType v) { return name_of(v); }
std::string_view to_string(EdgeStatus v) { return name_of(v); }
std::string_view to_string(SourceKind v) { return name_of(v); }
std::string_view to_string(SemanticCategory v) { return name_of(v); }
std::string_view to_string(CulturalMarker v) { return name_of(v); }
std::string_view to_string(Severity v) { return name_of(v); }
std::string_view to_string(Temporal v) { return name_of(v); }
std::string_view to_string(Role v) { return name_of(v); }
std::string_view to_string(Verdict v) { return name_of(v); }
std::string_view to_string(Perspective v) { return name_of(v); }

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::validation: return "validation";
    case ErrorKind::policy: return "policy";
    case ErrorKind::conflict: return "conflict";
    case ErrorKind::type: return "type";
    case ErrorKind::not_found: return "not_found";
    case ErrorKind::state: return "state";
    case ErrorKind::parse: return "parse";
    case ErrorKind::io: return "io";
    case ErrorKind::proposer: return "proposer";
    case ErrorKind::config: return "config";
  }
  return "unknown";
}

bool is_terminal(EdgeStatus s) {
  switch (s) {
    case EdgeStatus::Accepted:
    case EdgeStatus::Rejected:
    case EdgeStatus::Superseded:
    case EdgeStatus::ParallelRetained:
      return true;
    default:
      return false;
  }
}

bool is_legal_transition(std::optional<EdgeStatus> from, EdgeStatus to) {
  using S = EdgeStatus;
  if (!from) return to == S::Proposed;
  switch (*from) {
    case S::Proposed:
      return to == S::UnderValidation;
    case S::UnderValidation:
      return to == S::Accepted || to == S::Rejected || to == S::Superseded ||
             to == S::Adjudication;
    case S::Adjudication:
      return to == S::Accepted || to == S::Rejected || to == S::ParallelRetained;
    default:
      return false;
  }
}

std::vector<std::string> annotation_violations(const AnnotationRecord& a) {
  std::vector<std::string> out;
  if (!(a.annotator_confidence >= 0.0 && a.annotator_confidence <= 1.0)) {
    out.push_back("annotator_confidence " + std::to_string(a.annotator_confidence) +
                  " outside [0,1]");
  }
  // "other" is the category's uninformative value, like unknown elsewhere.
  const bool informative = a.semantic_category != SemanticCategory::other ||
                           !a.cultural_markers.empty() || a.severity != Severity::unknown ||
                           a.temporal != Temporal::unknown;
  if (!informative) {
    out.push_back("annotation carries no information beyond annotator_id");
  }
  return out;
}

std::string candidate_key(const NodeId& src, const NodeId& dst, EdgeType type) {
  return src + "|" + dst + "|" + std::string(to_string(type));
}

std::string candidate_key(const CandidateEdge& c) {
  return candidate_key(c.src, c.dst, c.edge_type);
}

}  // namespace clpde
