#pragma once
// JSON mapping of the domain model. Field names are the snake_case names of
// the domain types; optional fields serialize as null.

#include <json.hpp>

#include "clpde/types.hpp"

namespace clpde {

using Json = nlohmann::json;

void to_json(Json& j, const Provenance& v);
void from_json(const Json& j, Provenance& v);
void to_json(Json& j, const AnnotationRecord& v);
void from_json(const Json& j, AnnotationRecord& v);
void to_json(Json& j, const ExpressionNode& v);
void from_json(const Json& j, ExpressionNode& v);
void to_json(Json& j, const ConceptNode& v);
void from_json(const Json& j, ConceptNode& v);
void to_json(Json& j, const Alternative& v);
void from_json(const Json& j, Alternative& v);
void to_json(Json& j, const Contrastive& v);
void from_json(const Json& j, Contrastive& v);
void to_json(Json& j, const ExplanationBundle& v);
void from_json(const Json& j, ExplanationBundle& v);
void to_json(Json& j, const Edge& v);
void from_json(const Json& j, Edge& v);
void to_json(Json& j, const CandidateEdge& v);
void from_json(const Json& j, CandidateEdge& v);
void to_json(Json& j, const Modification& v);
void from_json(const Json& j, Modification& v);
void to_json(Json& j, const ValidationDecision& v);
void from_json(const Json& j, ValidationDecision& v);
void to_json(Json& j, const StatusTransition& v);
void from_json(const Json& j, StatusTransition& v);

// Serialized with the enum's canonical name.
template <typename Enum>
Json enum_json(Enum v) {
  return std::string(to_string(v));
}

}  // namespace clpde
