#include "clpde/json_io.hpp"

#include "clpde/text.hpp"

namespace clpde {

namespace {

template <typename Enum>
Enum enum_at(const Json& j, const char* key) {
  return enum_from_string<Enum>(j.at(key).get<std::string>());
}

template <typename T>
std::optional<T> optional_at(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

template <typename T>
Json optional_json(const std::optional<T>& v) {
  if (!v) return nullptr;
  return Json(*v);
}

}  // namespace

void to_json(Json& j, const Provenance& v) {
  j = Json{{"source_kind", enum_json(v.source_kind)},
           {"source_id", v.source_id},
           {"collected_at", text::format_timestamp(v.collected_at)},
           {"anonymized", v.anonymized}};
}

void from_json(const Json& j, Provenance& v) {
  v.source_kind = enum_at<SourceKind>(j, "source_kind");
  v.source_id = j.at("source_id").get<std::string>();
  v.collected_at = text::parse_timestamp(j.at("collected_at").get<std::string>());
  v.anonymized = j.at("anonymized").get<bool>();
}

void to_json(Json& j, const AnnotationRecord& v) {
  Json markers = Json::array();
  for (auto m : v.cultural_markers) markers.push_back(enum_json(m));
  j = Json{{"semantic_category", enum_json(v.semantic_category)},
           {"cultural_markers", std::move(markers)},
           {"severity", enum_json(v.severity)},
           {"temporal", enum_json(v.temporal)},
           {"annotator_confidence", v.annotator_confidence},
           {"annotator_id", v.annotator_id}};
}

void from_json(const Json& j, AnnotationRecord& v) {
  v.semantic_category = enum_at<SemanticCategory>(j, "semantic_category");
  v.cultural_markers.clear();
  for (const auto& m : j.at("cultural_markers")) {
    v.cultural_markers.insert(enum_from_string<CulturalMarker>(m.get<std::string>()));
  }
  v.severity = enum_at<Severity>(j, "severity");
  v.temporal = enum_at<Temporal>(j, "temporal");
  v.annotator_confidence = j.at("annotator_confidence").get<double>();
  v.annotator_id = j.at("annotator_id").get<std::string>();
}

void to_json(Json& j, const ExpressionNode& v) {
  j = Json{{"id", v.id},
           {"surface_text", v.surface_text},
           {"language", v.language},
           {"gloss", optional_json(v.gloss)},
           {"annotation", optional_json(v.annotation)},
           {"provenance", v.provenance},
           {"status", enum_json(v.status)}};
}

void from_json(const Json& j, ExpressionNode& v) {
  v.id = j.at("id").get<std::string>();
  v.surface_text = j.at("surface_text").get<std::string>();
  v.language = j.at("language").get<std::string>();
  v.gloss = optional_at<std::string>(j, "gloss");
  v.annotation = optional_at<AnnotationRecord>(j, "annotation");
  v.provenance = j.at("provenance").get<Provenance>();
  v.status = enum_at<NodeStatus>(j, "status");
}

void to_json(Json& j, const ConceptNode& v) {
  j = Json{{"id", v.id},
           {"code", v.code},
           {"framework", enum_json(v.framework)},
           {"label", v.label},
           {"description", optional_json(v.description)}};
}

void from_json(const Json& j, ConceptNode& v) {
  v.id = j.at("id").get<std::string>();
  v.code = j.at("code").get<std::string>();
  v.framework = enum_at<Framework>(j, "framework");
  v.label = j.at("label").get<std::string>();
  v.description = optional_at<std::string>(j, "description");
}

void to_json(Json& j, const Alternative& v) {
  j = Json{{"dst", v.dst}, {"score", v.score}, {"rationale", v.rationale}};
}

void from_json(const Json& j, Alternative& v) {
  v.dst = j.at("dst").get<std::string>();
  v.score = j.at("score").get<double>();
  v.rationale = j.at("rationale").get<std::string>();
}

void to_json(Json& j, const Contrastive& v) {
  j = Json{{"chosen_dst", v.chosen_dst},
           {"runner_up_dst", v.runner_up_dst},
           {"score_delta", v.score_delta},
           {"text", v.text}};
}

void from_json(const Json& j, Contrastive& v) {
  v.chosen_dst = j.at("chosen_dst").get<std::string>();
  v.runner_up_dst = j.at("runner_up_dst").get<std::string>();
  v.score_delta = j.at("score_delta").get<double>();
  v.text = j.at("text").get<std::string>();
}

void to_json(Json& j, const ExplanationBundle& v) {
  Json tokens = Json::array();
  for (const auto& t : v.token_contributions) tokens.push_back({{"token", t.token}, {"score", t.score}});
  Json examples = Json::array();
  for (const auto& e : v.nearest_examples) {
    examples.push_back({{"edge_id", e.edge_id}, {"similarity", e.similarity}});
  }
  j = Json{{"edge_id", v.edge_id},
           {"linguistic", v.linguistic},
           {"cultural", v.cultural},
           {"clinical", v.clinical},
           {"token_contributions", std::move(tokens)},
           {"matched_rules", v.matched_rules},
           {"nearest_examples", std::move(examples)},
           {"contrastive", optional_json(v.contrastive)},
           {"confidence", v.confidence},
           {"provenance_refs", v.provenance_refs},
           {"incomplete", v.incomplete},
           {"version", v.version}};
}

void from_json(const Json& j, ExplanationBundle& v) {
  v.edge_id = j.at("edge_id").get<std::string>();
  v.linguistic = j.at("linguistic").get<std::string>();
  v.cultural = j.at("cultural").get<std::string>();
  v.clinical = j.at("clinical").get<std::string>();
  v.token_contributions.clear();
  for (const auto& t : j.at("token_contributions")) {
    v.token_contributions.push_back({t.at("token").get<std::string>(), t.at("score").get<double>()});
  }
  v.matched_rules = j.at("matched_rules").get<std::vector<std::string>>();
  v.nearest_examples.clear();
  for (const auto& e : j.at("nearest_examples")) {
    v.nearest_examples.push_back(
        {e.at("edge_id").get<std::string>(), e.at("similarity").get<double>()});
  }
  v.contrastive = optional_at<Contrastive>(j, "contrastive");
  v.confidence = j.at("confidence").get<double>();
  v.provenance_refs = j.at("provenance_refs").get<std::vector<std::string>>();
  v.incomplete = j.at("incomplete").get<bool>();
  v.version = j.at("version").get<std::uint32_t>();
}

void to_json(Json& j, const Edge& v) {
  j = Json{{"id", v.id},
           {"src", v.src},
           {"dst", v.dst},
           {"edge_type", enum_json(v.edge_type)},
           {"status", enum_json(v.status)},
           {"model_confidence", v.model_confidence},
           {"validator_agreement", optional_json(v.validator_agreement)},
           {"combined_confidence", optional_json(v.combined_confidence)},
           {"rationale", v.rationale},
           {"provenance", v.provenance},
           {"parallel_group", optional_json(v.parallel_group)},
           {"revision_of", optional_json(v.revision_of)},
           {"parallel_reason", optional_json(v.parallel_reason)},
           {"adjudication_note", optional_json(v.adjudication_note)},
           {"runner_up", optional_json(v.runner_up)},
           {"explanation", optional_json(v.explanation)}};
}

void from_json(const Json& j, Edge& v) {
  v.id = j.at("id").get<std::string>();
  v.src = j.at("src").get<std::string>();
  v.dst = j.at("dst").get<std::string>();
  v.edge_type = enum_at<EdgeType>(j, "edge_type");
  v.status = enum_at<EdgeStatus>(j, "status");
  v.model_confidence = j.at("model_confidence").get<double>();
  v.validator_agreement = optional_at<double>(j, "validator_agreement");
  v.combined_confidence = optional_at<double>(j, "combined_confidence");
  v.rationale = j.at("rationale").get<std::string>();
  v.provenance = j.at("provenance").get<Provenance>();
  v.parallel_group = optional_at<std::string>(j, "parallel_group");
  v.revision_of = optional_at<std::string>(j, "revision_of");
  v.parallel_reason = optional_at<std::string>(j, "parallel_reason");
  v.adjudication_note = optional_at<std::string>(j, "adjudication_note");
  v.runner_up = optional_at<Alternative>(j, "runner_up");
  v.explanation = optional_at<ExplanationBundle>(j, "explanation");
}

void to_json(Json& j, const CandidateEdge& v) {
  j = Json{{"key", candidate_key(v)},
           {"src", v.src},
           {"dst", v.dst},
           {"edge_type", enum_json(v.edge_type)},
           {"score", v.score},
           {"rationale", v.rationale},
           {"proposer_id", v.proposer_id}};
}

void from_json(const Json& j, CandidateEdge& v) {
  v.src = j.at("src").get<std::string>();
  v.dst = j.at("dst").get<std::string>();
  v.edge_type = enum_at<EdgeType>(j, "edge_type");
  v.score = j.at("score").get<double>();
  v.rationale = j.at("rationale").get<std::string>();
  v.proposer_id = j.at("proposer_id").get<std::string>();
}

void to_json(Json& j, const Modification& v) {
  j = Json{{"new_dst", optional_json(v.new_dst)},
           {"new_edge_type", v.new_edge_type ? enum_json(*v.new_edge_type) : Json(nullptr)}};
}

void from_json(const Json& j, Modification& v) {
  v.new_dst = optional_at<std::string>(j, "new_dst");
  v.new_edge_type.reset();
  if (auto t = optional_at<std::string>(j, "new_edge_type")) {
    v.new_edge_type = enum_from_string<EdgeType>(*t);
  }
}

void to_json(Json& j, const ValidationDecision& v) {
  j = Json{{"edge_id", v.edge_id},
           {"validator_id", v.validator_id},
           {"role", enum_json(v.role)},
           {"verdict", enum_json(v.verdict)},
           {"modification", optional_json(v.modification)},
           {"comment", v.comment},
           {"decided_at", text::format_timestamp(v.decided_at)}};
}

void from_json(const Json& j, ValidationDecision& v) {
  v.edge_id = j.at("edge_id").get<std::string>();
  v.validator_id = j.at("validator_id").get<std::string>();
  v.role = enum_at<Role>(j, "role");
  v.verdict = enum_at<Verdict>(j, "verdict");
  v.modification = optional_at<Modification>(j, "modification");
  v.comment = j.value("comment", std::string{});
  auto at = optional_at<std::string>(j, "decided_at");
  v.decided_at = at ? text::parse_timestamp(*at) : Timestamp{};
}

void to_json(Json& j, const StatusTransition& v) {
  j = Json{{"edge_id", v.edge_id},
           {"from", v.from ? enum_json(*v.from) : Json(nullptr)},
           {"to", enum_json(v.to)}};
}

void from_json(const Json& j, StatusTransition& v) {
  v.edge_id = j.at("edge_id").get<std::string>();
  v.from.reset();
  if (auto f = optional_at<std::string>(j, "from")) v.from = enum_from_string<EdgeStatus>(*f);
  v.to = enum_at<EdgeStatus>(j, "to");
}

}  // namespace clpde
