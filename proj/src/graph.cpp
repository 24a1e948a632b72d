#include "clpde/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>

#include "clpde/error.hpp"
#include "clpde/text.hpp"

namespace clpde {

namespace {

constexpr std::string_view kExpressionPrefix = "expr-";
constexpr std::string_view kConceptPrefix = "concept-";
constexpr std::string_view kEdgePrefix = "edge-";
constexpr std::string_view kGroupPrefix = "pg-";

bool in_unit_range(double v) { return v >= 0.0 && v <= 1.0; }

bool symmetric(EdgeType t) { return t != EdgeType::ExpressionConcept; }

}  // namespace

std::string normalize_language(std::string_view language) {
  std::string tag = text::ascii_lower(text::trim(language));
  if (tag.empty()) throw ValidationError("language tag is empty");
  return tag;
}

void check_provenance_policy(const Provenance& p) {
  if (p.source_kind != SourceKind::synthetic && !p.anonymized) {
    throw PolicyError("provenance '" + p.source_id + "' (" + std::string(to_string(p.source_kind)) +
                      ") is not anonymized");
  }
}

std::string OntologyGraph::expression_key(std::string_view text, std::string_view language) {
  return std::string(language) + '\x1f' + std::string(text);
}

std::string OntologyGraph::concept_key(std::string_view code, Framework framework) {
  return std::string(to_string(framework)) + '\x1f' + std::string(code);
}

std::string OntologyGraph::edge_key(const NodeId& src, const NodeId& dst, EdgeType type) const {
  if (symmetric(type) && dst < src) return candidate_key(dst, src, type);
  return candidate_key(src, dst, type);
}

std::string OntologyGraph::next_id(std::string_view prefix, std::uint64_t& counter,
                                   const std::function<bool(const std::string&)>& taken) {
  for (;;) {
    ++counter;
    char buf[24];
    std::snprintf(buf, sizeof buf, "%08llu", static_cast<unsigned long long>(counter));
    std::string id = std::string(prefix) + buf;
    if (!taken(id)) return id;
  }
}

void OntologyGraph::bump_counter(const std::string& id, std::string_view prefix,
                                 std::uint64_t& counter) {
  if (id.size() <= prefix.size() || id.compare(0, prefix.size(), prefix) != 0) return;
  std::uint64_t value = 0;
  const char* first = id.data() + prefix.size();
  const char* last = id.data() + id.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec == std::errc{} && ptr == last) counter = std::max(counter, value);
}

bool OntologyGraph::has_node(const NodeId& id) const {
  return expressions_.count(id) != 0 || concepts_.count(id) != 0;
}

NodeId OntologyGraph::add_expression(std::string_view surface_text, std::string_view language,
                                     std::optional<AnnotationRecord> annotation,
                                     const Provenance& provenance, NodeStatus status,
                                     std::optional<std::string> gloss) {
  const std::string text = text::normalize_surface(surface_text);
  if (text.empty()) throw ValidationError("surface_text is empty");
  const std::string lang = normalize_language(language);
  if (auto it = expression_index_.find(expression_key(text, lang)); it != expression_index_.end()) {
    return it->second;
  }
  check_provenance_policy(provenance);
  if (annotation) {
    if (auto v = annotation_violations(*annotation); !v.empty()) {
      throw ValidationError("annotation: " + v.front());
    }
  } else if (status == NodeStatus::active) {
    throw ValidationError("active expression '" + text + "' requires an annotation");
  }

  ExpressionNode node;
  node.id = next_id(kExpressionPrefix, expression_counter_,
                    [this](const std::string& id) { return has_node(id); });
  node.surface_text = text;
  node.language = lang;
  node.gloss = std::move(gloss);
  node.annotation = std::move(annotation);
  node.provenance = provenance;
  node.status = status;
  expression_index_.emplace(expression_key(text, lang), node.id);
  const NodeId id = node.id;
  expressions_.emplace(id, std::move(node));
  return id;
}

NodeId OntologyGraph::add_concept(std::string_view code, Framework framework,
                                  std::string_view label, std::optional<std::string> description) {
  const std::string c = text::trim(code);
  const std::string l = text::trim(label);
  if (c.empty()) throw ValidationError("concept code is empty");
  if (l.empty()) throw ValidationError("concept label is empty");
  if (auto it = concept_index_.find(concept_key(c, framework)); it != concept_index_.end()) {
    const auto& existing = concepts_.at(it->second);
    if (existing.label != l) {
      throw ConflictError("concept " + std::string(to_string(framework)) + " " + c +
                          " already exists with label '" + existing.label + "'");
    }
    return it->second;
  }
  ConceptNode node;
  node.id = next_id(kConceptPrefix, concept_counter_,
                    [this](const std::string& id) { return has_node(id); });
  node.code = c;
  node.framework = framework;
  node.label = l;
  node.description = std::move(description);
  concept_index_.emplace(concept_key(c, framework), node.id);
  const NodeId id = node.id;
  concepts_.emplace(id, std::move(node));
  return id;
}

void OntologyGraph::check_edge_endpoints(const NodeId& src, const NodeId& dst,
                                         EdgeType type) const {
  if (!has_node(src)) throw NotFoundError("edge source " + src + " does not exist");
  if (!has_node(dst)) throw NotFoundError("edge target " + dst + " does not exist");
  if (src == dst) throw ValidationError("edge endpoints must differ (" + src + ")");
  const std::string label(to_string(type));
  switch (type) {
    case EdgeType::IntraLingual:
    case EdgeType::CrossLingual: {
      if (!is_expression(src) || !is_expression(dst)) {
        throw TypeError(label + " edge requires two expression nodes (" + src + ", " + dst + ")");
      }
      const bool same = expression(src).language == expression(dst).language;
      if (type == EdgeType::IntraLingual && !same) {
        throw TypeError("IntraLingual edge joins different languages (" +
                        expression(src).language + ", " + expression(dst).language + ")");
      }
      if (type == EdgeType::CrossLingual && same) {
        throw TypeError("CrossLingual edge joins two '" + expression(src).language +
                        "' expressions");
      }
      break;
    }
    case EdgeType::ExpressionConcept:
      if (!is_expression(src) || !is_concept(dst)) {
        throw TypeError("ExpressionConcept edge must run expression -> concept (" + src + ", " +
                        dst + ")");
      }
      break;
  }
}

void OntologyGraph::check_edge_values(const Edge& e) const {
  auto check = [&](std::optional<double> v, const char* field) {
    if (v && !in_unit_range(*v)) {
      throw ValidationError(std::string(field) + " of " + e.id + " outside [0,1]");
    }
  };
  check(e.model_confidence, "model_confidence");
  check(e.validator_agreement, "validator_agreement");
  check(e.combined_confidence, "combined_confidence");
}

void OntologyGraph::index_edge(const Edge& e) {
  incident_[e.src].insert(e.id);
  incident_[e.dst].insert(e.id);
  if (e.status != EdgeStatus::Superseded) {
    edge_index_.emplace(edge_key(e.src, e.dst, e.edge_type), e.id);
  }
}

Edge OntologyGraph::add_edge(const NodeId& src, const NodeId& dst, EdgeType type,
                             double model_confidence, std::string rationale,
                             const Provenance& provenance) {
  if (!in_unit_range(model_confidence)) {
    throw ValidationError("model_confidence " + std::to_string(model_confidence) +
                          " outside [0,1]");
  }
  check_edge_endpoints(src, dst, type);
  if (auto it = edge_index_.find(edge_key(src, dst, type)); it != edge_index_.end()) {
    return edges_.at(it->second);
  }
  Edge e;
  e.id = next_id(kEdgePrefix, edge_counter_,
                 [this](const std::string& id) { return edges_.count(id) != 0; });
  e.src = src;
  e.dst = dst;
  e.edge_type = type;
  e.status = EdgeStatus::Proposed;
  e.model_confidence = model_confidence;
  e.rationale = std::move(rationale);
  e.provenance = provenance;
  index_edge(e);
  transitions_.push_back({e.id, std::nullopt, EdgeStatus::Proposed});
  auto [it, _] = edges_.emplace(e.id, std::move(e));
  return it->second;
}

void OntologyGraph::restore_expression(const ExpressionNode& node) {
  if (auto it = expressions_.find(node.id); it != expressions_.end()) {
    if (it->second == node) return;
    throw ConflictError("expression " + node.id + " already exists with different content");
  }
  if (concepts_.count(node.id)) throw ConflictError("node id " + node.id + " is a concept");
  if (text::trim(node.surface_text).empty()) throw ValidationError(node.id + ": empty surface_text");
  if (node.language.empty() || node.language != text::ascii_lower(node.language)) {
    throw ValidationError(node.id + ": language tag must be non-empty lowercase");
  }
  check_provenance_policy(node.provenance);
  if (node.annotation) {
    if (auto v = annotation_violations(*node.annotation); !v.empty()) {
      throw ValidationError(node.id + ": annotation: " + v.front());
    }
  }
  const auto key = expression_key(node.surface_text, node.language);
  if (auto it = expression_index_.find(key); it != expression_index_.end()) {
    throw ConflictError("expression " + node.id + " duplicates " + it->second);
  }
  expression_index_.emplace(key, node.id);
  bump_counter(node.id, kExpressionPrefix, expression_counter_);
  expressions_.emplace(node.id, node);
}

void OntologyGraph::restore_concept(const ConceptNode& node) {
  if (auto it = concepts_.find(node.id); it != concepts_.end()) {
    if (it->second == node) return;
    throw ConflictError("concept " + node.id + " already exists with different content");
  }
  if (expressions_.count(node.id)) throw ConflictError("node id " + node.id + " is an expression");
  if (node.code.empty() || node.label.empty()) {
    throw ValidationError(node.id + ": concept code and label must be non-empty");
  }
  const auto key = concept_key(node.code, node.framework);
  if (auto it = concept_index_.find(key); it != concept_index_.end()) {
    throw ConflictError("concept " + node.id + " duplicates " + it->second);
  }
  concept_index_.emplace(key, node.id);
  bump_counter(node.id, kConceptPrefix, concept_counter_);
  concepts_.emplace(node.id, node);
}

void OntologyGraph::restore_edge(const Edge& edge) {
  if (auto it = edges_.find(edge.id); it != edges_.end()) {
    if (it->second == edge) return;
    throw ConflictError("edge " + edge.id + " already exists with different content");
  }
  check_edge_endpoints(edge.src, edge.dst, edge.edge_type);
  check_edge_values(edge);
  bump_counter(edge.id, kEdgePrefix, edge_counter_);
  if (edge.parallel_group) bump_counter(*edge.parallel_group, kGroupPrefix, group_counter_);
  index_edge(edge);
  edges_.emplace(edge.id, edge);
}

std::vector<Neighbor> OntologyGraph::neighbors(
    const NodeId& node, std::optional<EdgeType> type_filter,
    const std::optional<std::set<EdgeStatus>>& status_filter) const {
  if (!has_node(node)) throw NotFoundError("node " + node + " does not exist");
  std::vector<Neighbor> out;
  auto it = incident_.find(node);
  if (it == incident_.end()) return out;
  for (const auto& edge_id : it->second) {  // std::set: ordered by edge id
    const Edge& e = edges_.at(edge_id);
    if (type_filter && e.edge_type != *type_filter) continue;
    if (status_filter && !status_filter->count(e.status)) continue;
    const NodeId& other = e.src == node ? e.dst : e.src;
    out.push_back({e, this->node(other)});
  }
  return out;
}

std::string OntologyGraph::retain_parallel(const std::vector<EdgeId>& edge_ids,
                                           const std::vector<std::string>& reasons) {
  std::set<EdgeId> distinct(edge_ids.begin(), edge_ids.end());
  if (distinct.size() != edge_ids.size()) {
    throw ValidationError("parallel retention lists an edge twice");
  }
  if (edge_ids.size() < 2) {
    throw ValidationError("parallel retention needs at least two edges, got " +
                          std::to_string(edge_ids.size()));
  }
  if (reasons.size() != edge_ids.size()) {
    throw ValidationError("parallel retention needs one reason per edge (" +
                          std::to_string(edge_ids.size()) + " edges, " +
                          std::to_string(reasons.size()) + " reasons)");
  }
  const NodeId& src = edge(edge_ids.front()).src;
  for (std::size_t i = 0; i < edge_ids.size(); ++i) {
    const Edge& e = edge(edge_ids[i]);
    if (e.src != src) {
      throw ValidationError("parallel edges must share a source (" + e.id + " starts at " + e.src +
                            ", expected " + src + ")");
    }
    if (e.status != EdgeStatus::Adjudication) {
      throw StateError("edge " + e.id + " is " + std::string(to_string(e.status)) +
                       ", parallel retention requires Adjudication");
    }
    if (text::trim(reasons[i]).empty()) {
      throw ValidationError("reason for edge " + e.id + " is empty");
    }
  }
  const std::string group = next_id(kGroupPrefix, group_counter_, [this](const std::string& g) {
    return std::any_of(edges_.begin(), edges_.end(),
                       [&](const auto& kv) { return kv.second.parallel_group == g; });
  });
  for (std::size_t i = 0; i < edge_ids.size(); ++i) {
    transition(edge_ids[i], EdgeStatus::ParallelRetained);
    Edge& e = edges_.at(edge_ids[i]);
    e.parallel_group = group;
    e.parallel_reason = reasons[i];
  }
  return group;
}

const Edge& OntologyGraph::transition(const EdgeId& id, EdgeStatus to) {
  auto it = edges_.find(id);
  if (it == edges_.end()) throw NotFoundError("edge " + id + " does not exist");
  Edge& e = it->second;
  if (!is_legal_transition(e.status, to)) {
    throw StateError("illegal transition of " + id + ": " + std::string(to_string(e.status)) +
                     " -> " + std::string(to_string(to)));
  }
  transitions_.push_back({id, e.status, to});
  e.status = to;
  if (to == EdgeStatus::Superseded) {
    auto key = edge_index_.find(edge_key(e.src, e.dst, e.edge_type));
    if (key != edge_index_.end() && key->second == id) edge_index_.erase(key);
  }
  return e;
}

const Edge& OntologyGraph::update_edge(const EdgeId& id, const std::function<void(Edge&)>& mutate) {
  auto it = edges_.find(id);
  if (it == edges_.end()) throw NotFoundError("edge " + id + " does not exist");
  Edge copy = it->second;
  mutate(copy);
  const Edge& orig = it->second;
  if (copy.id != orig.id || copy.src != orig.src || copy.dst != orig.dst ||
      copy.edge_type != orig.edge_type || copy.status != orig.status) {
    throw StateError("update_edge may not change identity, endpoints, type or status of " + id);
  }
  check_edge_values(copy);
  it->second = std::move(copy);
  return it->second;
}

const ExpressionNode& OntologyGraph::expression(const NodeId& id) const {
  auto it = expressions_.find(id);
  if (it == expressions_.end()) throw NotFoundError("expression " + id + " does not exist");
  return it->second;
}

const ConceptNode& OntologyGraph::concept_node(const NodeId& id) const {
  auto it = concepts_.find(id);
  if (it == concepts_.end()) throw NotFoundError("concept " + id + " does not exist");
  return it->second;
}

const Edge& OntologyGraph::edge(const EdgeId& id) const {
  auto it = edges_.find(id);
  if (it == edges_.end()) throw NotFoundError("edge " + id + " does not exist");
  return it->second;
}

Node OntologyGraph::node(const NodeId& id) const {
  if (auto it = expressions_.find(id); it != expressions_.end()) return it->second;
  if (auto it = concepts_.find(id); it != concepts_.end()) return it->second;
  throw NotFoundError("node " + id + " does not exist");
}

std::optional<NodeId> OntologyGraph::find_expression(std::string_view surface_text,
                                                     std::string_view language) const {
  const std::string text = text::normalize_surface(surface_text);
  std::string lang = text::ascii_lower(text::trim(language));
  auto it = expression_index_.find(expression_key(text, lang));
  if (it == expression_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<NodeId> OntologyGraph::find_concept(std::string_view code, Framework framework) const {
  auto it = concept_index_.find(concept_key(code, framework));
  if (it == concept_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<NodeId> OntologyGraph::find_concept_by_code(std::string_view code) const {
  for (const auto& [id, c] : concepts_) {
    if (c.code == code) return id;
  }
  return std::nullopt;
}

std::optional<EdgeId> OntologyGraph::find_edge(const NodeId& src, const NodeId& dst,
                                               EdgeType type) const {
  auto it = edge_index_.find(edge_key(src, dst, type));
  if (it == edge_index_.end()) return std::nullopt;
  return it->second;
}

std::vector<EdgeId> OntologyGraph::parallel_group(const std::string& group) const {
  std::vector<EdgeId> out;
  for (const auto& [id, e] : edges_) {
    if (e.parallel_group == group) out.push_back(id);
  }
  return out;
}

std::vector<std::string> OntologyGraph::integrity_violations() const {
  std::vector<std::string> out;
  std::map<std::string, std::vector<const Edge*>> groups;
  for (const auto& [id, e] : edges_) {
    try {
      check_edge_endpoints(e.src, e.dst, e.edge_type);
      check_edge_values(e);
    } catch (const Error& err) {
      out.push_back(id + ": " + err.what());
    }
    if (e.parallel_group) groups[*e.parallel_group].push_back(&e);
    if (e.revision_of && !edges_.count(*e.revision_of)) {
      out.push_back(id + ": revision_of " + *e.revision_of + " does not exist");
    }
  }
  for (const auto& [group, members] : groups) {
    for (const Edge* e : members) {
      if (e->src != members.front()->src) {
        out.push_back("parallel group " + group + " mixes sources");
        break;
      }
    }
  }
  return out;
}

Json OntologyGraph::to_document() const {
  Json expressions = Json::array();
  for (const auto& [_, n] : expressions_) expressions.push_back(n);
  Json concepts = Json::array();
  for (const auto& [_, n] : concepts_) concepts.push_back(n);
  Json edges = Json::array();
  for (const auto& [_, e] : edges_) edges.push_back(e);
  return Json{{"expressions", std::move(expressions)},
              {"concepts", std::move(concepts)},
              {"edges", std::move(edges)}};
}

std::string OntologyGraph::export_graph() const { return to_document().dump(2) + "\n"; }

OntologyGraph OntologyGraph::from_document(const Json& doc) {
  if (!doc.is_object()) throw ParseError("document", "graph document must be a JSON object");
  for (const char* key : {"expressions", "concepts", "edges"}) {
    if (!doc.contains(key) || !doc.at(key).is_array()) {
      throw ParseError("document", std::string("missing array '") + key + "'");
    }
  }
  OntologyGraph g;
  auto load = [&](const char* key, auto&& apply) {
    const auto& arr = doc.at(key);
    for (std::size_t i = 0; i < arr.size(); ++i) {
      std::string location = std::string(key) + "[" + std::to_string(i) + "]";
      if (arr[i].is_object() && arr[i].contains("id") && arr[i]["id"].is_string()) {
        location += " (" + arr[i]["id"].get<std::string>() + ")";
      }
      try {
        apply(arr[i]);
      } catch (const NotFoundError& e) {
        throw ParseError(location, std::string("dangling endpoint: ") + e.what());
      } catch (const Error& e) {
        throw ParseError(location, e.what());
      } catch (const Json::exception& e) {
        throw ParseError(location, e.what());
      }
    }
  };
  load("expressions", [&](const Json& j) { g.restore_expression(j.get<ExpressionNode>()); });
  load("concepts", [&](const Json& j) { g.restore_concept(j.get<ConceptNode>()); });
  load("edges", [&](const Json& j) { g.restore_edge(j.get<Edge>()); });
  if (auto v = g.integrity_violations(); !v.empty()) throw ParseError("edges", v.front());
  return g;
}

OntologyGraph OntologyGraph::import_graph(std::string_view document) {
  Json doc;
  try {
    doc = Json::parse(document);
  } catch (const Json::parse_error& e) {
    throw ParseError("byte " + std::to_string(e.byte), e.what());
  }
  return from_document(doc);
}

}  // namespace clpde
