#include "clpde/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>

#include "clpde/error.hpp"
#include "clpde/text.hpp"

namespace clpde {

namespace {

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

std::string format_score(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string fill(std::string templ, const std::vector<std::pair<std::string, std::string>>& vars) {
  for (const auto& [key, value] : vars) {
    const std::string needle = "{" + key + "}";
    for (std::size_t pos = templ.find(needle); pos != std::string::npos;
         pos = templ.find(needle, pos + value.size())) {
      templ.replace(pos, needle.size(), value);
    }
  }
  return templ;
}

struct Scored {
  NodeId id;
  double score;
};

// Ranked neighbours of `node` among `pool`, best first, ties by id.
std::vector<Scored> rank(const NodeId& node, const Vector& v,
                         const std::vector<std::pair<NodeId, const Vector*>>& pool) {
  std::vector<Scored> out;
  for (const auto& [other, w] : pool) {
    if (other == node) continue;
    out.push_back({other, normalized_similarity(cosine(v, *w))});
  }
  std::sort(out.begin(), out.end(), [](const Scored& a, const Scored& b) {
    return a.score != b.score ? a.score > b.score : a.id < b.id;
  });
  return out;
}

std::vector<std::pair<NodeId, const Vector*>> language_pool(const OntologyGraph& graph,
                                                           const EmbeddingStore& store,
                                                           const std::string& provider,
                                                           const std::string& language) {
  std::vector<std::pair<NodeId, const Vector*>> pool;
  for (const auto& [id, node] : graph.expressions()) {
    if (node.language != language) continue;
    if (const Vector* v = store.find(provider, id)) pool.emplace_back(id, v);
  }
  return pool;
}

void sort_candidates(std::vector<CandidateEdge>& out) {
  std::sort(out.begin(), out.end(), [](const CandidateEdge& a, const CandidateEdge& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.src != b.src) return a.src < b.src;
    return a.dst < b.dst;
  });
}

void check_params(const ProposalParams& p) {
  if (p.provider_id.empty()) throw ValidationError("proposal needs a provider id");
  if (p.k == 0) throw ValidationError("k must be at least 1");
  if (!(p.tau >= 0.0 && p.tau <= 1.0)) throw ValidationError("tau outside [0,1]");
}

std::string similarity_rationale(double score, const std::string& provider) {
  return "Normalized embedding similarity " + format_score(score) + " under provider " + provider +
         ".";
}

}  // namespace

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw ValidationError("cosine of vectors with different dimensions (" +
                          std::to_string(u.size()) + " vs " + std::to_string(v.size()) + ")");
  }
  const double nu = norm(u), nv = norm(v);
  if (nu == 0.0 || nv == 0.0) throw ValidationError("cosine of a zero vector");
  double dot = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) dot += u[i] * v[i];
  return std::clamp(dot / (nu * nv), -1.0, 1.0);
}

HashedTokenProvider::HashedTokenProvider(std::size_t dim, std::uint64_t seed)
    : dim_(dim), seed_(seed) {
  if (dim_ == 0) throw ValidationError("provider dimension must be positive");
}

std::string HashedTokenProvider::id() const { return "hashed-token-" + std::to_string(dim_); }

Vector HashedTokenProvider::token_vector(std::string_view token) const {
  Vector v(dim_);
  std::uint64_t state = fnv1a64(token) ^ seed_;
  constexpr double kScale = 1.0 / 9007199254740992.0;  // 2^-53
  for (std::size_t i = 0; i < dim_; i += 2) {
    // Box-Muller on two uniforms; u1 lies in (0, 1].
    const double u1 = (static_cast<double>(splitmix64(state) >> 11) + 1.0) * kScale;
    const double u2 = static_cast<double>(splitmix64(state) >> 11) * kScale;
    const double r = std::sqrt(-2.0 * std::log(u1));
    v[i] = r * std::cos(2.0 * std::numbers::pi * u2);
    if (i + 1 < dim_) v[i + 1] = r * std::sin(2.0 * std::numbers::pi * u2);
  }
  return v;
}

Vector HashedTokenProvider::embed_tokens(std::span<const std::string> tokens) const {
  Vector sum(dim_, 0.0);
  for (const auto& t : tokens) {
    const Vector tv = token_vector(t);
    for (std::size_t i = 0; i < dim_; ++i) sum[i] += tv[i];
  }
  const double n = norm(sum);
  if (n > 0.0) {
    for (double& x : sum) x /= n;
  }
  return sum;
}

Vector HashedTokenProvider::embed(std::string_view text) const {
  const auto tokens = text::tokenize(text);
  return embed_tokens(tokens);
}

void to_json(Json& j, const EmbeddingRecord& v) {
  j = Json{{"node_id", v.node_id},
           {"vector", v.vector},
           {"dim", v.dim},
           {"provider_id", v.provider_id}};
}

void from_json(const Json& j, EmbeddingRecord& v) {
  v.node_id = j.at("node_id").get<std::string>();
  v.vector = j.at("vector").get<Vector>();
  v.dim = j.contains("dim") ? j.at("dim").get<std::size_t>() : v.vector.size();
  v.provider_id = j.at("provider_id").get<std::string>();
  if (v.dim != v.vector.size()) {
    throw ValidationError("embedding for " + v.node_id + " declares dim " + std::to_string(v.dim) +
                          " but has " + std::to_string(v.vector.size()) + " components");
  }
}

void EmbeddingStore::register_embedding(const OntologyGraph& graph, const NodeId& node,
                                        Vector vector, const std::string& provider_id) {
  if (!graph.has_node(node)) throw NotFoundError("node " + node + " does not exist");
  if (provider_id.empty()) throw ValidationError("embedding provider id is empty");
  if (vector.empty() || norm(vector) == 0.0) {
    throw ValidationError("embedding for " + node + " is a zero vector");
  }
  for (double x : vector) {
    if (!std::isfinite(x)) throw ValidationError("embedding for " + node + " is not finite");
  }
  auto it = providers_.find(provider_id);
  if (it != providers_.end() && it->second.dim != vector.size()) {
    throw ValidationError("embedding dimension " + std::to_string(vector.size()) +
                          " does not match provider " + provider_id + " dimension " +
                          std::to_string(it->second.dim));
  }
  auto& entry = providers_[provider_id];
  entry.dim = vector.size();
  entry.by_node[node] = std::move(vector);
}

const Vector* EmbeddingStore::find(const std::string& provider_id, const NodeId& node) const {
  auto p = providers_.find(provider_id);
  if (p == providers_.end()) return nullptr;
  auto it = p->second.by_node.find(node);
  return it == p->second.by_node.end() ? nullptr : &it->second;
}

std::optional<std::size_t> EmbeddingStore::dim(const std::string& provider_id) const {
  auto p = providers_.find(provider_id);
  if (p == providers_.end()) return std::nullopt;
  return p->second.dim;
}

const std::map<NodeId, Vector>* EmbeddingStore::vectors(const std::string& provider_id) const {
  auto p = providers_.find(provider_id);
  return p == providers_.end() ? nullptr : &p->second.by_node;
}

std::vector<CandidateEdge> propose_intra_lingual(const OntologyGraph& graph,
                                                 const EmbeddingStore& store,
                                                 std::string_view language,
                                                 const ProposalParams& params) {
  check_params(params);
  const std::string lang = normalize_language(language);
  const auto pool = language_pool(graph, store, params.provider_id, lang);
  std::map<std::pair<NodeId, NodeId>, double> pairs;
  for (const auto& [id, v] : pool) {
    const auto ranked = rank(id, *v, pool);
    for (std::size_t i = 0; i < ranked.size() && i < params.k; ++i) {
      if (ranked[i].score < params.tau) break;
      pairs[std::minmax(id, ranked[i].id)] = ranked[i].score;
    }
  }
  std::vector<CandidateEdge> out;
  for (const auto& [pair, score] : pairs) {
    out.push_back({pair.first, pair.second, EdgeType::IntraLingual, score,
                   similarity_rationale(score, params.provider_id),
                   "similarity:" + params.provider_id});
  }
  sort_candidates(out);
  return out;
}

std::vector<CandidateEdge> propose_cross_lingual(const OntologyGraph& graph,
                                                 const EmbeddingStore& store,
                                                 std::string_view lang_a, std::string_view lang_b,
                                                 const ProposalParams& params) {
  check_params(params);
  const std::string a = normalize_language(lang_a);
  const std::string b = normalize_language(lang_b);
  if (a == b) throw ValidationError("cross-lingual proposal needs two languages, got '" + a + "' twice");
  const auto pool_a = language_pool(graph, store, params.provider_id, a);
  const auto pool_b = language_pool(graph, store, params.provider_id, b);
  std::map<std::pair<NodeId, NodeId>, double> pairs;  // (lang_a node, lang_b node)
  auto collect = [&](const auto& from, const auto& to, bool from_is_a) {
    for (const auto& [id, v] : from) {
      const auto ranked = rank(id, *v, to);
      for (std::size_t i = 0; i < ranked.size() && i < params.k; ++i) {
        if (ranked[i].score < params.tau) break;
        auto key = from_is_a ? std::make_pair(id, ranked[i].id) : std::make_pair(ranked[i].id, id);
        pairs[key] = ranked[i].score;
      }
    }
  };
  collect(pool_a, pool_b, true);
  collect(pool_b, pool_a, false);
  std::vector<CandidateEdge> out;
  for (const auto& [pair, score] : pairs) {
    out.push_back({pair.first, pair.second, EdgeType::CrossLingual, score,
                   similarity_rationale(score, params.provider_id),
                   "similarity:" + params.provider_id});
  }
  sort_candidates(out);
  return out;
}

void to_json(Json& j, const LexiconEntry& v) {
  j = Json{{"cue", v.cue},
           {"language", v.language},
           {"concept_code", v.concept_code},
           {"framework", v.framework ? enum_json(*v.framework) : Json(nullptr)},
           {"rationale", v.rationale},
           {"base_confidence", v.base_confidence}};
}

void from_json(const Json& j, LexiconEntry& v) {
  v.cue = j.at("cue").get<std::string>();
  v.language = j.value("language", std::string("*"));
  v.concept_code = j.at("concept_code").get<std::string>();
  v.framework.reset();
  if (j.contains("framework") && !j.at("framework").is_null()) {
    v.framework = enum_from_string<Framework>(j.at("framework").get<std::string>());
  }
  v.rationale = j.at("rationale").get<std::string>();
  v.base_confidence = j.at("base_confidence").get<double>();
}

std::vector<LexiconEntry> parse_lexicon(std::string_view json_text) {
  Json doc;
  try {
    doc = Json::parse(json_text);
  } catch (const Json::parse_error& e) {
    throw ParseError("lexicon byte " + std::to_string(e.byte), e.what());
  }
  if (!doc.is_array()) throw ParseError("lexicon", "expected a JSON array of entries");
  std::vector<LexiconEntry> out;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const std::string where = "lexicon[" + std::to_string(i) + "]";
    try {
      auto e = doc[i].get<LexiconEntry>();
      if (text::tokenize(e.cue).empty()) throw ValidationError("cue has no tokens");
      if (e.concept_code.empty()) throw ValidationError("concept_code is empty");
      if (!(e.base_confidence >= 0.0 && e.base_confidence <= 1.0)) {
        throw ValidationError("base_confidence outside [0,1]");
      }
      if (e.rationale.empty()) throw ValidationError("rationale template is empty");
      e.language = e.language.empty() ? "*" : text::ascii_lower(e.language);
      out.push_back(std::move(e));
    } catch (const std::exception& e) {
      throw ParseError(where, e.what());
    }
  }
  return out;
}

LexiconProposer::LexiconProposer(std::vector<LexiconEntry> entries, std::string id)
    : entries_(std::move(entries)), id_(std::move(id)) {}

std::vector<CandidateEdge> LexiconProposer::propose(
    const ExpressionNode& expression, const std::vector<ConceptNode>& inventory) const {
  const auto tokens = text::tokenize(expression.surface_text);
  std::map<NodeId, CandidateEdge> best;
  for (const auto& entry : entries_) {
    if (entry.language != "*" && entry.language != expression.language) continue;
    const auto cue = text::tokenize(entry.cue);
    if (std::search(tokens.begin(), tokens.end(), cue.begin(), cue.end()) == tokens.end()) continue;
    const ConceptNode* target = nullptr;
    for (const auto& c : inventory) {
      if (c.code == entry.concept_code && (!entry.framework || c.framework == *entry.framework)) {
        target = &c;
        break;
      }
    }
    if (!target) continue;
    CandidateEdge cand{expression.id,
                       target->id,
                       EdgeType::ExpressionConcept,
                       entry.base_confidence,
                       fill(entry.rationale, {{"cue", entry.cue},
                                              {"label", target->label},
                                              {"code", target->code},
                                              {"framework", std::string(to_string(target->framework))}}),
                       id_};
    auto it = best.find(target->id);
    if (it == best.end() || cand.score > it->second.score) best[target->id] = std::move(cand);
  }
  std::vector<CandidateEdge> out;
  for (auto& [_, c] : best) out.push_back(std::move(c));
  sort_candidates(out);
  return out;
}

std::vector<CandidateEdge> propose_expression_concept(const OntologyGraph& graph,
                                                      const NodeId& node,
                                                      const MappingProposer& proposer) {
  if (!graph.has_node(node)) throw NotFoundError("node " + node + " does not exist");
  if (!graph.is_expression(node)) throw TypeError("node " + node + " is not an expression");
  std::vector<ConceptNode> inventory;
  for (const auto& [_, c] : graph.concepts()) inventory.push_back(c);
  std::vector<CandidateEdge> out;
  try {
    out = proposer.propose(graph.expression(node), inventory);
  } catch (const ProposerError&) {
    throw;
  } catch (const std::exception& e) {
    throw ProposerError(node, e.what());
  }
  for (auto& c : out) {
    if (c.src != node) throw ProposerError(node, "candidate from foreign source " + c.src);
    if (!graph.is_concept(c.dst)) throw ProposerError(node, "candidate target " + c.dst + " is not a concept");
    if (c.edge_type != EdgeType::ExpressionConcept) throw ProposerError(node, "candidate is not ExpressionConcept");
    if (!(c.score >= 0.0 && c.score <= 1.0)) throw ProposerError(node, "candidate score outside [0,1]");
    if (text::trim(c.rationale).empty()) throw ProposerError(node, "candidate without rationale");
    if (c.proposer_id.empty()) c.proposer_id = proposer.id();
  }
  sort_candidates(out);
  return out;
}

std::string_view to_string(AlignmentResult::Kind kind) {
  switch (kind) {
    case AlignmentResult::Kind::exact_match: return "exact_match";
    case AlignmentResult::Kind::similar_match: return "similar_match";
    case AlignmentResult::Kind::provisional: return "provisional";
  }
  return "unknown";
}

void to_json(Json& j, const AlignmentResult& v) {
  j = Json{{"kind", std::string(to_string(v.kind))},
           {"node", v.node},
           {"new_node", v.new_node ? Json(*v.new_node) : Json(nullptr)},
           {"similarity", v.similarity ? Json(*v.similarity) : Json(nullptr)},
           {"proposed_edge", v.proposed_edge ? Json(*v.proposed_edge) : Json(nullptr)}};
}

AlignmentResult align_new_expression(OntologyGraph& graph, EmbeddingStore& store,
                                     const EmbeddingProvider& provider,
                                     const AlignRequest& request, double tau_align,
                                     Timestamp now) {
  if (!(tau_align >= 0.0 && tau_align <= 1.0)) throw ValidationError("tau_align outside [0,1]");
  const std::string text = text::normalize_surface(request.surface_text);
  if (text.empty()) throw ValidationError("surface_text is empty");
  const std::string lang = normalize_language(request.language);

  AlignmentResult result;
  if (auto existing = graph.find_expression(text, lang)) {
    result.kind = AlignmentResult::Kind::exact_match;
    result.node = *existing;
    result.similarity = 1.0;
    return result;
  }

  const Vector v = provider.embed(text);
  if (norm(v) == 0.0) throw ValidationError("'" + text + "' has no tokens to embed");

  std::optional<Scored> best;
  if (const auto* vectors = store.vectors(provider.id())) {
    for (const auto& [id, w] : *vectors) {
      if (!graph.is_expression(id)) continue;
      const double s = normalized_similarity(cosine(v, w));
      if (!best || s > best->score) best = Scored{id, s};  // map order breaks ties by id
    }
  }
  if (best) result.similarity = best->score;

  // A similar match without any annotation to carry over stays provisional.
  const ExpressionNode* match =
      best && best->score >= tau_align ? &graph.expression(best->id) : nullptr;
  auto annotation = request.annotation;
  if (match && !annotation && match->annotation) {
    annotation = match->annotation;
    annotation->annotator_id = "aligned-from:" + match->id;
    annotation->annotator_confidence = match->annotation->annotator_confidence * best->score;
  }
  if (match && annotation) {
    const NodeId id = graph.add_expression(text, lang, annotation, request.provenance,
                                           NodeStatus::active, request.gloss);
    store.register_embedding(graph, id, v, provider.id());
    const EdgeType type = match->language == lang ? EdgeType::IntraLingual : EdgeType::CrossLingual;
    const Provenance prov{SourceKind::synthetic, "alignment:" + provider.id(), now, true};
    result.kind = AlignmentResult::Kind::similar_match;
    result.node = match->id;
    result.new_node = id;
    result.proposed_edge = graph.add_edge(
        id, match->id, type, best->score,
        "New utterance aligned to '" + match->surface_text + "' with normalized similarity " +
            format_score(best->score) + " (threshold " + format_score(tau_align) + ").",
        prov);
    return result;
  }

  const NodeId id = graph.add_expression(text, lang, request.annotation, request.provenance,
                                         NodeStatus::provisional, request.gloss);
  store.register_embedding(graph, id, v, provider.id());
  result.kind = AlignmentResult::Kind::provisional;
  result.node = id;
  result.new_node = id;
  return result;
}

void from_json(const Json& j, AlignRequest& v) {
  v.surface_text = j.at("surface_text").get<std::string>();
  v.language = j.at("language").get<std::string>();
  v.provenance = j.at("provenance").get<Provenance>();
  v.annotation.reset();
  if (auto it = j.find("annotation"); it != j.end() && !it->is_null()) {
    v.annotation = it->get<AnnotationRecord>();
  }
  v.gloss.reset();
  if (auto it = j.find("gloss"); it != j.end() && !it->is_null()) v.gloss = it->get<std::string>();
}

}  // namespace clpde
