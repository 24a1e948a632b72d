#pragma once
// Candidate-edge generation: embedding similarity for expression-expression
// links, proposer-driven expression->concept mappings, and alignment of new
// utterances onto the existing graph.

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "clpde/graph.hpp"
#include "clpde/json_io.hpp"
#include "clpde/types.hpp"

namespace clpde {

using Vector = std::vector<double>;

// Throws ValidationError on dimension mismatch or zero vectors.
double cosine(std::span<const double> u, std::span<const double> v);

// Maps cosine in [-1,1] onto the shared [0,1] confidence scale.
inline double normalized_similarity(double cosine_value) { return (cosine_value + 1.0) / 2.0; }

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::string id() const = 0;
  virtual std::size_t dim() const = 0;
  // May return the zero vector when the text has no tokens.
  virtual Vector embed(std::string_view text) const = 0;
};

// Deterministic bag-of-tokens provider: every token maps to a pseudorandom
// Gaussian vector seeded by a hash of the token; a text embeds as the
// L2-normalized sum of its token vectors.
class HashedTokenProvider final : public EmbeddingProvider {
 public:
  static constexpr std::size_t kDefaultDim = 64;
  static constexpr std::uint64_t kDefaultSeed = 0x43'4C'50'44'45'2D'76'31ULL;

  explicit HashedTokenProvider(std::size_t dim = kDefaultDim, std::uint64_t seed = kDefaultSeed);

  std::string id() const override;
  std::size_t dim() const override { return dim_; }
  Vector embed(std::string_view text) const override;
  Vector embed_tokens(std::span<const std::string> tokens) const;
  Vector token_vector(std::string_view token) const;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

struct EmbeddingRecord {
  NodeId node_id;
  Vector vector;
  std::size_t dim = 0;
  std::string provider_id;
};

void to_json(Json& j, const EmbeddingRecord& v);
void from_json(const Json& j, EmbeddingRecord& v);

class EmbeddingStore {
 public:
  // The first registration under a provider fixes its dimension.
  void register_embedding(const OntologyGraph& graph, const NodeId& node, Vector vector,
                          const std::string& provider_id);

  const Vector* find(const std::string& provider_id, const NodeId& node) const;
  std::optional<std::size_t> dim(const std::string& provider_id) const;
  const std::map<NodeId, Vector>* vectors(const std::string& provider_id) const;

 private:
  struct ProviderVectors {
    std::size_t dim = 0;
    std::map<NodeId, Vector> by_node;
  };
  std::map<std::string, ProviderVectors> providers_;
};

struct ProposalParams {
  std::string provider_id;
  std::size_t k = 5;
  double tau = 0.70;
};

// Top-k same-language neighbours per expression, kept when the normalized
// similarity reaches tau. Unordered pairs appear once (src < dst); ordered by
// score descending, then (src, dst).
std::vector<CandidateEdge> propose_intra_lingual(const OntologyGraph& graph,
                                                 const EmbeddingStore& store,
                                                 std::string_view language,
                                                 const ProposalParams& params);

std::vector<CandidateEdge> propose_cross_lingual(const OntologyGraph& graph,
                                                 const EmbeddingStore& store,
                                                 std::string_view lang_a, std::string_view lang_b,
                                                 const ProposalParams& params);

class MappingProposer {
 public:
  virtual ~MappingProposer() = default;
  virtual std::string id() const = 0;
  // Must be deterministic for a fixed configuration and input.
  virtual std::vector<CandidateEdge> propose(const ExpressionNode& expression,
                                             const std::vector<ConceptNode>& inventory) const = 0;
};

struct LexiconEntry {
  std::string cue;
  std::string language;  // "*" matches every language
  std::string concept_code;
  std::optional<Framework> framework;
  std::string rationale;  // placeholders: {cue} {label} {code} {framework}
  double base_confidence = 0.5;
};

void to_json(Json& j, const LexiconEntry& v);
void from_json(const Json& j, LexiconEntry& v);

std::vector<LexiconEntry> parse_lexicon(std::string_view json_text);

// Cue-phrase proposer: a cue matching the expression at token boundaries
// proposes its concept with the entry's base confidence.
class LexiconProposer final : public MappingProposer {
 public:
  explicit LexiconProposer(std::vector<LexiconEntry> entries, std::string id = "lexicon-v1");

  std::string id() const override { return id_; }
  std::vector<CandidateEdge> propose(const ExpressionNode& expression,
                                     const std::vector<ConceptNode>& inventory) const override;
  const std::vector<LexiconEntry>& entries() const { return entries_; }

 private:
  std::vector<LexiconEntry> entries_;
  std::string id_;
};

// Ranked expression->concept candidates (score descending, then dst). Errors
// from the proposer surface as ProposerError carrying the node id.
std::vector<CandidateEdge> propose_expression_concept(const OntologyGraph& graph,
                                                      const NodeId& node,
                                                      const MappingProposer& proposer);

struct AlignmentResult {
  enum class Kind { exact_match, similar_match, provisional };
  Kind kind = Kind::provisional;
  NodeId node;                        // matched existing node, or the new provisional node
  std::optional<NodeId> new_node;     // node created for the utterance (similar/provisional)
  std::optional<double> similarity;   // best normalized similarity seen
  std::optional<Edge> proposed_edge;  // utterance -> matched node, for similar matches
};

std::string_view to_string(AlignmentResult::Kind kind);
void to_json(Json& j, const AlignmentResult& v);

struct AlignRequest {
  std::string surface_text;
  std::string language;
  Provenance provenance;
  std::optional<AnnotationRecord> annotation;
  std::optional<std::string> gloss;
};

void from_json(const Json& j, AlignRequest& v);

// Exact normalized match -> that node. Otherwise the best normalized
// similarity against registered embeddings decides: >= tau_align adds the
// utterance as an active node with a proposed link to the best match;
// below it adds a provisional node.
AlignmentResult align_new_expression(OntologyGraph& graph, EmbeddingStore& store,
                                     const EmbeddingProvider& provider,
                                     const AlignRequest& request, double tau_align, Timestamp now);

}  // namespace clpde
