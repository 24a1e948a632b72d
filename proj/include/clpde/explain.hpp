#pragma once
// Layered edge explanations: annotation- and rule-driven perspectives,
// leave-one-token-out attribution, validated examples, contrastive records
// and rendered reports.

#include <cstddef>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "clpde/alignment.hpp"
#include "clpde/graph.hpp"
#include "clpde/json_io.hpp"
#include "clpde/types.hpp"

namespace clpde {

struct ExplanationRule {
  std::string rule_id;
  std::string pattern;   // token phrase matched against the source expression
  std::string language;  // "*" matches every language
  std::string tmpl;      // serialized as "template"
  Perspective perspective = Perspective::linguistic;

  bool operator==(const ExplanationRule&) const = default;
};

void to_json(Json& j, const ExplanationRule& v);
void from_json(const Json& j, ExplanationRule& v);

// Placeholders a template may use.
const std::vector<std::string>& template_placeholders();

// Names inside {...}; throws ValidationError on an unterminated brace.
std::vector<std::string> placeholders_in(std::string_view tmpl);

std::string fill_template(std::string_view tmpl, const std::map<std::string, std::string>& values);

// Rejects empty ids or patterns, duplicate ids and unknown placeholders.
std::vector<ExplanationRule> parse_rules(std::string_view json_text);

// Rules whose pattern occurs at token boundaries in the expression.
std::vector<const ExplanationRule*> match_rules(const std::vector<ExplanationRule>& rules,
                                                const ExpressionNode& expression);

// Text standing for a node on the other side of an edge: an expression's
// surface text, or a concept's label followed by its description.
std::string counterpart_text(const OntologyGraph& graph, const NodeId& node);

// score_i = cos(text, counterpart) - cos(text without token i, counterpart);
// an empty remainder scores 0. One entry per token occurrence, in order.
std::vector<TokenScore> token_contributions(std::string_view src_text,
                                            std::string_view counterpart,
                                            const EmbeddingProvider& provider);

// Other Accepted edges ranked by normalized similarity of their source
// embedding to this edge's source; ties by edge id.
std::vector<SimilarExample> nearest_validated_examples(const OntologyGraph& graph,
                                                       const EmbeddingStore& store,
                                                       const std::string& provider_id,
                                                       const EdgeId& edge_id, std::size_t k);

Contrastive contrastive(const OntologyGraph& graph, const CandidateEdge& chosen,
                        const CandidateEdge& runner_up);

struct ExplainContext {
  const OntologyGraph& graph;
  const EmbeddingStore& store;
  const EmbeddingProvider& provider;
  const std::vector<ExplanationRule>& rules;
  std::size_t example_count = 3;
};

// Bundle from all strategies. Missing annotation yields a bundle flagged
// incomplete; perspectives are still populated. The version follows any
// bundle already stored on the edge.
ExplanationBundle generate_bundle(const ExplainContext& ctx, const EdgeId& edge_id);

enum class ReportFormat { text, html };
std::string_view to_string(ReportFormat f);

// Requires the edge to carry a bundle.
std::string render_report(const OntologyGraph& graph, const EdgeId& edge_id,
                          const std::vector<ValidationDecision>& decisions, ReportFormat format);

// Rendered reports keyed by (edge id, bundle version, format). Edge status
// and decisions are folded into the key so a status change re-renders.
class ReportCache {
 public:
  std::string get(const OntologyGraph& graph, const EdgeId& edge_id,
                  const std::vector<ValidationDecision>& decisions, ReportFormat format);
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::map<std::tuple<EdgeId, std::uint32_t, ReportFormat, std::string>, std::string> cache_;
};

}  // namespace clpde
