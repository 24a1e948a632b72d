#include "clpde/explain.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "clpde/error.hpp"
#include "clpde/text.hpp"

namespace clpde {

namespace {

std::string fixed4(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string signed4(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%+.4f", v);
  return buf;
}

bool contains_phrase(const std::vector<std::string>& tokens,
                     const std::vector<std::string>& phrase) {
  if (phrase.empty() || phrase.size() > tokens.size()) return false;
  for (std::size_t i = 0; i + phrase.size() <= tokens.size(); ++i) {
    if (std::equal(phrase.begin(), phrase.end(), tokens.begin() + static_cast<long>(i))) {
      return true;
    }
  }
  return false;
}

// Raw cosine that treats an empty (zero) embedding as carrying no signal.
double cosine_or_zero(const Vector& a, const Vector& b) {
  auto zero = [](const Vector& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
  };
  if (zero(a) || zero(b)) return 0.0;
  return cosine(a, b);
}

std::string markers_text(const std::set<CulturalMarker>& markers) {
  std::vector<std::string> names;
  for (auto m : markers) {
    std::string n(to_string(m));
    std::replace(n.begin(), n.end(), '_', ' ');
    names.push_back(n);
  }
  return text::join(names, ", ");
}

std::string node_label(const OntologyGraph& graph, const NodeId& id) {
  if (graph.is_concept(id)) {
    const auto& c = graph.concept_node(id);
    return c.code + " " + c.label + " (" + std::string(to_string(c.framework)) + ")";
  }
  const auto& e = graph.expression(id);
  return "\"" + e.surface_text + "\" (" + e.language + ")";
}

std::string edge_kind_phrase(EdgeType t) {
  switch (t) {
    case EdgeType::IntraLingual: return "same-language variant";
    case EdgeType::CrossLingual: return "cross-language equivalent";
    case EdgeType::ExpressionConcept: return "concept mapping";
  }
  return "link";
}

std::map<std::string, std::string> template_values(const OntologyGraph& graph, const Edge& edge) {
  const auto& src = graph.expression(edge.src);
  std::map<std::string, std::string> v;
  v["src_text"] = src.surface_text;
  v["language"] = src.language;
  v["dst_label"] = node_label(graph, edge.dst);
  if (graph.is_concept(edge.dst)) {
    const auto& c = graph.concept_node(edge.dst);
    v["concept_label"] = c.label;
    v["concept_code"] = c.code;
    v["framework"] = std::string(to_string(c.framework));
  } else {
    v["concept_label"] = "n/a";
    v["concept_code"] = "n/a";
    v["framework"] = "n/a";
  }
  if (src.annotation) {
    const auto& a = *src.annotation;
    std::string category(to_string(a.semantic_category));
    std::replace(category.begin(), category.end(), '_', ' ');
    v["category"] = category;
    v["severity"] = std::string(to_string(a.severity));
    v["temporal"] = std::string(to_string(a.temporal));
    v["markers"] = a.cultural_markers.empty() ? "none" : markers_text(a.cultural_markers);
  } else {
    v["category"] = v["severity"] = v["temporal"] = v["markers"] = "unannotated";
  }
  v["match"] = "";
  return v;
}

const char* kClinicalCaveat =
    "This link is an aid for interpretation and does not establish a diagnosis by itself.";

std::string base_linguistic(const OntologyGraph& graph, const Edge& edge,
                            const std::map<std::string, std::string>& v) {
  std::string out = "\"" + v.at("src_text") + "\" (" + v.at("language") + ") is recorded as a " +
                    edge_kind_phrase(edge.edge_type) + " of " + v.at("dst_label") + ".";
  if (v.at("category") != "unannotated") {
    out += " Annotated semantic category: " + v.at("category") + ".";
  }
  if (graph.is_expression(edge.dst)) {
    const auto& dst = graph.expression(edge.dst);
    if (dst.gloss) out += " Gloss of the counterpart: " + *dst.gloss + ".";
  }
  return out;
}

std::string base_cultural(const std::map<std::string, std::string>& v) {
  const std::string& m = v.at("markers");
  if (m == "unannotated") {
    return "No annotation is available, so cultural markers for this expression are unknown.";
  }
  if (m == "none") {
    return "The annotator marked no cultural features; the phrase reads as conventional " +
           v.at("language") + " usage.";
  }
  return "Annotated cultural markers: " + m +
         ". The wording carries meaning specific to its speech community.";
}

std::string base_clinical(const Edge& edge, const std::map<std::string, std::string>& v) {
  std::string out;
  if (edge.edge_type == EdgeType::ExpressionConcept) {
    out = "Relates to " + v.at("concept_code") + " " + v.at("concept_label") + " in " +
          v.at("framework") + ".";
  } else {
    out = "Shares clinical reading with " + v.at("dst_label") + ".";
  }
  out += " Severity: " + v.at("severity") + "; temporal profile: " + v.at("temporal") + ". ";
  out += kClinicalCaveat;
  return out;
}

std::string html_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

void to_json(Json& j, const ExplanationRule& v) {
  j = Json{{"rule_id", v.rule_id},
           {"pattern", v.pattern},
           {"language", v.language},
           {"template", v.tmpl},
           {"perspective", enum_json(v.perspective)}};
}

void from_json(const Json& j, ExplanationRule& v) {
  v.rule_id = j.at("rule_id").get<std::string>();
  v.pattern = j.at("pattern").get<std::string>();
  v.language = j.contains("language") ? j.at("language").get<std::string>() : "*";
  v.tmpl = j.at("template").get<std::string>();
  v.perspective = enum_from_string<Perspective>(j.at("perspective").get<std::string>());
}

const std::vector<std::string>& template_placeholders() {
  static const std::vector<std::string> names{
      "match",       "src_text",     "language",  "dst_label", "concept_label", "concept_code",
      "framework",   "category",     "severity",  "temporal",  "markers"};
  return names;
}

std::vector<std::string> placeholders_in(std::string_view tmpl) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while ((pos = tmpl.find('{', pos)) != std::string_view::npos) {
    const std::size_t close = tmpl.find('}', pos);
    if (close == std::string_view::npos) {
      throw ValidationError("unterminated placeholder at offset " + std::to_string(pos));
    }
    out.emplace_back(tmpl.substr(pos + 1, close - pos - 1));
    pos = close + 1;
  }
  return out;
}

std::string fill_template(std::string_view tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const std::size_t open = tmpl.find('{', pos);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    out.append(tmpl.substr(pos, open - pos));
    const std::size_t close = tmpl.find('}', open);
    if (close == std::string_view::npos) {
      throw ValidationError("unterminated placeholder at offset " + std::to_string(open));
    }
    const std::string name(tmpl.substr(open + 1, close - open - 1));
    auto it = values.find(name);
    if (it == values.end()) throw ValidationError("no value for placeholder {" + name + "}");
    out += it->second;
    pos = close + 1;
  }
  return out;
}

std::vector<ExplanationRule> parse_rules(std::string_view json_text) {
  Json doc;
  try {
    doc = Json::parse(json_text);
  } catch (const Json::parse_error& e) {
    throw ParseError("rules", e.what());
  }
  if (!doc.is_array()) throw ParseError("rules", "expected a JSON array");
  const auto& known = template_placeholders();
  std::vector<ExplanationRule> rules;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const std::string where = "rules[" + std::to_string(i) + "]";
    ExplanationRule r;
    try {
      r = doc[i].get<ExplanationRule>();
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(where, e.what());
    }
    if (text::trim(r.rule_id).empty()) throw ValidationError(where + ": rule_id is empty");
    if (text::tokenize(r.pattern).empty()) throw ValidationError(where + ": pattern is empty");
    if (text::trim(r.tmpl).empty()) throw ValidationError(where + ": template is empty");
    if (!ids.insert(r.rule_id).second) {
      throw ValidationError(where + ": duplicate rule_id '" + r.rule_id + "'");
    }
    for (const auto& p : placeholders_in(r.tmpl)) {
      if (std::find(known.begin(), known.end(), p) == known.end()) {
        throw ValidationError(where + " (" + r.rule_id + "): unknown placeholder {" + p + "}");
      }
    }
    r.language = r.language == "*" ? r.language : normalize_language(r.language);
    rules.push_back(std::move(r));
  }
  return rules;
}

std::vector<const ExplanationRule*> match_rules(const std::vector<ExplanationRule>& rules,
                                                const ExpressionNode& expression) {
  const auto tokens = text::tokenize(expression.surface_text);
  std::vector<const ExplanationRule*> out;
  for (const auto& r : rules) {
    if (r.language != "*" && r.language != expression.language) continue;
    if (contains_phrase(tokens, text::tokenize(r.pattern))) out.push_back(&r);
  }
  return out;
}

std::string counterpart_text(const OntologyGraph& graph, const NodeId& node) {
  if (graph.is_concept(node)) {
    const auto& c = graph.concept_node(node);
    return c.description ? c.label + " " + *c.description : c.label;
  }
  return graph.expression(node).surface_text;
}

std::vector<TokenScore> token_contributions(std::string_view src_text,
                                            std::string_view counterpart,
                                            const EmbeddingProvider& provider) {
  const auto tokens = text::tokenize(src_text);
  const Vector target = provider.embed(counterpart);
  const double full = cosine_or_zero(provider.embed(text::join(tokens, " ")), target);
  std::vector<TokenScore> out;
  out.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::vector<std::string> rest;
    for (std::size_t j = 0; j < tokens.size(); ++j) {
      if (j != i) rest.push_back(tokens[j]);
    }
    const double without = rest.empty() ? 0.0 : cosine_or_zero(provider.embed(text::join(rest, " ")), target);
    out.push_back({tokens[i], full - without});
  }
  return out;
}

std::vector<SimilarExample> nearest_validated_examples(const OntologyGraph& graph,
                                                       const EmbeddingStore& store,
                                                       const std::string& provider_id,
                                                       const EdgeId& edge_id, std::size_t k) {
  const Edge& edge = graph.edge(edge_id);
  const Vector* anchor = store.find(provider_id, edge.src);
  std::vector<SimilarExample> out;
  if (!anchor || k == 0) return out;
  for (const auto& [id, other] : graph.edges()) {
    if (id == edge_id || other.status != EdgeStatus::Accepted) continue;
    const Vector* v = store.find(provider_id, other.src);
    if (!v) continue;
    out.push_back({id, normalized_similarity(cosine_or_zero(*anchor, *v))});
  }
  std::sort(out.begin(), out.end(), [](const SimilarExample& a, const SimilarExample& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.edge_id < b.edge_id;
  });
  if (out.size() > k) out.resize(k);
  return out;
}

Contrastive contrastive(const OntologyGraph& graph, const CandidateEdge& chosen,
                        const CandidateEdge& runner_up) {
  if (chosen.src != runner_up.src) {
    throw ValidationError("contrastive candidates start at different nodes (" + chosen.src +
                          ", " + runner_up.src + ")");
  }
  if (chosen.score < runner_up.score) {
    throw ValidationError("chosen candidate scores below the runner-up (" + fixed4(chosen.score) +
                          " < " + fixed4(runner_up.score) + ")");
  }
  Contrastive c;
  c.chosen_dst = chosen.dst;
  c.runner_up_dst = runner_up.dst;
  c.score_delta = chosen.score - runner_up.score;
  const std::string a = node_label(graph, chosen.dst);
  const std::string b = node_label(graph, runner_up.dst);
  if (c.score_delta == 0.0) {
    c.text = a + " and " + b + " tie at score " + fixed4(chosen.score) +
             "; neither is preferred on score alone.";
  } else {
    c.text = a + " scored " + fixed4(chosen.score) + " against " + fixed4(runner_up.score) +
             " for " + b + " (difference " + fixed4(c.score_delta) + ").";
  }
  return c;
}

ExplanationBundle generate_bundle(const ExplainContext& ctx, const EdgeId& edge_id) {
  const OntologyGraph& graph = ctx.graph;
  const Edge& edge = graph.edge(edge_id);
  const ExpressionNode& src = graph.expression(edge.src);
  const auto values = template_values(graph, edge);

  ExplanationBundle b;
  b.edge_id = edge.id;
  b.incomplete = !src.annotation.has_value();
  b.version = edge.explanation ? edge.explanation->version + 1 : 1;

  std::vector<std::string> extra[3];
  for (const ExplanationRule* r : match_rules(ctx.rules, src)) {
    auto v = values;
    v["match"] = r->pattern;
    extra[static_cast<int>(r->perspective)].push_back(fill_template(r->tmpl, v));
    b.matched_rules.push_back(r->rule_id);
  }
  auto compose = [&](std::string base, Perspective p) {
    for (const auto& s : extra[static_cast<int>(p)]) base += " " + s;
    return base;
  };
  b.linguistic = compose(base_linguistic(graph, edge, values), Perspective::linguistic);
  b.cultural = compose(base_cultural(values), Perspective::cultural);
  b.clinical = compose(base_clinical(edge, values), Perspective::clinical);

  b.token_contributions =
      token_contributions(src.surface_text, counterpart_text(graph, edge.dst), ctx.provider);
  b.nearest_examples = nearest_validated_examples(graph, ctx.store, ctx.provider.id(), edge.id,
                                                  ctx.example_count);
  if (edge.runner_up) {
    CandidateEdge self{edge.src, edge.dst, edge.edge_type, edge.model_confidence, edge.rationale, ""};
    CandidateEdge other{edge.src, edge.runner_up->dst, edge.edge_type, edge.runner_up->score,
                        edge.runner_up->rationale, ""};
    b.contrastive = self.score >= other.score ? contrastive(graph, self, other)
                                              : contrastive(graph, other, self);
  }
  b.confidence = edge.combined_confidence.value_or(edge.model_confidence);
  b.provenance_refs.push_back("edge:" + edge.provenance.source_id);
  b.provenance_refs.push_back("expression:" + src.provenance.source_id);
  if (src.annotation) b.provenance_refs.push_back("annotator:" + src.annotation->annotator_id);
  if (edge.revision_of) b.provenance_refs.push_back("revision-of:" + *edge.revision_of);
  return b;
}

std::string_view to_string(ReportFormat f) { return f == ReportFormat::html ? "html" : "text"; }

namespace {

struct Section {
  std::string title;
  std::vector<std::pair<std::string, std::string>> rows;
};

std::vector<Section> report_sections(const OntologyGraph& graph, const Edge& edge,
                                     const std::vector<ValidationDecision>& decisions) {
  const ExplanationBundle& b = *edge.explanation;
  const auto& src = graph.expression(edge.src);
  std::vector<Section> out;

  Section expr{"Expression", {}};
  expr.rows.push_back({"text", src.surface_text});
  expr.rows.push_back({"language", src.language});
  if (src.gloss) expr.rows.push_back({"gloss", *src.gloss});
  expr.rows.push_back({"node", src.id + " (" + std::string(to_string(src.status)) + ")"});
  if (src.annotation) {
    const auto& a = *src.annotation;
    expr.rows.push_back(
        {"annotation", std::string(to_string(a.semantic_category)) + ", markers: " +
                           (a.cultural_markers.empty() ? "none" : markers_text(a.cultural_markers)) +
                           ", severity: " + std::string(to_string(a.severity)) +
                           ", temporal: " + std::string(to_string(a.temporal))});
  } else {
    expr.rows.push_back({"annotation", "missing (explanation incomplete)"});
  }
  out.push_back(std::move(expr));

  Section mapping{"Mapping", {}};
  mapping.rows.push_back({"edge", edge.id});
  mapping.rows.push_back({"type", std::string(to_string(edge.edge_type))});
  mapping.rows.push_back({"status", std::string(to_string(edge.status))});
  mapping.rows.push_back({"target", node_label(graph, edge.dst)});
  if (!edge.rationale.empty()) mapping.rows.push_back({"rationale", edge.rationale});
  out.push_back(std::move(mapping));

  out.push_back({"Perspectives",
                 {{"linguistic", b.linguistic}, {"cultural", b.cultural}, {"clinical", b.clinical}}});

  Section evidence{"Evidence", {}};
  std::vector<std::string> toks;
  for (const auto& t : b.token_contributions) toks.push_back(t.token + " " + signed4(t.score));
  evidence.rows.push_back({"token contributions", toks.empty() ? "none" : text::join(toks, "; ")});
  evidence.rows.push_back(
      {"matched rules", b.matched_rules.empty() ? "none" : text::join(b.matched_rules, ", ")});
  std::vector<std::string> ex;
  for (const auto& e : b.nearest_examples) {
    ex.push_back(e.edge_id + " " + fixed4(e.similarity) + " \"" +
                 graph.expression(graph.edge(e.edge_id).src).surface_text + "\"");
  }
  evidence.rows.push_back({"validated examples", ex.empty() ? "none" : text::join(ex, "; ")});
  out.push_back(std::move(evidence));

  Section conf{"Confidence", {}};
  conf.rows.push_back({"model", fixed4(edge.model_confidence)});
  conf.rows.push_back({"validator agreement",
                       edge.validator_agreement ? fixed4(*edge.validator_agreement) : "none"});
  conf.rows.push_back({"combined", fixed4(b.confidence)});
  for (const auto& d : decisions) {
    std::string v = std::string(to_string(d.verdict));
    if (!d.comment.empty()) v += " (" + d.comment + ")";
    conf.rows.push_back({d.validator_id + " [" + std::string(to_string(d.role)) + "]", v});
  }
  if (edge.adjudication_note) conf.rows.push_back({"adjudication", *edge.adjudication_note});
  out.push_back(std::move(conf));

  Section prov{"Provenance", {}};
  prov.rows.push_back({"source", std::string(to_string(edge.provenance.source_kind)) + " " +
                                     edge.provenance.source_id});
  prov.rows.push_back({"collected", text::format_timestamp(edge.provenance.collected_at)});
  prov.rows.push_back({"expression source",
                       std::string(to_string(src.provenance.source_kind)) + " " +
                           src.provenance.source_id});
  prov.rows.push_back({"references", text::join(b.provenance_refs, ", ")});
  prov.rows.push_back({"bundle version", std::to_string(b.version)});
  out.push_back(std::move(prov));

  Section alt{"Alternatives", {}};
  if (b.contrastive) alt.rows.push_back({"contrast", b.contrastive->text});
  if (edge.parallel_group) {
    for (const auto& id : graph.parallel_group(*edge.parallel_group)) {
      const Edge& p = graph.edge(id);
      alt.rows.push_back({"retained " + id, node_label(graph, p.dst) + ": " +
                                                p.parallel_reason.value_or("")});
    }
  }
  if (edge.revision_of) alt.rows.push_back({"revises", *edge.revision_of});
  if (alt.rows.empty()) alt.rows.push_back({"none", "no competing candidate recorded"});
  out.push_back(std::move(alt));
  return out;
}

}  // namespace

std::string render_report(const OntologyGraph& graph, const EdgeId& edge_id,
                          const std::vector<ValidationDecision>& decisions, ReportFormat format) {
  const Edge& edge = graph.edge(edge_id);
  if (!edge.explanation) throw StateError("edge " + edge_id + " has no explanation bundle");
  const auto sections = report_sections(graph, edge, decisions);
  std::string out;
  if (format == ReportFormat::text) {
    out = "Explanation report " + edge.id + "\n";
    for (const auto& s : sections) {
      out += "\n" + s.title + "\n";
      for (const auto& [k, v] : s.rows) out += "  " + k + ": " + v + "\n";
    }
    return out;
  }
  out = "<!DOCTYPE html>\n<html lang=\"en\">\n<head><meta charset=\"utf-8\"><title>" +
        html_escape(edge.id) + "</title></head>\n<body>\n<h1>Explanation report " +
        html_escape(edge.id) + "</h1>\n";
  for (const auto& s : sections) {
    out += "<section>\n<h2>" + html_escape(s.title) + "</h2>\n<dl>\n";
    for (const auto& [k, v] : s.rows) {
      out += "<dt>" + html_escape(k) + "</dt><dd>" + html_escape(v) + "</dd>\n";
    }
    out += "</dl>\n</section>\n";
  }
  out += "</body>\n</html>\n";
  return out;
}

std::string ReportCache::get(const OntologyGraph& graph, const EdgeId& edge_id,
                             const std::vector<ValidationDecision>& decisions,
                             ReportFormat format) {
  const Edge& edge = graph.edge(edge_id);
  if (!edge.explanation) throw StateError("edge " + edge_id + " has no explanation bundle");
  Json state = Json{{"edge", edge}, {"decisions", decisions}};
  if (edge.parallel_group) {
    for (const auto& id : graph.parallel_group(*edge.parallel_group)) {
      state["group"].push_back(graph.edge(id));
    }
  }
  auto key = std::make_tuple(edge_id, edge.explanation->version, format, state.dump());
  std::lock_guard lock(mutex_);
  if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  std::string report = render_report(graph, edge_id, decisions, format);
  cache_.emplace(std::move(key), report);
  return report;
}

std::size_t ReportCache::size() const {
  std::lock_guard lock(mutex_);
  return cache_.size();
}

}  // namespace clpde
