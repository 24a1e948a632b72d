#include "clpde/engine.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "clpde/bundled.hpp"
#include "clpde/error.hpp"
#include "clpde/fixtures.hpp"
#include "clpde/text.hpp"

namespace clpde {

namespace {

std::string read_file(const std::filesystem::path& path, const std::string& what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + what + " " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("failed reading " + what + " " + path.string());
  return buf.str();
}

template <typename T>
T config_field(const Json& j, const char* name, const std::string& where) {
  try {
    return j.at(name).get<T>();
  } catch (const Json::exception&) {
    throw ConfigError(where + "." + name + " has the wrong type");
  }
}

Timestamp system_now() {
  return std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
}

bool settled(EdgeStatus s) {
  return s == EdgeStatus::Accepted || s == EdgeStatus::ParallelRetained;
}

Json transitions_json(const OntologyGraph& g, std::size_t from) {
  Json out = Json::array();
  const auto& all = g.transitions();
  for (std::size_t i = from; i < all.size(); ++i) out.push_back(all[i]);
  return out;
}

}  // namespace

ServiceConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir) {
  Json j;
  try {
    j = Json::parse(json_text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> known{"workflow",      "alignment", "lexicon", "rules",
                                           "concepts",      "state",     "host",    "port",
                                           "tokens"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError(key + " is not a known config field");
  }
  ServiceConfig c;
  if (j.contains("workflow")) c.workflow = j["workflow"].get<WorkflowConfig>();
  if (j.contains("alignment")) {
    const Json& a = j["alignment"];
    if (!a.is_object()) throw ConfigError("alignment must be an object");
    for (const auto& [key, _] : a.items()) {
      if (key != "provider" && key != "tau_align" && key != "k") {
        throw ConfigError("alignment." + key + " is not a known setting");
      }
    }
    if (a.contains("provider")) c.alignment.provider = config_field<std::string>(a, "provider", "alignment");
    if (a.contains("tau_align")) c.alignment.tau_align = config_field<double>(a, "tau_align", "alignment");
    if (a.contains("k")) {
      if (!a["k"].is_number_unsigned() || a["k"].get<std::size_t>() == 0) {
        throw ConfigError("alignment.k must be a positive integer");
      }
      c.alignment.k = a["k"].get<std::size_t>();
    }
    if (!(c.alignment.tau_align >= 0.0 && c.alignment.tau_align <= 1.0)) {
      throw ConfigError("alignment.tau_align must lie in [0,1]");
    }
    if (c.alignment.provider != HashedTokenProvider().id()) {
      throw ConfigError("alignment.provider '" + c.alignment.provider + "' is not available (have " +
                        HashedTokenProvider().id() + ")");
    }
  }
  auto path = [&](const char* name) -> std::optional<std::filesystem::path> {
    if (!j.contains(name) || j[name].is_null()) return std::nullopt;
    std::filesystem::path p(config_field<std::string>(j, name, "config"));
    if (p.empty()) throw ConfigError(std::string(name) + " is an empty path");
    return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  };
  c.lexicon_path = path("lexicon");
  c.rules_path = path("rules");
  c.concepts_path = path("concepts");
  c.state_path = path("state");
  if (j.contains("host")) c.host = config_field<std::string>(j, "host", "config");
  if (j.contains("port")) {
    if (!j["port"].is_number_integer()) throw ConfigError("port must be an integer");
    c.port = j["port"].get<int>();
    if (c.port < 0 || c.port > 65535) throw ConfigError("port must lie in [0,65535]");
  }
  if (j.contains("tokens")) {
    if (!j["tokens"].is_object()) throw ConfigError("tokens must map validator ids to tokens");
    for (const auto& [id, tok] : j["tokens"].items()) {
      if (!tok.is_string() || tok.get<std::string>().empty()) {
        throw ConfigError("tokens." + id + " must be a non-empty string");
      }
      c.tokens[id] = tok.get<std::string>();
    }
  }
  return c;
}

ServiceConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_file(path, "config"), path.parent_path());
}

Json config_to_json(const ServiceConfig& c) {
  auto opt = [](const std::optional<std::filesystem::path>& p) {
    return p ? Json(p->string()) : Json(nullptr);
  };
  return Json{{"workflow", c.workflow},
              {"alignment",
               {{"provider", c.alignment.provider},
                {"tau_align", c.alignment.tau_align},
                {"k", c.alignment.k}}},
              {"lexicon", opt(c.lexicon_path)},
              {"rules", opt(c.rules_path)},
              {"concepts", opt(c.concepts_path)},
              {"state", opt(c.state_path)},
              {"host", c.host},
              {"port", c.port},
              {"tokens", c.tokens}};
}

std::vector<ConceptSeed> parse_concepts(std::string_view json_text) {
  Json doc;
  try {
    doc = Json::parse(json_text);
  } catch (const Json::parse_error& e) {
    throw ParseError("concepts", e.what());
  }
  if (!doc.is_array()) throw ParseError("concepts", "expected a JSON array");
  std::vector<ConceptSeed> out;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const std::string where = "concepts[" + std::to_string(i) + "]";
    try {
      ConceptSeed s;
      s.code = doc[i].at("code").get<std::string>();
      s.framework = enum_from_string<Framework>(doc[i].at("framework").get<std::string>());
      s.label = doc[i].at("label").get<std::string>();
      if (doc[i].contains("description") && !doc[i]["description"].is_null()) {
        s.description = doc[i]["description"].get<std::string>();
      }
      out.push_back(std::move(s));
    } catch (const std::exception& e) {
      throw ParseError(where, e.what());
    }
  }
  return out;
}

Resources Resources::load(const ServiceConfig& config) {
  Resources r;
  r.provider = std::make_shared<HashedTokenProvider>();
  const std::string lexicon = config.lexicon_path ? read_file(*config.lexicon_path, "lexicon")
                                                  : std::string(bundled::lexicon_json());
  r.lexicon = std::make_shared<LexiconProposer>(parse_lexicon(lexicon));
  const std::string rules = config.rules_path ? read_file(*config.rules_path, "rules")
                                              : std::string(bundled::rules_json());
  r.rules = parse_rules(rules);
  const std::string concepts = config.concepts_path ? read_file(*config.concepts_path, "concepts")
                                                    : std::string(bundled::concepts_json());
  r.concepts = parse_concepts(concepts);
  return r;
}

std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::node_added: return "node_added";
    case EventKind::edge_added: return "edge_added";
    case EventKind::embedding_registered: return "embedding_registered";
    case EventKind::edge_enqueued: return "edge_enqueued";
    case EventKind::decision_submitted: return "decision_submitted";
    case EventKind::adjudication_resolved: return "adjudication_resolved";
    case EventKind::threshold_updated: return "threshold_updated";
    case EventKind::bundle_generated: return "bundle_generated";
  }
  return "unknown";
}

EventKind event_kind_from_string(std::string_view s) {
  for (auto k : {EventKind::node_added, EventKind::edge_added, EventKind::embedding_registered,
                 EventKind::edge_enqueued, EventKind::decision_submitted,
                 EventKind::adjudication_resolved, EventKind::threshold_updated,
                 EventKind::bundle_generated}) {
    if (to_string(k) == s) return k;
  }
  throw ValidationError("unknown event kind '" + std::string(s) + "'");
}

void to_json(Json& j, const EventRecord& v) {
  j = Json{{"sequence", v.sequence},
           {"kind", std::string(to_string(v.kind))},
           {"at", text::format_timestamp(v.at)},
           {"payload", v.payload}};
  if (v.idempotency_key) j["idempotency_key"] = *v.idempotency_key;
  if (v.response) j["response"] = *v.response;
}

void from_json(const Json& j, EventRecord& v) {
  v.sequence = j.at("sequence").get<std::uint64_t>();
  v.kind = event_kind_from_string(j.at("kind").get<std::string>());
  v.at = text::parse_timestamp(j.at("at").get<std::string>());
  v.payload = j.at("payload");
  v.idempotency_key.reset();
  v.response.reset();
  if (j.contains("idempotency_key")) v.idempotency_key = j["idempotency_key"].get<std::string>();
  if (j.contains("response")) v.response = j["response"];
}

void from_json(const Json& j, ProposeRequest& v) {
  v = ProposeRequest{};
  v.mode = j.at("mode").get<std::string>();
  if (v.mode != "intra" && v.mode != "cross" && v.mode != "concept") {
    throw ValidationError("mode must be intra, cross or concept, got '" + v.mode + "'");
  }
  const Json& p = j.contains("params") ? j["params"] : j;
  auto opt = [&](const char* key, std::optional<std::string>& out) {
    if (p.contains(key) && !p[key].is_null()) out = p[key].get<std::string>();
  };
  opt("language", v.language);
  opt("lang_a", v.lang_a);
  opt("lang_b", v.lang_b);
  opt("node", v.node);
  if (p.contains("tau") && !p["tau"].is_null()) v.tau = p["tau"].get<double>();
  if (p.contains("k") && !p["k"].is_null()) v.k = p["k"].get<std::size_t>();
}

void from_json(const Json& j, AdjudicationRequest& v) {
  v = AdjudicationRequest{};
  v.outcome = adjudication_outcome_from_string(j.at("outcome").get<std::string>());
  if (j.contains("parallel_edges")) v.parallel_edges = j["parallel_edges"].get<std::vector<EdgeId>>();
  if (j.contains("reasons")) v.reasons = j["reasons"].get<std::vector<std::string>>();
  if (j.contains("note")) v.note = j["note"].get<std::string>();
}

EfficiencyReport efficiency_report(const SystemState& state,
                                   const std::optional<std::set<std::string>>& truth) {
  EfficiencyReport r;
  r.decisions_used = state.decisions_logged;
  std::set<std::string> kept;
  for (const auto& [_, e] : state.graph.edges()) {
    if (e.status != EdgeStatus::Proposed && e.status != EdgeStatus::UnderValidation) {
      ++r.reviewed_edges;
    }
    if (e.status == EdgeStatus::Accepted) {
      ++r.accepted_edges;
      kept.insert(candidate_key(e.src, e.dst, e.edge_type));
    }
  }
  if (r.accepted_edges > 0) {
    r.decisions_per_accepted_edge =
        static_cast<double>(r.decisions_used) / static_cast<double>(r.accepted_edges);
  }
  if (truth) {
    const auto pr = precision_recall(kept, *truth);
    r.accepted_edge_precision = pr.precision;
    r.accepted_edge_recall = pr.recall;
    r.f1 = pr.f1;
  }
  return r;
}

struct Engine::Txn {
  SystemState& state;
  Timestamp at;
  std::vector<EventRecord> events;

  void emit(EventKind kind, Json payload) {
    EventRecord e;
    e.sequence = ++state.sequence;
    e.kind = kind;
    e.payload = std::move(payload);
    e.at = at;
    events.push_back(std::move(e));
  }
};

namespace {

// Effects shared by live requests and replay. Each returns what the request
// reports back; replay ignores the value.

void register_expression_embedding(SystemState& s, const Resources& r, const NodeId& id) {
  if (s.store.find(r.provider->id(), id)) return;
  s.store.register_embedding(s.graph, id, r.provider->embed(s.graph.expression(id).surface_text),
                             r.provider->id());
}

void attach_bundle(SystemState& s, const Resources& r, const EdgeId& id) {
  ExplainContext ctx{s.graph, s.store, *r.provider, r.rules};
  const ExplanationBundle bundle = generate_bundle(ctx, id);
  s.graph.update_edge(id, [&](Edge& e) { e.explanation = bundle; });
}

void bundle_settled(SystemState& s, const Resources& r, std::size_t transitions_from) {
  const auto& all = s.graph.transitions();
  std::set<EdgeId> done;
  for (std::size_t i = transitions_from; i < all.size(); ++i) {
    if (settled(all[i].to) && done.insert(all[i].edge_id).second) attach_bundle(s, r, all[i].edge_id);
  }
}

Json apply_decision(SystemState& s, const Resources& r, const ValidationDecision& d, Timestamp at) {
  const std::size_t before = s.graph.transitions().size();
  const DecisionOutcome out = s.workflow.submit_decision(s.graph, d);
  ++s.decisions_logged;
  if (out.revision) s.workflow.enqueue(s.graph, out.revision->id, at);
  bundle_settled(s, r, before);
  Json resp{{"edge", s.graph.edge(out.edge.id)}};
  resp["revision"] = out.revision ? Json(s.graph.edge(out.revision->id)) : Json(nullptr);
  return resp;
}

Json apply_adjudication(SystemState& s, const Resources& r, const EdgeId& id,
                        const AdjudicationRequest& req) {
  const std::size_t before = s.graph.transitions().size();
  const auto edges = s.workflow.resolve_adjudication(s.graph, id, req.outcome, req.parallel_edges,
                                                     req.reasons, req.note);
  bundle_settled(s, r, before);
  Json out = Json::array();
  for (const auto& e : edges) out.push_back(s.graph.edge(e.id));
  return Json{{"edges", out}};
}

std::vector<EdgeStatus> feedback_window(const SystemState& s) {
  std::vector<EdgeStatus> window;
  for (const auto& t : s.graph.transitions()) {
    if (t.to == EdgeStatus::Accepted || t.to == EdgeStatus::Rejected ||
        t.to == EdgeStatus::ParallelRetained || t.to == EdgeStatus::Superseded) {
      window.push_back(t.to);
    }
  }
  const std::size_t n = s.workflow.config().feedback_window;
  if (window.size() > n) window.erase(window.begin(), window.end() - static_cast<long>(n));
  return window;
}

}  // namespace

Engine::Engine(ServiceConfig config, Clock clock)
    : config_(std::move(config)),
      resources_(Resources::load(config_)),
      clock_(clock ? std::move(clock) : Clock(system_now)) {
  auto initial = std::make_shared<SystemState>();
  initial->workflow = ValidationWorkflow(config_.workflow);
  current_ = std::move(initial);
  if (config_.state_path && std::filesystem::exists(*config_.state_path)) {
    replay(read_file(*config_.state_path, "state log"));
  }
}

std::shared_ptr<const SystemState> Engine::snapshot() const {
  std::lock_guard lock(snapshot_mutex_);
  return current_;
}

void Engine::publish(std::shared_ptr<const SystemState> next) {
  std::lock_guard lock(snapshot_mutex_);
  current_ = std::move(next);
}

void Engine::persist(const std::vector<EventRecord>& events) {
  std::vector<std::string> lines;
  std::string block;
  for (const auto& e : events) {
    lines.push_back(Json(e).dump());
    block += lines.back() + "\n";
  }
  if (config_.state_path) {
    std::ofstream out(*config_.state_path, std::ios::binary | std::ios::app);
    if (!out) throw IoError("cannot open state log " + config_.state_path->string());
    out << block;
    out.flush();
    if (!out) throw IoError("failed writing state log " + config_.state_path->string());
  }
  std::lock_guard lock(log_mutex_);
  log_lines_.insert(log_lines_.end(), lines.begin(), lines.end());
}

Json Engine::transact(const Key& key, const std::function<Json(Txn&)>& body) {
  std::lock_guard lock(write_mutex_);
  const auto cur = snapshot();
  if (key) {
    if (key->empty()) throw ValidationError("idempotency key is empty");
    if (auto it = cur->idempotent.find(*key); it != cur->idempotent.end()) return it->second;
  }
  auto next = std::make_shared<SystemState>(*cur);
  Txn txn{*next, clock_(), {}};
  Json response = body(txn);
  if (!txn.events.empty()) {
    if (key) {
      txn.events.back().idempotency_key = *key;
      txn.events.back().response = response;
      next->idempotent[*key] = response;
    }
    persist(txn.events);
  }
  publish(std::move(next));
  return response;
}

void Engine::apply(SystemState& s, const EventRecord& ev) const {
  const Json& p = ev.payload;
  switch (ev.kind) {
    case EventKind::node_added: {
      const std::string kind = p.at("kind").get<std::string>();
      if (kind == "expression") {
        const auto node = p.at("node").get<ExpressionNode>();
        s.graph.restore_expression(node);
        register_expression_embedding(s, resources_, node.id);
      } else if (kind == "concept") {
        s.graph.restore_concept(p.at("node").get<ConceptNode>());
      } else {
        throw ValidationError("unknown node kind '" + kind + "'");
      }
      break;
    }
    case EventKind::edge_added: {
      const auto edge = p.at("edge").get<Edge>();
      s.graph.restore_edge(edge);
      if (edge.status == EdgeStatus::UnderValidation || edge.status == EdgeStatus::Adjudication) {
        s.workflow.adopt(s.graph, edge.id, ev.at);
      }
      break;
    }
    case EventKind::embedding_registered: {
      const auto rec = p.at("record").get<EmbeddingRecord>();
      s.store.register_embedding(s.graph, rec.node_id, rec.vector, rec.provider_id);
      break;
    }
    case EventKind::edge_enqueued:
      s.workflow.enqueue(s.graph, p.at("edge_id").get<EdgeId>(), ev.at);
      break;
    case EventKind::decision_submitted:
    case EventKind::adjudication_resolved: {
      const std::size_t before = s.graph.transitions().size();
      if (ev.kind == EventKind::decision_submitted) {
        apply_decision(s, resources_, p.at("decision").get<ValidationDecision>(), ev.at);
      } else {
        apply_adjudication(s, resources_, p.at("edge_id").get<EdgeId>(),
                           p.at("request").get<AdjudicationRequest>());
      }
      if (transitions_json(s.graph, before) != p.at("transitions")) {
        throw StateError("replayed transitions differ from the recorded ones");
      }
      break;
    }
    case EventKind::threshold_updated: {
      const auto window = p.at("window").get<std::vector<std::string>>();
      std::vector<EdgeStatus> statuses;
      for (const auto& w : window) statuses.push_back(enum_from_string<EdgeStatus>(w));
      const double tau = s.workflow.apply_threshold_update(statuses);
      if (tau != p.at("tau").get<double>()) {
        throw StateError("replayed threshold differs from the recorded one");
      }
      break;
    }
    case EventKind::bundle_generated: {
      const auto bundle = p.at("bundle").get<ExplanationBundle>();
      s.graph.update_edge(p.at("edge_id").get<EdgeId>(), [&](Edge& e) { e.explanation = bundle; });
      break;
    }
  }
}

void Engine::replay(std::string_view log) {
  std::lock_guard lock(write_mutex_);
  const auto cur = snapshot();
  if (cur->sequence != 0) throw StateError("replay needs an engine without events");
  auto next = std::make_shared<SystemState>(*cur);
  std::vector<std::string> lines;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < log.size()) {
    std::size_t end = log.find('\n', pos);
    if (end == std::string_view::npos) end = log.size();
    const std::string line(log.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (text::trim(line).empty()) continue;
    const std::string where = "event at line " + std::to_string(line_no);
    EventRecord ev;
    try {
      ev = Json::parse(line).get<EventRecord>();
    } catch (const std::exception& e) {
      throw ParseError(where, e.what());
    }
    const std::string located = "event " + std::to_string(ev.sequence) + " (" +
                                std::string(to_string(ev.kind)) + ", line " +
                                std::to_string(line_no) + ")";
    if (ev.sequence != next->sequence + 1) {
      throw ParseError(located, "expected sequence " + std::to_string(next->sequence + 1));
    }
    try {
      apply(*next, ev);
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(located, e.what());
    }
    next->sequence = ev.sequence;
    if (ev.idempotency_key && ev.response) next->idempotent[*ev.idempotency_key] = *ev.response;
    lines.push_back(line);
  }
  {
    std::lock_guard log_lock(log_mutex_);
    log_lines_ = std::move(lines);
  }
  publish(std::move(next));
}

Json Engine::ingest(std::istream& jsonl, const Key& key) {
  const ParsedCorpus parsed = parse_corpus(jsonl);
  return transact(key, [&](Txn& t) {
    std::vector<CorpusRecord> records;
    for (const auto& [_, r] : parsed.records) records.push_back(r);
    IngestReport report;
    report.rejected = parsed.errors.size();
    report.errors = parsed.errors;
    for (const auto& [line, record] : parsed.records) {
      const IngestReport one = ingest_corpus(t.state.graph, std::span(&record, 1));
      report.accepted += one.accepted;
      report.rejected += one.rejected;
      for (const auto& e : one.errors) {
        report.errors.push_back("line " + std::to_string(line) + e.substr(e.find(':')));
      }
      for (const auto& id : one.created) {
        report.created.push_back(id);
        register_expression_embedding(t.state, resources_, id);
        t.emit(EventKind::node_added,
               {{"kind", "expression"}, {"node", t.state.graph.expression(id)}});
      }
    }
    return Json(report);
  });
}

Json Engine::ingest(std::span<const CorpusRecord> records, const Key& key) {
  return transact(key, [&](Txn& t) {
    const IngestReport report = ingest_corpus(t.state.graph, records);
    for (const auto& id : report.created) {
      register_expression_embedding(t.state, resources_, id);
      t.emit(EventKind::node_added, {{"kind", "expression"}, {"node", t.state.graph.expression(id)}});
    }
    return Json(report);
  });
}

Json Engine::load_concepts(const std::vector<ConceptSeed>& concepts, const Key& key) {
  return transact(key, [&](Txn& t) {
    Json created = Json::array();
    Json ids = Json::array();
    for (const auto& c : concepts) {
      const std::size_t before = t.state.graph.concepts().size();
      const NodeId id = t.state.graph.add_concept(c.code, c.framework, c.label, c.description);
      ids.push_back(id);
      if (t.state.graph.concepts().size() > before) {
        created.push_back(id);
        t.emit(EventKind::node_added, {{"kind", "concept"}, {"node", t.state.graph.concept_node(id)}});
      }
    }
    return Json{{"concepts", ids}, {"created", created}};
  });
}

Json Engine::align(const AlignRequest& request, const Key& key) {
  return transact(key, [&](Txn& t) {
    const std::size_t before = t.state.graph.expressions().size();
    AlignmentResult result = align_new_expression(t.state.graph, t.state.store, *resources_.provider,
                                                  request, config_.alignment.tau_align, t.at);
    if (result.new_node && t.state.graph.expressions().size() > before) {
      t.emit(EventKind::node_added,
             {{"kind", "expression"}, {"node", t.state.graph.expression(*result.new_node)}});
    }
    if (result.proposed_edge) {
      const EdgeId id = result.proposed_edge->id;
      t.emit(EventKind::edge_added, {{"edge", t.state.graph.edge(id)}});
      t.state.workflow.enqueue(t.state.graph, id, t.at);
      t.emit(EventKind::edge_enqueued, {{"edge_id", id}});
      result.proposed_edge = t.state.graph.edge(id);
    }
    return Json(result);
  });
}

Json Engine::propose(const ProposeRequest& req, const Key& key) {
  return transact(key, [&](Txn& t) {
    SystemState& s = t.state;
    const double tau = req.tau.value_or(s.workflow.config().tau);
    if (!(tau >= 0.0 && tau <= 1.0)) throw ValidationError("tau must lie in [0,1]");
    const std::size_t k = req.k.value_or(config_.alignment.k);
    if (k == 0) throw ValidationError("k must be at least 1");

    // Lists per source node, unfiltered, so runner-ups see every candidate.
    std::vector<std::vector<CandidateEdge>> lists;
    if (req.mode == "concept") {
      std::vector<NodeId> nodes;
      if (req.node) {
        nodes.push_back(*req.node);
      } else {
        for (const auto& [id, _] : s.graph.expressions()) nodes.push_back(id);
      }
      for (const auto& n : nodes) {
        lists.push_back(propose_expression_concept(s.graph, n, *resources_.lexicon));
      }
    } else {
      ProposalParams params{resources_.provider->id(), k, 0.0};
      std::vector<CandidateEdge> all;
      if (req.mode == "intra") {
        if (!req.language) throw ValidationError("intra mode needs a language");
        all = propose_intra_lingual(s.graph, s.store, *req.language, params);
      } else {
        if (!req.lang_a || !req.lang_b) throw ValidationError("cross mode needs lang_a and lang_b");
        all = propose_cross_lingual(s.graph, s.store, *req.lang_a, *req.lang_b, params);
      }
      std::map<NodeId, std::vector<CandidateEdge>> by_src;
      for (const auto& c : all) by_src[c.src].push_back(c);
      for (auto& [_, l] : by_src) lists.push_back(std::move(l));
    }

    Json created = Json::array();
    for (const auto& list : lists) {
      for (const auto& c : list) {
        if (c.score < tau) continue;
        if (s.graph.find_edge(c.src, c.dst, c.edge_type)) continue;
        Provenance prov;
        prov.source_kind = SourceKind::synthetic;
        prov.source_id = c.proposer_id;
        prov.collected_at = t.at;
        prov.anonymized = true;
        const Edge e = s.graph.add_edge(c.src, c.dst, c.edge_type, c.score, c.rationale, prov);
        const CandidateEdge* best = nullptr;
        for (const auto& o : list) {
          if (o.dst == c.dst) continue;
          if (!best || o.score > best->score) best = &o;
        }
        if (best) {
          s.graph.update_edge(e.id, [&](Edge& x) {
            x.runner_up = Alternative{best->dst, best->score, best->rationale};
          });
        }
        t.emit(EventKind::edge_added, {{"edge", s.graph.edge(e.id)}});
        s.workflow.enqueue(s.graph, e.id, t.at);
        t.emit(EventKind::edge_enqueued, {{"edge_id", e.id}});
        created.push_back(s.graph.edge(e.id));
      }
    }
    return Json{{"tau", tau}, {"k", k}, {"edges", created}};
  });
}

Json Engine::decide(const ValidationDecision& decision, const Key& key) {
  return transact(key, [&](Txn& t) {
    ValidationDecision d = decision;
    if (d.decided_at == Timestamp{}) d.decided_at = t.at;
    const std::size_t before = t.state.graph.transitions().size();
    Json resp = apply_decision(t.state, resources_, d, t.at);
    t.emit(EventKind::decision_submitted,
           {{"decision", d}, {"transitions", transitions_json(t.state.graph, before)}});
    return resp;
  });
}

Json Engine::adjudicate(const EdgeId& edge_id, const AdjudicationRequest& request, const Key& key) {
  return transact(key, [&](Txn& t) {
    const std::size_t before = t.state.graph.transitions().size();
    Json resp = apply_adjudication(t.state, resources_, edge_id, request);
    Json req{{"outcome", std::string(to_string(request.outcome))},
             {"parallel_edges", request.parallel_edges},
             {"reasons", request.reasons},
             {"note", request.note}};
    t.emit(EventKind::adjudication_resolved, {{"edge_id", edge_id},
                                              {"request", req},
                                              {"transitions", transitions_json(t.state.graph, before)}});
    return resp;
  });
}

Json Engine::explain(const EdgeId& edge_id, const Key& key) {
  return transact(key, [&](Txn& t) {
    attach_bundle(t.state, resources_, edge_id);
    const ExplanationBundle& b = *t.state.graph.edge(edge_id).explanation;
    t.emit(EventKind::bundle_generated, {{"edge_id", edge_id}, {"bundle", b}});
    return Json(b);
  });
}

Json Engine::update_thresholds(const Key& key) {
  return transact(key, [&](Txn& t) {
    const auto window = feedback_window(t.state);
    const double old_tau = t.state.workflow.config().tau;
    const double tau = t.state.workflow.apply_threshold_update(window);
    Json names = Json::array();
    for (auto s : window) names.push_back(enum_json(s));
    t.emit(EventKind::threshold_updated, {{"window", names}, {"previous_tau", old_tau}, {"tau", tau}});
    return Json{{"previous_tau", old_tau}, {"tau", tau}, {"window_size", window.size()}};
  });
}

Json Engine::import_graph(std::string_view document, const Key& key) {
  const OntologyGraph incoming = OntologyGraph::import_graph(document);
  return transact(key, [&](Txn& t) {
    std::size_t nodes = 0, edges = 0;
    for (const auto& [id, n] : incoming.expressions()) {
      if (t.state.graph.has_node(id)) {
        t.state.graph.restore_expression(n);  // conflict check only
        continue;
      }
      Json p{{"kind", "expression"}, {"node", n}};
      t.emit(EventKind::node_added, p);
      apply(t.state, t.events.back());
      ++nodes;
    }
    for (const auto& [id, n] : incoming.concepts()) {
      if (t.state.graph.has_node(id)) {
        t.state.graph.restore_concept(n);
        continue;
      }
      t.emit(EventKind::node_added, {{"kind", "concept"}, {"node", n}});
      apply(t.state, t.events.back());
      ++nodes;
    }
    for (const auto& [id, e] : incoming.edges()) {
      if (t.state.graph.has_edge(id)) {
        t.state.graph.restore_edge(e);
        continue;
      }
      t.emit(EventKind::edge_added, {{"edge", e}});
      apply(t.state, t.events.back());
      ++edges;
    }
    return Json{{"nodes_added", nodes}, {"edges_added", edges}};
  });
}

Json Engine::import_embeddings(std::istream& jsonl, const Key& key) {
  std::vector<EmbeddingRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(jsonl, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      records.push_back(Json::parse(line).get<EmbeddingRecord>());
    } catch (const std::exception& e) {
      throw ParseError("line " + std::to_string(line_no), e.what());
    }
  }
  if (jsonl.bad()) throw IoError("embedding stream failed", records.size());
  return transact(key, [&](Txn& t) {
    for (const auto& r : records) {
      if (r.dim != r.vector.size()) {
        throw ValidationError("embedding for " + r.node_id + " declares dim " +
                              std::to_string(r.dim) + " but has " +
                              std::to_string(r.vector.size()) + " values");
      }
      t.state.store.register_embedding(t.state.graph, r.node_id, r.vector, r.provider_id);
      t.emit(EventKind::embedding_registered, {{"record", r}});
    }
    return Json{{"registered", records.size()}};
  });
}

std::string Engine::export_graph() const { return snapshot()->graph.export_graph(); }

GraphMetrics Engine::metrics() const { return connectivity_metrics(snapshot()->graph); }

Json Engine::metrics_report() const {
  const auto s = snapshot();
  Json j = connectivity_metrics(s->graph);
  const auto coherence = semantic_coherence(s->graph, s->store, resources_.provider->id());
  j["semantic_coherence"] = coherence ? Json(*coherence) : Json(nullptr);
  j["hitl_efficiency"] = efficiency_report(*s, std::nullopt);
  return j;
}

std::vector<QueueItem> Engine::queue(Role role, std::size_t batch_size) const {
  const auto s = snapshot();
  return s->workflow.next_batch(s->graph, role, batch_size);
}

Json Engine::explanation(const EdgeId& edge_id) const {
  const auto s = snapshot();
  const Edge& e = s->graph.edge(edge_id);
  ExplanationBundle bundle;
  bool stored = e.explanation.has_value();
  if (stored) {
    bundle = *e.explanation;
  } else {
    ExplainContext ctx{s->graph, s->store, *resources_.provider, resources_.rules};
    bundle = generate_bundle(ctx, edge_id);
  }
  Json parallel = Json::array();
  if (e.parallel_group) {
    for (const auto& id : s->graph.parallel_group(*e.parallel_group)) {
      const Edge& p = s->graph.edge(id);
      parallel.push_back({{"edge_id", id}, {"dst", p.dst}, {"reason", p.parallel_reason.value_or("")}});
    }
  }
  return Json{{"edge", e},
              {"bundle", bundle},
              {"stored", stored},
              {"decisions", s->workflow.decisions(edge_id)},
              {"parallel", parallel}};
}

std::string Engine::report(const EdgeId& edge_id, ReportFormat format) {
  if (!snapshot()->graph.edge(edge_id).explanation) explain(edge_id);
  const auto s = snapshot();
  return reports_.get(s->graph, edge_id, s->workflow.decisions(edge_id), format);
}

EfficiencyReport Engine::efficiency(const std::optional<std::set<std::string>>& truth) const {
  return efficiency_report(*snapshot(), truth);
}

Json Engine::simulate(const Json& request) const {
  SimulationConfig config;
  Json cfg = request;
  std::vector<CandidateEdge> candidates;
  const bool bundled_fixture = !request.contains("candidates");
  if (!bundled_fixture) {
    candidates = request.at("candidates").get<std::vector<CandidateEdge>>();
    cfg.erase("candidates");
  }
  config = cfg.get<SimulationConfig>();
  const Resources& r = resources_;
  WorkflowConfig wf = config_.workflow;
  wf.required_roles = {Role::linguistic, Role::clinical, Role::cultural};

  if (bundled_fixture) {
    const auto& fx = fixtures::simulation_fixture();
    if (!request.contains("true_edge_set")) config.true_edge_set = fx.truth;
    EmbeddingStore store = fx.store;
    SettledHook hook = [&](OntologyGraph& g, const EdgeId& id) {
      ExplainContext ctx{g, store, *r.provider, r.rules};
      const auto b = generate_bundle(ctx, id);
      g.update_edge(id, [&](Edge& e) { e.explanation = b; });
    };
    const auto run = simulate_validation(config, fx.candidates, fx.graph, wf, hook);
    return Json{{"config", config}, {"report", run.report}};
  }
  const auto s = snapshot();
  EmbeddingStore store = s->store;
  SettledHook hook = [&](OntologyGraph& g, const EdgeId& id) {
    ExplainContext ctx{g, store, *r.provider, r.rules};
    const auto b = generate_bundle(ctx, id);
    g.update_edge(id, [&](Edge& e) { e.explanation = b; });
  };
  const auto run = simulate_validation(config, candidates, s->graph, wf, hook);
  return Json{{"config", config}, {"report", run.report}};
}

std::vector<std::string> Engine::log_lines() const {
  std::lock_guard lock(log_mutex_);
  return log_lines_;
}

std::string Engine::log_text() const {
  std::string out;
  for (const auto& l : log_lines()) out += l + "\n";
  return out;
}

EfficiencyReport hitl_efficiency(std::string_view log_text, const ServiceConfig& config,
                                 const std::optional<std::set<std::string>>& truth) {
  ServiceConfig memory = config;
  memory.state_path.reset();
  Engine engine(memory);
  engine.replay(log_text);
  return engine.efficiency(truth);
}

}  // namespace clpde
