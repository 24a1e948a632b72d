#include "clpde/workflow.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <type_traits>

#include "clpde/error.hpp"
#include "clpde/text.hpp"

namespace clpde {

namespace {

void require_unit(double v, const char* field) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw ConfigError(std::string(field) + " must lie in [0,1], got " + std::to_string(v));
  }
}

std::string with_note(std::string_view label, const std::string& note) {
  std::string out(label);
  if (!note.empty()) out += ": " + note;
  return out;
}

}  // namespace

void WorkflowConfig::validate() const {
  require_unit(alpha, "workflow.alpha");
  require_unit(tau, "workflow.tau");
  require_unit(target_reject_rate, "workflow.target_reject_rate");
  require_unit(tau_min, "workflow.tau_bounds[0]");
  require_unit(tau_max, "workflow.tau_bounds[1]");
  if (!(eta >= 0.0)) throw ConfigError("workflow.eta must be non-negative");
  if (tau_min > tau_max) throw ConfigError("workflow.tau_bounds min exceeds max");
  if (tau < tau_min || tau > tau_max) {
    throw ConfigError("workflow.tau must lie within workflow.tau_bounds");
  }
  if (required_roles.empty()) throw ConfigError("workflow.required_roles is empty");
  if (adjudication_rounds == 0) throw ConfigError("workflow.adjudication_rounds must be >= 1");
  if (feedback_window == 0) throw ConfigError("workflow.feedback_window must be >= 1");
}

void to_json(Json& j, const WorkflowConfig& v) {
  Json roles = Json::array();
  for (Role r : v.required_roles) roles.push_back(enum_json(r));
  j = Json{{"alpha", v.alpha},
           {"required_roles", std::move(roles)},
           {"tau", v.tau},
           {"eta", v.eta},
           {"target_reject_rate", v.target_reject_rate},
           {"tau_bounds", Json::array({v.tau_min, v.tau_max})},
           {"adjudication_rounds", v.adjudication_rounds},
           {"feedback_window", v.feedback_window}};
}

void from_json(const Json& j, WorkflowConfig& v) {
  if (!j.is_object()) throw ConfigError("workflow must be an object");
  auto number = [&](const char* key, double& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_number()) throw ConfigError(std::string("workflow.") + key + " must be a number");
    out = j[key].get<double>();
  };
  auto count = [&](const char* key, auto& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_number_unsigned()) {
      throw ConfigError(std::string("workflow.") + key + " must be a non-negative integer");
    }
    out = j[key].get<std::remove_reference_t<decltype(out)>>();
  };
  number("alpha", v.alpha);
  number("tau", v.tau);
  number("eta", v.eta);
  number("target_reject_rate", v.target_reject_rate);
  if (j.contains("tau_bounds")) {
    const auto& b = j["tau_bounds"];
    if (!b.is_array() || b.size() != 2 || !b[0].is_number() || !b[1].is_number()) {
      throw ConfigError("workflow.tau_bounds must be a [min, max] pair of numbers");
    }
    v.tau_min = b[0].get<double>();
    v.tau_max = b[1].get<double>();
  }
  count("adjudication_rounds", v.adjudication_rounds);
  count("feedback_window", v.feedback_window);
  if (j.contains("required_roles")) {
    const auto& roles = j["required_roles"];
    if (!roles.is_array()) throw ConfigError("workflow.required_roles must be an array");
    v.required_roles.clear();
    for (const auto& r : roles) {
      try {
        v.required_roles.insert(enum_from_string<Role>(r.get<std::string>()));
      } catch (const std::exception& e) {
        throw ConfigError(std::string("workflow.required_roles: ") + e.what());
      }
    }
  }
  for (const auto& [key, _] : j.items()) {
    static const std::set<std::string> known{"alpha",      "required_roles",     "tau",
                                             "eta",        "target_reject_rate", "tau_bounds",
                                             "adjudication_rounds", "feedback_window"};
    if (!known.count(key)) throw ConfigError("workflow." + key + " is not a known setting");
  }
  v.validate();
}

double uncertainty(double confidence) {
  if (!(confidence >= 0.0 && confidence <= 1.0)) {
    throw ValidationError("confidence must lie in [0,1], got " + std::to_string(confidence));
  }
  return 1.0 - std::abs(2.0 * confidence - 1.0);
}

double combined_confidence(double model_confidence, std::span<const ValidationDecision> decisions,
                           double alpha) {
  double accepts = 0.0, rejects = 0.0;
  for (const auto& d : decisions) {
    if (d.verdict == Verdict::accept) accepts += 1.0;
    if (d.verdict == Verdict::reject) rejects += 1.0;
  }
  if (accepts + rejects == 0.0) return model_confidence;
  return alpha * model_confidence + (1.0 - alpha) * accepts / (accepts + rejects);
}

double update_thresholds(std::span<const EdgeStatus> window, const WorkflowConfig& config) {
  if (window.empty()) throw ValidationError("feedback window is empty");
  double accepts = 0.0, rejects = 0.0;
  for (EdgeStatus s : window) {
    if (s == EdgeStatus::Accepted) accepts += 1.0;
    if (s == EdgeStatus::Rejected) rejects += 1.0;
  }
  if (accepts + rejects == 0.0) return config.tau;
  const double rate = rejects / (accepts + rejects);
  return std::clamp(config.tau + config.eta * (rate - config.target_reject_rate), config.tau_min,
                    config.tau_max);
}

void to_json(Json& j, const QueueItem& v) {
  j = Json{{"edge_id", v.edge_id},
           {"priority", v.priority},
           {"batch_key", v.batch_key},
           {"enqueued_at", text::format_timestamp(v.enqueued_at)}};
}

std::string_view to_string(AdjudicationOutcome v) {
  switch (v) {
    case AdjudicationOutcome::consensus_accept: return "consensus_accept";
    case AdjudicationOutcome::consensus_reject: return "consensus_reject";
    case AdjudicationOutcome::retain_parallel: return "retain_parallel";
  }
  return "unknown";
}

AdjudicationOutcome adjudication_outcome_from_string(std::string_view s) {
  for (auto v : {AdjudicationOutcome::consensus_accept, AdjudicationOutcome::consensus_reject,
                 AdjudicationOutcome::retain_parallel}) {
    if (to_string(v) == s) return v;
  }
  throw ValidationError("unknown adjudication outcome '" + std::string(s) + "'");
}

std::string batch_key(const OntologyGraph& graph, const Edge& edge) {
  if (edge.edge_type == EdgeType::ExpressionConcept) {
    return "concept:" + edge.dst + "|" + std::string(to_string(edge.edge_type));
  }
  std::string a = graph.expression(edge.src).language;
  std::string b = graph.expression(edge.dst).language;
  if (b < a) std::swap(a, b);
  return "languages:" + a + "-" + b + "|" + std::string(to_string(edge.edge_type));
}

ValidationWorkflow::ValidationWorkflow(WorkflowConfig config) : config_(std::move(config)) {
  config_.validate();
}

QueueItem ValidationWorkflow::enqueue(OntologyGraph& graph, const EdgeId& edge_id,
                                      Timestamp now) {
  const Edge& e = graph.edge(edge_id);
  if (e.status != EdgeStatus::Proposed) {
    throw StateError("edge " + edge_id + " is " + std::string(to_string(e.status)) +
                     ", only Proposed edges can be queued");
  }
  graph.transition(edge_id, EdgeStatus::UnderValidation);
  QueueItem item{edge_id, uncertainty(e.model_confidence), batch_key(graph, e), now};
  queue_[edge_id] = item;
  return item;
}

void ValidationWorkflow::adopt(const OntologyGraph& graph, const EdgeId& edge_id, Timestamp now) {
  const Edge& e = graph.edge(edge_id);
  if (e.status == EdgeStatus::UnderValidation) {
    queue_[edge_id] = QueueItem{edge_id, uncertainty(e.model_confidence), batch_key(graph, e), now};
  } else if (e.status == EdgeStatus::Adjudication) {
    // Decisions made before the import are not available; the round that
    // sent the edge to adjudication counts as held.
    rounds_.try_emplace(edge_id, 1);
  } else {
    throw StateError("edge " + edge_id + " is " + std::string(to_string(e.status)) +
                     ", only UnderValidation or Adjudication edges can be adopted");
  }
}

std::vector<QueueItem> ValidationWorkflow::next_batch(const OntologyGraph& graph, Role role,
                                                      std::size_t batch_size) const {
  if (batch_size == 0) throw ValidationError("batch size must be at least 1");
  if (!config_.required_roles.count(role)) return {};

  auto awaiting = [&](const QueueItem& item) {
    if (graph.edge(item.edge_id).status != EdgeStatus::UnderValidation) return false;
    auto it = decisions_.find(item.edge_id);
    if (it == decisions_.end()) return true;
    return std::none_of(it->second.begin(), it->second.end(),
                        [&](const auto& kv) { return kv.second.decision.role == role; });
  };
  auto before = [](const QueueItem* a, const QueueItem* b) {
    if (a->priority != b->priority) return a->priority > b->priority;
    return a->edge_id < b->edge_id;
  };

  std::vector<const QueueItem*> eligible;
  for (const auto& [_, item] : queue_) {
    if (awaiting(item)) eligible.push_back(&item);
  }
  if (eligible.empty()) return {};
  std::sort(eligible.begin(), eligible.end(), before);
  const std::string& key = eligible.front()->batch_key;

  std::vector<QueueItem> batch;
  for (const QueueItem* item : eligible) {
    if (batch.size() == batch_size) break;
    if (item->batch_key == key) batch.push_back(*item);
  }
  return batch;
}

std::vector<ValidationDecision> ValidationWorkflow::decisions(const EdgeId& edge_id) const {
  std::vector<ValidationDecision> out;
  auto it = decisions_.find(edge_id);
  if (it == decisions_.end()) return out;
  for (const auto& [_, r] : it->second) out.push_back(r.decision);
  return out;
}

std::uint32_t ValidationWorkflow::adjudication_round(const EdgeId& edge_id) const {
  auto it = rounds_.find(edge_id);
  return it == rounds_.end() ? 0 : it->second;
}

std::vector<EdgeId> ValidationWorkflow::pending_adjudications(const OntologyGraph& graph) const {
  std::vector<EdgeId> out;
  for (const auto& [id, e] : graph.edges()) {
    if (e.status == EdgeStatus::Adjudication) out.push_back(id);
  }
  return out;
}

bool ValidationWorkflow::all_roles_decided(const EdgeId& edge_id,
                                           std::optional<std::uint32_t> round) const {
  auto it = decisions_.find(edge_id);
  if (it == decisions_.end()) return false;
  std::set<Role> covered;
  for (const auto& [_, r] : it->second) {
    if (!round || r.round == *round) covered.insert(r.decision.role);
  }
  return std::all_of(config_.required_roles.begin(), config_.required_roles.end(),
                     [&](Role r) { return covered.count(r) != 0; });
}

void ValidationWorkflow::refresh_confidence(OntologyGraph& graph, const EdgeId& edge_id) const {
  const auto ds = decisions(edge_id);
  double accepts = 0.0, rejects = 0.0;
  for (const auto& d : ds) {
    if (d.verdict == Verdict::accept) accepts += 1.0;
    if (d.verdict == Verdict::reject) rejects += 1.0;
  }
  graph.update_edge(edge_id, [&](Edge& e) {
    e.validator_agreement =
        accepts + rejects > 0.0 ? std::optional<double>(accepts / (accepts + rejects))
                                : std::nullopt;
    e.combined_confidence = combined_confidence(e.model_confidence, ds, config_.alpha);
  });
}

DecisionOutcome ValidationWorkflow::submit_decision(OntologyGraph& graph,
                                                    const ValidationDecision& input) {
  const Edge& edge = graph.edge(input.edge_id);
  if (edge.status != EdgeStatus::UnderValidation && edge.status != EdgeStatus::Adjudication) {
    throw StateError("edge " + edge.id + " is " + std::string(to_string(edge.status)) +
                     ", decisions need UnderValidation or Adjudication");
  }
  if (text::trim(input.validator_id).empty()) throw ValidationError("validator_id is empty");
  if (!config_.required_roles.count(input.role)) {
    throw ValidationError("role " + std::string(to_string(input.role)) +
                          " is not a required validation role");
  }

  ValidationDecision decision = input;
  if (decision.verdict == Verdict::modify) {
    if (!decision.modification || decision.modification->empty()) {
      throw ValidationError("modify verdict needs a new target or edge type");
    }
    const NodeId dst = decision.modification->new_dst.value_or(edge.dst);
    const EdgeType type = decision.modification->new_edge_type.value_or(edge.edge_type);
    if (dst == edge.dst && type == edge.edge_type) {
      throw ValidationError("modification leaves edge " + edge.id + " unchanged");
    }
    graph.validate_edge_endpoints(edge.src, dst, type);
    if (auto existing = graph.find_edge(edge.src, dst, type)) {
      throw ConflictError("modification duplicates live edge " + *existing);
    }
  } else {
    decision.modification.reset();
  }

  const EdgeId edge_id = edge.id;
  const std::uint32_t round = adjudication_round(edge_id);
  decisions_[edge_id][decision.validator_id] = Recorded{decision, round};
  refresh_confidence(graph, edge_id);

  DecisionOutcome outcome;
  const EdgeStatus status = graph.edge(edge_id).status;

  const auto current = decisions(edge_id);
  auto unanimous = [&](Verdict v) {
    return std::all_of(current.begin(), current.end(),
                       [&](const ValidationDecision& d) { return d.verdict == v; });
  };

  if (status == EdgeStatus::UnderValidation && all_roles_decided(edge_id, std::nullopt)) {
    const auto modify = std::find_if(current.begin(), current.end(), [](const auto& d) {
      return d.verdict == Verdict::modify;
    });
    if (modify != current.end()) {
      const Edge original = graph.edge(edge_id);
      graph.transition(edge_id, EdgeStatus::Superseded);
      Provenance prov = original.provenance;
      prov.source_kind = SourceKind::synthetic;
      prov.source_id = "revision-by:" + modify->validator_id;
      prov.anonymized = true;
      Edge revised = graph.add_edge(
          original.src, modify->modification->new_dst.value_or(original.dst),
          modify->modification->new_edge_type.value_or(original.edge_type),
          original.model_confidence, original.rationale, prov);
      graph.update_edge(revised.id, [&](Edge& e) { e.revision_of = original.id; });
      outcome.revision = graph.edge(revised.id);
    } else if (unanimous(Verdict::accept)) {
      graph.transition(edge_id, EdgeStatus::Accepted);
    } else if (unanimous(Verdict::reject)) {
      graph.transition(edge_id, EdgeStatus::Rejected);
    } else {
      graph.transition(edge_id, EdgeStatus::Adjudication);
      rounds_[edge_id] = 1;
    }
    queue_.erase(edge_id);
  } else if (status == EdgeStatus::Adjudication && all_roles_decided(edge_id, std::nullopt)) {
    if (unanimous(Verdict::accept)) {
      graph.transition(edge_id, EdgeStatus::Accepted);
      graph.update_edge(edge_id, [](Edge& e) { e.adjudication_note = "unanimous re-vote"; });
    } else if (unanimous(Verdict::reject)) {
      graph.transition(edge_id, EdgeStatus::Rejected);
      graph.update_edge(edge_id, [](Edge& e) { e.adjudication_note = "unanimous re-vote"; });
    } else if (round > 0 && all_roles_decided(edge_id, round)) {
      // Every role re-voted in this round and the conflict persists.
      ++rounds_[edge_id];
    }
  }
  outcome.edge = graph.edge(edge_id);
  return outcome;
}

std::vector<Edge> ValidationWorkflow::resolve_adjudication(
    OntologyGraph& graph, const EdgeId& edge_id, AdjudicationOutcome outcome,
    const std::vector<EdgeId>& parallel_edges, const std::vector<std::string>& reasons,
    const std::string& note) {
  const Edge& edge = graph.edge(edge_id);
  if (edge.status != EdgeStatus::Adjudication) {
    throw StateError("edge " + edge_id + " is " + std::string(to_string(edge.status)) +
                     ", not in Adjudication");
  }
  const std::string label = with_note(to_string(outcome), note);
  switch (outcome) {
    case AdjudicationOutcome::consensus_accept:
    case AdjudicationOutcome::consensus_reject: {
      if (!parallel_edges.empty()) {
        throw ValidationError("parallel edges are only meaningful for retain_parallel");
      }
      graph.transition(edge_id, outcome == AdjudicationOutcome::consensus_accept
                                    ? EdgeStatus::Accepted
                                    : EdgeStatus::Rejected);
      graph.update_edge(edge_id, [&](Edge& e) { e.adjudication_note = label; });
      return {graph.edge(edge_id)};
    }
    case AdjudicationOutcome::retain_parallel: {
      std::vector<EdgeId> group{edge_id};
      group.insert(group.end(), parallel_edges.begin(), parallel_edges.end());
      for (const auto& id : group) {
        if (graph.edge(id).status == EdgeStatus::Adjudication &&
            adjudication_round(id) < config_.adjudication_rounds) {
          throw StateError("edge " + id + " has completed " +
                           std::to_string(adjudication_round(id)) + " adjudication round(s), " +
                           std::to_string(config_.adjudication_rounds) +
                           " required before parallel retention");
        }
      }
      graph.retain_parallel(group, reasons);
      std::vector<Edge> out;
      for (const auto& id : group) {
        graph.update_edge(id, [&](Edge& e) { e.adjudication_note = label; });
        out.push_back(graph.edge(id));
      }
      return out;
    }
  }
  throw ValidationError("unknown adjudication outcome");
}

double ValidationWorkflow::apply_threshold_update(std::span<const EdgeStatus> window) {
  config_.tau = update_thresholds(window, config_);
  return config_.tau;
}

}  // namespace clpde
