#pragma once
// System state behind the CLI and HTTP service: configuration, loaded
// resources, copy-on-write mutations and the append-only event log that
// persists them.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "clpde/alignment.hpp"
#include "clpde/annotation.hpp"
#include "clpde/explain.hpp"
#include "clpde/graph.hpp"
#include "clpde/json_io.hpp"
#include "clpde/metrics.hpp"
#include "clpde/workflow.hpp"

namespace clpde {

struct AlignmentSettings {
  std::string provider = "hashed-token-64";
  double tau_align = 0.85;
  std::size_t k = 5;
};

struct ServiceConfig {
  WorkflowConfig workflow;
  AlignmentSettings alignment;
  // Unset paths fall back to the bundled data files.
  std::optional<std::filesystem::path> lexicon_path;
  std::optional<std::filesystem::path> rules_path;
  std::optional<std::filesystem::path> concepts_path;
  std::optional<std::filesystem::path> state_path;  // event log; unset keeps state in memory
  std::string host = "127.0.0.1";
  int port = 8080;
  std::map<std::string, std::string> tokens;  // validator id -> bearer token
};

// Relative paths resolve against base_dir. Errors name the offending field.
ServiceConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
ServiceConfig load_config(const std::filesystem::path& path);
Json config_to_json(const ServiceConfig& config);

struct ConceptSeed {
  std::string code;
  Framework framework = Framework::ICD11;
  std::string label;
  std::optional<std::string> description;
};

std::vector<ConceptSeed> parse_concepts(std::string_view json_text);

struct Resources {
  std::shared_ptr<const HashedTokenProvider> provider;
  std::shared_ptr<const LexiconProposer> lexicon;
  std::vector<ExplanationRule> rules;
  std::vector<ConceptSeed> concepts;

  static Resources load(const ServiceConfig& config);
};

enum class EventKind {
  node_added,
  edge_added,
  embedding_registered,
  edge_enqueued,
  decision_submitted,
  adjudication_resolved,
  threshold_updated,
  bundle_generated,
};

std::string_view to_string(EventKind k);
EventKind event_kind_from_string(std::string_view s);

struct EventRecord {
  std::uint64_t sequence = 0;
  EventKind kind = EventKind::node_added;
  Json payload;
  Timestamp at{};
  std::optional<std::string> idempotency_key;
  std::optional<Json> response;  // stored with the last event of a keyed request
};

void to_json(Json& j, const EventRecord& v);
void from_json(const Json& j, EventRecord& v);

struct SystemState {
  OntologyGraph graph;
  EmbeddingStore store;
  ValidationWorkflow workflow;
  std::uint64_t sequence = 0;
  std::size_t decisions_logged = 0;
  std::map<std::string, Json> idempotent;  // key -> response
};

struct ProposeRequest {
  std::string mode;  // intra | cross | concept
  std::optional<std::string> language;
  std::optional<std::string> lang_a;
  std::optional<std::string> lang_b;
  std::optional<NodeId> node;  // concept mode; unset proposes for every expression
  std::optional<double> tau;   // defaults to the workflow's current tau
  std::optional<std::size_t> k;
};

void from_json(const Json& j, ProposeRequest& v);

struct AdjudicationRequest {
  AdjudicationOutcome outcome = AdjudicationOutcome::consensus_accept;
  std::vector<EdgeId> parallel_edges;
  std::vector<std::string> reasons;
  std::string note;
};

void from_json(const Json& j, AdjudicationRequest& v);

// Decisions recorded in the state, accepted edges and, with a ground truth
// of candidate keys, precision and recall of the accepted set.
EfficiencyReport efficiency_report(const SystemState& state,
                                   const std::optional<std::set<std::string>>& truth);

class Engine {
 public:
  using Clock = std::function<Timestamp()>;
  using Key = std::optional<std::string>;

  // Replays the configured event log when it exists.
  explicit Engine(ServiceConfig config, Clock clock = {});

  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  const ServiceConfig& config() const { return config_; }
  const Resources& resources() const { return resources_; }
  std::shared_ptr<const SystemState> snapshot() const;

  // Mutations. Each returns its JSON response; a repeated idempotency key
  // returns the first response without re-executing. A failed mutation
  // leaves state and log untouched.
  Json ingest(std::istream& jsonl, const Key& key = {});
  Json ingest(std::span<const CorpusRecord> records, const Key& key = {});
  Json load_concepts(const std::vector<ConceptSeed>& concepts, const Key& key = {});
  Json align(const AlignRequest& request, const Key& key = {});
  Json propose(const ProposeRequest& request, const Key& key = {});
  Json decide(const ValidationDecision& decision, const Key& key = {});
  Json adjudicate(const EdgeId& edge_id, const AdjudicationRequest& request, const Key& key = {});
  Json explain(const EdgeId& edge_id, const Key& key = {});
  Json update_thresholds(const Key& key = {});
  Json import_graph(std::string_view document, const Key& key = {});
  Json import_embeddings(std::istream& jsonl, const Key& key = {});

  // Reads.
  std::string export_graph() const;
  GraphMetrics metrics() const;
  // Graph metrics plus semantic coherence (null when undefined) and the
  // review efficiency of the recorded decisions.
  Json metrics_report() const;
  std::vector<QueueItem> queue(Role role, std::size_t batch_size) const;
  // Bundle (stored, or generated on the fly when absent) plus decisions.
  Json explanation(const EdgeId& edge_id) const;
  // Generates and logs a bundle first when the edge has none.
  std::string report(const EdgeId& edge_id, ReportFormat format);
  EfficiencyReport efficiency(const std::optional<std::set<std::string>>& truth = {}) const;
  Json simulate(const Json& request) const;

  std::vector<std::string> log_lines() const;
  std::string log_text() const;

  // Applies a JSON Lines event log to an engine that has no events yet.
  void replay(std::string_view log_text);

 private:
  struct Txn;
  Json transact(const Key& key, const std::function<Json(Txn&)>& body);
  void publish(std::shared_ptr<const SystemState> next);
  void persist(const std::vector<EventRecord>& events);
  void apply(SystemState& state, const EventRecord& event) const;

  ServiceConfig config_;
  Resources resources_;
  Clock clock_;
  std::mutex write_mutex_;
  mutable std::mutex snapshot_mutex_;
  std::shared_ptr<const SystemState> current_;
  mutable std::mutex log_mutex_;
  std::vector<std::string> log_lines_;
  ReportCache reports_;
};

// Replays a log into a fresh in-memory engine and reports on the result.
EfficiencyReport hitl_efficiency(std::string_view log_text, const ServiceConfig& config,
                                 const std::optional<std::set<std::string>>& truth = {});

}  // namespace clpde
