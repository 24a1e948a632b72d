#include "clpde/cli.hpp"

#include <CLI11.hpp>
#include <httplib.h>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include "clpde/engine.hpp"
#include "clpde/error.hpp"
#include "clpde/service.hpp"
#include "clpde/text.hpp"

namespace clpde {

namespace {

std::string read_input(const std::string& path, const std::string& what) {
  if (path == "-") {
    std::ostringstream buf;
    buf << std::cin.rdbuf();
    return buf.str();
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + what + " " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_output(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << content;
  if (!out.flush()) throw IoError("failed writing " + path);
}

// Scalars become "path: value" lines; arrays of objects are numbered.
void render_human(const Json& j, const std::string& prefix, std::ostream& out) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) render_human(v, prefix.empty() ? k : prefix + "." + k, out);
    return;
  }
  if (j.is_array()) {
    bool scalars = true;
    for (const auto& v : j) scalars = scalars && !v.is_structured();
    if (scalars) {
      std::string line;
      for (const auto& v : j) line += (line.empty() ? "" : ", ") + (v.is_string() ? v.get<std::string>() : v.dump());
      out << prefix << ": " << (j.empty() ? "(none)" : line) << "\n";
      return;
    }
    for (std::size_t i = 0; i < j.size(); ++i) render_human(j[i], prefix + "[" + std::to_string(i) + "]", out);
    return;
  }
  out << prefix << ": " << (j.is_string() ? j.get<std::string>() : j.dump()) << "\n";
}

std::set<std::string> read_truth(const std::string& path) {
  const Json j = Json::parse(read_input(path, "ground-truth file"));
  if (!j.is_array()) throw ValidationError("ground-truth file must be a JSON array of candidate ids");
  return j.get<std::set<std::string>>();
}

httplib::Server* running_server = nullptr;

extern "C" void stop_server(int) {
  if (running_server) running_server->stop();
}

}  // namespace

int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cross-lingual mental-health ontology graph engine", "clpde"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, state_path, provider;
  bool as_json = false;
  std::optional<double> tau, tau_align;
  std::optional<std::size_t> k;
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--state", state_path, "event log (overrides the config)");
  app.add_flag("--json", as_json, "machine-readable JSON on stdout");
  app.add_option("--provider", provider, "embedding provider id");
  app.add_option("--tau", tau, "proposal threshold");
  app.add_option("--tau-align", tau_align, "alignment threshold for new utterances");
  app.add_option("--k", k, "neighbours per node");

  std::string input, output, format = "json", truth_path, log_path;
  auto* ingest = app.add_subcommand("ingest", "ingest a JSON Lines corpus");
  ingest->add_option("file", input, "corpus file or - for stdin")->required();

  auto* concepts = app.add_subcommand("concepts", "load concept nodes (bundled set by default)");
  concepts->add_option("file", input, "concepts JSON file");

  ProposeRequest propose_req;
  std::string language, lang_a, lang_b, node;
  auto* propose = app.add_subcommand("propose", "propose candidate edges");
  propose->add_option("--mode", propose_req.mode, "intra | cross | concept")
      ->required()
      ->check(CLI::IsMember({"intra", "cross", "concept"}));
  propose->add_option("--language", language);
  propose->add_option("--lang-a", lang_a);
  propose->add_option("--lang-b", lang_b);
  propose->add_option("--node", node, "concept mode: one expression node");

  std::string surface, source_id = "cli", source_kind = "synthetic";
  auto* align = app.add_subcommand("align", "align a new utterance against the graph");
  align->add_option("--text", surface)->required();
  align->add_option("--language", language)->required();
  align->add_option("--source-id", source_id);
  align->add_option("--source-kind", source_kind);

  std::string role;
  std::size_t batch_size = 10;
  auto* queue = app.add_subcommand("queue", "next validation batch for a role");
  queue->add_option("--role", role)->required();
  queue->add_option("--batch-size", batch_size);

  std::string edge, validator, verdict, new_dst, new_type, comment;
  auto* decide = app.add_subcommand("decide", "record a validator decision");
  decide->add_option("--edge", edge)->required();
  decide->add_option("--validator", validator)->required();
  decide->add_option("--role", role)->required();
  decide->add_option("--verdict", verdict)->required();
  decide->add_option("--new-dst", new_dst, "modify: new target node");
  decide->add_option("--new-type", new_type, "modify: new edge type");
  decide->add_option("--comment", comment);

  std::string outcome, note;
  std::vector<std::string> parallel, reasons;
  auto* adjudicate = app.add_subcommand("adjudicate", "resolve an edge in adjudication");
  adjudicate->add_option("--edge", edge)->required();
  adjudicate->add_option("--outcome", outcome, "consensus_accept | consensus_reject | retain_parallel")
      ->required();
  adjudicate->add_option("--parallel", parallel, "competing edge ids for retain_parallel");
  adjudicate->add_option("--reason", reasons, "one reason per retained edge");
  adjudicate->add_option("--note", note);

  auto* explain = app.add_subcommand("explain", "explanation bundle or report for an edge");
  explain->add_option("--edge", edge)->required();
  explain->add_option("--format", format, "json | text | html")
      ->check(CLI::IsMember({"json", "text", "html"}));

  auto* metrics = app.add_subcommand("metrics", "graph metrics and review efficiency");
  metrics->add_option("--truth", truth_path, "JSON array of true candidate ids");
  metrics->add_option("--log", log_path, "event log to evaluate instead of the current state");

  std::string request_path, policy;
  std::optional<std::uint64_t> seed;
  std::optional<double> accuracy, target_f1;
  bool exhaust = false;
  auto* simulate = app.add_subcommand("simulate", "simulate validators over a candidate set");
  simulate->add_option("--request", request_path, "SimulationConfig JSON (bundled fixture by default)");
  simulate->add_option("--seed", seed);
  simulate->add_option("--policy", policy)->check(CLI::IsMember({"active", "random"}));
  simulate->add_option("--accuracy", accuracy);
  simulate->add_option("--target-f1", target_f1);
  simulate->add_flag("--exhaust", exhaust, "review every candidate");

  auto* export_cmd = app.add_subcommand("export", "write the graph document");
  export_cmd->add_option("--out", output, "file instead of stdout");

  auto* import_cmd = app.add_subcommand("import", "merge a graph document");
  import_cmd->add_option("file", input)->required();

  auto* embeddings = app.add_subcommand("embeddings", "import JSON Lines embedding records");
  embeddings->add_option("file", input)->required();

  auto* feedback = app.add_subcommand("feedback", "apply the threshold feedback controller");

  std::optional<std::string> host;
  std::optional<int> port;
  auto* serve_cmd = app.add_subcommand("serve", "run the HTTP service");
  serve_cmd->add_option("--host", host);
  serve_cmd->add_option("--port", port);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    ServiceConfig config = config_path.empty() ? ServiceConfig{} : load_config(config_path);
    if (!state_path.empty()) config.state_path = state_path;
    if (!provider.empty()) {
      if (provider != HashedTokenProvider().id()) {
        throw ConfigError("--provider '" + provider + "' is not available (have " +
                          HashedTokenProvider().id() + ")");
      }
      config.alignment.provider = provider;
    }
    if (tau) config.workflow.tau = *tau;
    if (tau_align) {
      if (!(*tau_align >= 0.0 && *tau_align <= 1.0)) throw ConfigError("--tau-align must lie in [0,1]");
      config.alignment.tau_align = *tau_align;
    }
    if (k) {
      if (*k == 0) throw ConfigError("--k must be a positive integer");
      config.alignment.k = *k;
    }
    if (host) config.host = *host;
    if (port) config.port = *port;
    config.workflow.validate();

    auto emit = [&](const Json& j) {
      if (as_json) {
        out << j.dump(2) << "\n";
      } else {
        render_human(j, "", out);
      }
    };

    if (app.got_subcommand(metrics) && !log_path.empty()) {
      const std::string log = read_input(log_path, "event log");
      std::optional<std::set<std::string>> truth;
      if (!truth_path.empty()) truth = read_truth(truth_path);
      emit(Json(hitl_efficiency(log, config, truth)));
      return 0;
    }

    Engine engine(config);
    if (app.got_subcommand(ingest)) {
      std::istringstream in(read_input(input, "corpus"));
      emit(engine.ingest(in));
    } else if (app.got_subcommand(concepts)) {
      const auto seeds = input.empty() ? engine.resources().concepts
                                       : parse_concepts(read_input(input, "concepts file"));
      emit(engine.load_concepts(seeds));
    } else if (app.got_subcommand(propose)) {
      if (!language.empty()) propose_req.language = language;
      if (!lang_a.empty()) propose_req.lang_a = lang_a;
      if (!lang_b.empty()) propose_req.lang_b = lang_b;
      if (!node.empty()) propose_req.node = node;
      propose_req.tau = tau;
      propose_req.k = k;
      emit(engine.propose(propose_req));
    } else if (app.got_subcommand(align)) {
      AlignRequest req;
      req.surface_text = surface;
      req.language = language;
      req.provenance.source_kind = enum_from_string<SourceKind>(source_kind);
      req.provenance.source_id = source_id;
      req.provenance.collected_at =
          std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
      req.provenance.anonymized = true;
      emit(engine.align(req));
    } else if (app.got_subcommand(queue)) {
      if (batch_size == 0) throw ValidationError("--batch-size must be at least 1");
      Json items = Json::array();
      for (const auto& item : engine.queue(enum_from_string<Role>(role), batch_size)) {
        items.push_back(item);
      }
      emit(Json{{"role", role}, {"items", items}});
    } else if (app.got_subcommand(decide)) {
      ValidationDecision d;
      d.edge_id = edge;
      d.validator_id = validator;
      d.role = enum_from_string<Role>(role);
      d.verdict = enum_from_string<Verdict>(verdict);
      d.comment = comment;
      if (!new_dst.empty() || !new_type.empty()) {
        Modification m;
        if (!new_dst.empty()) m.new_dst = new_dst;
        if (!new_type.empty()) m.new_edge_type = enum_from_string<EdgeType>(new_type);
        d.modification = m;
      }
      emit(engine.decide(d));
    } else if (app.got_subcommand(adjudicate)) {
      AdjudicationRequest req;
      req.outcome = adjudication_outcome_from_string(outcome);
      req.parallel_edges = parallel;
      req.reasons = reasons;
      req.note = note;
      emit(engine.adjudicate(edge, req));
    } else if (app.got_subcommand(explain)) {
      if (format == "json") {
        emit(engine.explanation(edge));
      } else {
        out << engine.report(edge, format == "html" ? ReportFormat::html : ReportFormat::text);
      }
    } else if (app.got_subcommand(metrics)) {
      Json j = engine.metrics_report();
      if (!truth_path.empty()) j["hitl_efficiency"] = engine.efficiency(read_truth(truth_path));
      emit(j);
    } else if (app.got_subcommand(simulate)) {
      Json req = request_path.empty() ? Json::object()
                                      : Json::parse(read_input(request_path, "simulation request"));
      if (seed) req["seed"] = *seed;
      if (!policy.empty()) req["policy"] = policy;
      if (accuracy) req["validator_accuracy"] = *accuracy;
      if (target_f1) req["target_f1"] = *target_f1;
      if (exhaust) req["target_f1"] = nullptr;
      emit(engine.simulate(req));
    } else if (app.got_subcommand(export_cmd)) {
      if (output.empty()) {
        out << engine.export_graph();
      } else {
        write_output(output, engine.export_graph());
      }
    } else if (app.got_subcommand(import_cmd)) {
      emit(engine.import_graph(read_input(input, "graph document")));
    } else if (app.got_subcommand(embeddings)) {
      std::istringstream in(read_input(input, "embedding file"));
      emit(engine.import_embeddings(in));
    } else if (app.got_subcommand(feedback)) {
      emit(engine.update_thresholds());
    } else if (app.got_subcommand(serve_cmd)) {
      std::signal(SIGINT, stop_server);
      std::signal(SIGTERM, stop_server);
      serve(engine, [&](httplib::Server& server, int bound) {
        running_server = &server;
        out << "listening on " << config.host << ":" << bound << std::endl;
      });
      running_server = nullptr;
    }
    return 0;
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return e.kind() == ErrorKind::io ? 2 : 1;
  } catch (const Json::exception& e) {
    err << "error (parse): " << e.what() << "\n";
    return 1;
  }
}

}  // namespace clpde
