#include "clpde/service.hpp"

#include <httplib.h>

#include <sstream>

#include "clpde/error.hpp"
#include "clpde/text.hpp"

namespace clpde {

namespace {

HttpResponse json_response(const Json& j, int status = 200) {
  return {status, "application/json", j.dump(2) + "\n"};
}

HttpResponse error_response(int status, const std::string& kind, const std::string& message) {
  return json_response(Json{{"error", kind}, {"message", message}}, status);
}

struct AuthError : std::runtime_error {
  AuthError(int status, const std::string& m) : std::runtime_error(m), status(status) {}
  int status;
};

Json parse_body(const HttpRequest& r) {
  if (text::trim(r.body).empty()) return Json::object();
  try {
    return Json::parse(r.body);
  } catch (const Json::parse_error& e) {
    throw ParseError("request body", e.what());
  }
}

Engine::Key idempotency_key(const HttpRequest& r) {
  auto it = r.headers.find("idempotency-key");
  if (it == r.headers.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> segments(const std::string& path) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : path) {
    if (c == '/') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::size_t query_size(const HttpRequest& r, const std::string& name, std::size_t fallback) {
  auto it = r.query.find(name);
  if (it == r.query.end()) return fallback;
  try {
    std::size_t used = 0;
    const long v = std::stol(it->second, &used);
    if (used != it->second.size() || v < 1) throw std::invalid_argument(name);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw ValidationError(name + " must be a positive integer");
  }
}

Json node_json(const OntologyGraph& g, const NodeId& id) {
  if (g.is_expression(id)) return g.expression(id);
  return g.concept_node(id);
}

Json bundle_preview(const Json& explanation) {
  const Json& b = explanation.at("bundle");
  Json tokens = Json::array();
  for (const auto& t : b.at("token_contributions")) {
    if (tokens.size() == 3) break;
    tokens.push_back(t);
  }
  return Json{{"linguistic", b.at("linguistic")},
              {"cultural", b.at("cultural")},
              {"clinical", b.at("clinical")},
              {"confidence", b.at("confidence")},
              {"top_tokens", tokens},
              {"incomplete", b.at("incomplete")},
              {"stored", explanation.at("stored")}};
}

}  // namespace

int http_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::validation:
    case ErrorKind::type:
    case ErrorKind::parse:
    case ErrorKind::config:
      return 400;
    case ErrorKind::policy:
      return 422;
    case ErrorKind::not_found:
      return 404;
    case ErrorKind::conflict:
    case ErrorKind::state:
      return 409;
    case ErrorKind::proposer:
      return 502;
    case ErrorKind::io:
      return 500;
  }
  return 500;
}

void Service::authorize(const HttpRequest& r, const std::string* validator) const {
  const auto& tokens = engine_.config().tokens;
  if (tokens.empty()) return;
  auto it = r.headers.find("authorization");
  const std::string prefix = "Bearer ";
  if (it == r.headers.end() || it->second.rfind(prefix, 0) != 0) {
    throw AuthError(401, "missing bearer token");
  }
  const std::string token = it->second.substr(prefix.size());
  if (validator) {
    auto t = tokens.find(*validator);
    if (t == tokens.end() || t->second != token) {
      throw AuthError(403, "token does not belong to validator " + *validator);
    }
    return;
  }
  for (const auto& [_, t] : tokens) {
    if (t == token) return;
  }
  throw AuthError(403, "unknown bearer token");
}

HttpResponse Service::handle(const HttpRequest& r) {
  try {
    const auto seg = segments(r.path);
    const auto key = idempotency_key(r);
    if (r.method == "GET") {
      if (seg == std::vector<std::string>{"health"}) {
        const auto s = engine_.snapshot();
        return json_response(Json{{"status", "ok"},
                                  {"expressions", s->graph.expressions().size()},
                                  {"concepts", s->graph.concepts().size()},
                                  {"edges", s->graph.edges().size()},
                                  {"queue", s->workflow.queue().size()},
                                  {"events", s->sequence}});
      }
      if (seg == std::vector<std::string>{"metrics"}) return json_response(engine_.metrics_report());
      if (seg == std::vector<std::string>{"graph", "export"}) {
        return {200, "application/json", engine_.export_graph()};
      }
      if (seg == std::vector<std::string>{"queue"}) {
        auto role_it = r.query.find("role");
        if (role_it == r.query.end()) throw ValidationError("role query parameter is required");
        const Role role = enum_from_string<Role>(role_it->second);
        const std::size_t n = query_size(r, "batch_size", 10);
        const auto s = engine_.snapshot();
        Json items = Json::array();
        std::string batch;
        for (const auto& item : engine_.queue(role, n)) {
          batch = item.batch_key;
          const Edge& e = s->graph.edge(item.edge_id);
          items.push_back(Json{{"item", item},
                               {"edge", e},
                               {"src", node_json(s->graph, e.src)},
                               {"dst", node_json(s->graph, e.dst)},
                               {"bundle_preview", bundle_preview(engine_.explanation(e.id))}});
        }
        return json_response(Json{{"role", std::string(to_string(role))},
                                  {"batch_key", items.empty() ? Json(nullptr) : Json(batch)},
                                  {"items", items}});
      }
      if (seg.size() == 3 && seg[0] == "edges" && seg[2] == "explanation") {
        return json_response(engine_.explanation(seg[1]));
      }
      if (seg.size() == 3 && seg[0] == "edges" && seg[2] == "report") {
        return {200, "text/html; charset=utf-8", engine_.report(seg[1], ReportFormat::html)};
      }
      return error_response(404, "not_found", "no route for GET " + r.path);
    }
    if (r.method != "POST") return error_response(405, "method", "unsupported method " + r.method);

    if (seg == std::vector<std::string>{"decisions"}) {
      const auto d = parse_body(r).get<ValidationDecision>();
      authorize(r, &d.validator_id);
      return json_response(engine_.decide(d, key));
    }
    authorize(r, nullptr);
    if (seg == std::vector<std::string>{"graph", "import"}) {
      return json_response(engine_.import_graph(r.body, key));
    }
    if (seg == std::vector<std::string>{"concepts"}) {
      const bool defaults = text::trim(r.body).empty();
      return json_response(
          engine_.load_concepts(defaults ? engine_.resources().concepts : parse_concepts(r.body), key));
    }
    if (seg == std::vector<std::string>{"corpus", "ingest"}) {
      std::istringstream in(r.body);
      return json_response(engine_.ingest(in, key));
    }
    if (seg == std::vector<std::string>{"expressions", "align"}) {
      return json_response(engine_.align(parse_body(r).get<AlignRequest>(), key));
    }
    if (seg == std::vector<std::string>{"candidates", "propose"}) {
      return json_response(engine_.propose(parse_body(r).get<ProposeRequest>(), key));
    }
    if (seg.size() == 2 && seg[0] == "adjudications") {
      return json_response(engine_.adjudicate(seg[1], parse_body(r).get<AdjudicationRequest>(), key));
    }
    if (seg.size() == 3 && seg[0] == "edges" && seg[2] == "explain") {
      return json_response(engine_.explain(seg[1], key));
    }
    if (seg == std::vector<std::string>{"thresholds", "update"}) {
      return json_response(engine_.update_thresholds(key));
    }
    if (seg == std::vector<std::string>{"simulate"}) return json_response(engine_.simulate(parse_body(r)));
    return error_response(404, "not_found", "no route for POST " + r.path);
  } catch (const AuthError& e) {
    return error_response(e.status, "unauthorized", e.what());
  } catch (const Error& e) {
    return error_response(http_status(e.kind()), to_string(e.kind()), e.what());
  } catch (const Json::exception& e) {
    return error_response(400, "parse", e.what());
  } catch (const std::exception& e) {
    return error_response(500, "internal", e.what());
  }
}

void Service::mount(httplib::Server& server) {
  auto route = [this](const httplib::Request& req, httplib::Response& res) {
    HttpRequest r;
    r.method = req.method;
    r.path = req.path;
    for (const auto& [k, v] : req.params) r.query.emplace(k, v);
    for (const auto& [k, v] : req.headers) r.headers.emplace(text::ascii_lower(k), v);
    r.body = req.body;
    const HttpResponse out = handle(r);
    res.status = out.status;
    res.set_content(out.body, out.content_type);
  };
  server.Get(".*", route);
  server.Post(".*", route);
  server.Put(".*", route);
  server.Patch(".*", route);
  server.Delete(".*", route);
}

void serve(Engine& engine, const std::function<void(httplib::Server&, int)>& on_ready) {
  httplib::Server server;
  // The library default adds SO_REUSEPORT, which lets a second server share
  // the port silently instead of failing to bind.
  server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
  });
  Service service(engine);
  service.mount(server);
  const auto& c = engine.config();
  int port = c.port;
  if (port == 0) {
    port = server.bind_to_any_port(c.host);
    if (port < 0) throw IoError("cannot bind " + c.host + " on any port");
  } else if (!server.bind_to_port(c.host, port)) {
    throw IoError("cannot bind " + c.host + ":" + std::to_string(port));
  }
  if (on_ready) on_ready(server, port);
  if (!server.listen_after_bind()) throw IoError("server stopped with an error");
}

}  // namespace clpde
