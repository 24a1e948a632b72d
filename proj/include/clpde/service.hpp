#pragma once
// HTTP surface over an Engine. Routing lives in Service::handle so it can be
// exercised without sockets; serve() binds it to cpp-httplib.

#include <functional>
#include <map>
#include <string>

#include "clpde/engine.hpp"
#include "clpde/error.hpp"

namespace httplib {
class Server;
}

namespace clpde {

struct HttpRequest {
  std::string method;  // GET | POST
  std::string path;
  std::map<std::string, std::string> query;
  std::map<std::string, std::string> headers;  // lower-case names
  std::string body;
};

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

// HTTP status for an engine error kind.
int http_status(ErrorKind kind);

class Service {
 public:
  explicit Service(Engine& engine) : engine_(engine) {}

  HttpResponse handle(const HttpRequest& request);

  // Routes every request on `server` through handle().
  void mount(httplib::Server& server);

 private:
  // Throws when tokens are configured and the bearer token does not belong
  // to `validator` (or to any validator when unset).
  void authorize(const HttpRequest& request, const std::string* validator) const;

  Engine& engine_;
};

// Binds host:port from the engine's config (port 0 picks a free port) and
// blocks until stop() is called from another thread. `on_ready` runs once
// the socket is bound and receives the bound port. Throws IoError when the
// port cannot be bound.
void serve(Engine& engine, const std::function<void(httplib::Server&, int)>& on_ready = {});

}  // namespace clpde
