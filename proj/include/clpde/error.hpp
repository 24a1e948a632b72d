#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace clpde {

enum class ErrorKind {
  validation,
  policy,
  conflict,
  type,
  not_found,
  state,
  parse,
  io,
  proposer,
  config,
};

const char* to_string(ErrorKind kind);

// Base of every error the engine raises. The kind drives CLI exit codes and
// HTTP status mapping.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct ValidationError : Error {
  explicit ValidationError(const std::string& m) : Error(ErrorKind::validation, m) {}
};
struct PolicyError : Error {
  explicit PolicyError(const std::string& m) : Error(ErrorKind::policy, m) {}
};
struct ConflictError : Error {
  explicit ConflictError(const std::string& m) : Error(ErrorKind::conflict, m) {}
};
struct TypeError : Error {
  explicit TypeError(const std::string& m) : Error(ErrorKind::type, m) {}
};
struct NotFoundError : Error {
  explicit NotFoundError(const std::string& m) : Error(ErrorKind::not_found, m) {}
};
struct StateError : Error {
  explicit StateError(const std::string& m) : Error(ErrorKind::state, m) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error(ErrorKind::config, m) {}
};

// Parse errors carry where in the input they happened (line, event, element).
struct ParseError : Error {
  ParseError(const std::string& location, const std::string& m)
      : Error(ErrorKind::parse, location + ": " + m), location_(location) {}
  const std::string& location() const noexcept { return location_; }

 private:
  std::string location_;
};

struct IoError : Error {
  IoError(const std::string& m, std::size_t records_processed = 0)
      : Error(ErrorKind::io, m), records_processed_(records_processed) {}
  std::size_t records_processed() const noexcept { return records_processed_; }

 private:
  std::size_t records_processed_;
};

struct ProposerError : Error {
  ProposerError(const std::string& node_id, const std::string& m)
      : Error(ErrorKind::proposer, "proposer failed for " + node_id + ": " + m),
        node_id_(node_id) {}
  const std::string& node_id() const noexcept { return node_id_; }

 private:
  std::string node_id_;
};

}  // namespace clpde
