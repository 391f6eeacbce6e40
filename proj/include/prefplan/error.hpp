#pragma once

#include <stdexcept>
#include <string>

namespace prefplan {

// Every failure surfaced to the CLI carries a stable machine-readable code
// (e.g. "PARSE", "PRECONDITION") and the module that raised it.
class Error : public std::runtime_error {
 public:
  Error(std::string code, std::string module, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)), module_(std::move(module)) {}

  const std::string& code() const noexcept { return code_; }
  const std::string& module() const noexcept { return module_; }

 private:
  std::string code_;
  std::string module_;
};

struct SourceLocation {
  int line = 0;
  int column = 0;
};

class ParseError : public Error {
 public:
  ParseError(SourceLocation where, const std::string& message)
      : Error("PARSE", "pddl-core",
              std::to_string(where.line) + ":" + std::to_string(where.column) + ": " + message),
        where_(where),
        detail_(message) {}

  SourceLocation where() const noexcept { return where_; }
  // The message without the "line:column: " prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  SourceLocation where_;
  std::string detail_;
};

class PreconditionViolated : public Error {
 public:
  PreconditionViolated(std::string action, std::string literal)
      : Error("PRECONDITION", "pddl-core",
              "precondition-violated(" + literal + ") applying " + action),
        action_(std::move(action)),
        literal_(std::move(literal)) {}

  const std::string& action() const noexcept { return action_; }
  const std::string& literal() const noexcept { return literal_; }

 private:
  std::string action_;
  std::string literal_;
};

}  // namespace prefplan
