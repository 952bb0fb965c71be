#pragma once

#include <stdexcept>
#include <string>

namespace fibril {

/// Physical or numerical failure inside a module (CLI exit code 1).
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed file contents; carries the offending location.
class ParseError : public DomainError {
 public:
  ParseError(const std::string& where, const std::string& what)
      : DomainError(where + ": " + what), where_(where) {}
  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

/// Invalid configuration or invocation (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fibril
