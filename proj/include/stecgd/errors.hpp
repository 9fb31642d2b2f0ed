#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace stecgd {

// Non-finite input to a scalar operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Invalid model or experiment configuration (shapes, second-layer layout,
// hyper-parameters).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed dataset, checkpoint, trace or config file.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Weight initialization could not satisfy the non-zero projection condition.
class InitializationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A diagnostic was requested on inputs that do not carry what it needs.
class DiagnosticUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace stecgd
