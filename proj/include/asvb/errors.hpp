#pragma once

#include <stdexcept>
#include <string>

namespace asvb {

// Argument outside the mathematical domain of an operation (bad index, point
// outside the design interval, non-positive variance, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A matrix could not be factorized even after jitter escalation.
class ConditioningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or precondition violated by user input.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed input file. Carries the 1-based line number when known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string &what, std::size_t line)
      : std::runtime_error(what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace asvb
