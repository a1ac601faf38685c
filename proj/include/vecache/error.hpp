#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vecache {

/// Invalid configuration value or combination. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input record; carries the 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Well-formed input with out-of-domain values (e.g. rating 7).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Optimisation produced a non-finite loss.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(int epoch, const std::string& what)
      : std::runtime_error("epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

/// Knowledge-cache protocol misuse, e.g. neighbour query for an unknown vehicle.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller broke a precondition (dimension mismatch, index out of range).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Cosine similarity against a zero-norm vector.
class UndefinedSimilarity : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace vecache
