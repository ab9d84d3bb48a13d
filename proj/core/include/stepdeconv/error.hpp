#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace stepdeconv {

// Base of every error raised by the library. `kind()` is a stable short tag
// used in the CLI's structured error records.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual const char* kind() const noexcept { return "error"; }
};

// A precondition of an operation was not met by the caller.
class ContractViolation : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "contract_violation"; }
};

// Evaluation outside a function's domain (the Abel pole, for example).
class DomainError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "domain_error"; }
};

// Adaptive quadrature did not reach the requested tolerance.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, double achieved)
      : Error(what + " (achieved error estimate " + std::to_string(achieved) + ")"),
        achieved_(achieved) {}
  const char* kind() const noexcept override { return "numeric_error"; }
  double achieved_tolerance() const noexcept { return achieved_; }

 private:
  double achieved_;
};

// The least-squares design matrix for a jump configuration is rank deficient.
class DegenerateFit : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "degenerate_fit"; }
};

// No feasible jump configuration was found.
class EstimationFailed : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "estimation_failed"; }
};

// Inference is unavailable: singular V, or a kernel without a limit law.
class InferenceError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "inference_error"; }
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}
  const char* kind() const noexcept override { return "parse_error"; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "config_error"; }
};

}  // namespace stepdeconv
