#pragma once

#include <stdexcept>
#include <string>

namespace sidefield {

// Exit codes surfaced by the CLI.
enum class ExitCode : int {
  kOk = 0,
  kConfig = 2,
  kContract = 3,
  kExternalService = 4,
};

class Error : public std::runtime_error {
 public:
  Error(const std::string& what, ExitCode code) : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what, ExitCode::kConfig) {}
};

/// Violated pre/postcondition or malformed input data.
class ContractViolation : public Error {
 public:
  explicit ContractViolation(const std::string& what) : Error(what, ExitCode::kContract) {}
};

/// Non-finite activation, loss or parameter.
class NumericalError : public ContractViolation {
 public:
  using ContractViolation::ContractViolation;
};

/// Non-finite training loss; step() is the offending optimizer step.
class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, long long step) : NumericalError(what), step_(step) {}
  long long step() const noexcept { return step_; }

 private:
  long long step_;
};

class ExternalServiceError : public Error {
 public:
  ExternalServiceError(const std::string& what, bool retriable)
      : Error(what, ExitCode::kExternalService), retriable_(retriable) {}
  bool retriable() const noexcept { return retriable_; }

 private:
  bool retriable_;
};

}  // namespace sidefield
