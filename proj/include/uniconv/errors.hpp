#pragma once

#include <stdexcept>
#include <string>

namespace uniconv {

/// Process exit codes used by the CLI. Library errors carry one of these.
enum class ExitCode : int {
  kOk = 0,
  kDomain = 1,
  kResolution = 2,
  kSolverFailure = 3,
  kUsage = 64,
};

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(ExitCode::kDomain, "domain error: " + what) {}
};

/// A structural invariant (monotonicity, theta range, restrictor type, ...) is violated.
class InvariantError : public Error {
 public:
  explicit InvariantError(const std::string& what)
      : Error(ExitCode::kDomain, "invariant error: " + what) {}
};

/// Caller broke an operation precondition that is not a numeric-domain issue.
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what)
      : Error(ExitCode::kDomain, "contract error: " + what) {}
};

/// Grid or sample resolution too coarse for the requested quantity.
class ResolutionError : public Error {
 public:
  explicit ResolutionError(const std::string& what)
      : Error(ExitCode::kResolution, "resolution error: " + what) {}
};

/// Monte-Carlo noise too large relative to what the caller needs to resolve.
class PrecisionError : public Error {
 public:
  explicit PrecisionError(const std::string& what)
      : Error(ExitCode::kResolution, "precision error: " + what) {}
};

/// Randomized search gave up after its retry budget.
class SolverFailure : public Error {
 public:
  explicit SolverFailure(const std::string& what)
      : Error(ExitCode::kSolverFailure, "solver failure: " + what) {}
};

/// Maps any exception to the CLI exit code.
inline int exit_code_for(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) return static_cast<int>(err->code());
  return static_cast<int>(ExitCode::kDomain);
}

}  // namespace uniconv
