#pragma once

#include <stdexcept>
#include <string>

namespace msrlab {

// Base of every error the library throws. The CLI maps the subclasses onto
// exit codes: ConfigError -> 2, RepositoryError -> 3, everything else -> 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class RepositoryError : public Error {
 public:
  using Error::Error;
};

class NotARepositoryError : public RepositoryError {
 public:
  using RepositoryError::RepositoryError;
};

class UnknownBranchError : public RepositoryError {
 public:
  using RepositoryError::RepositoryError;
};

class GitMissingError : public RepositoryError {
 public:
  using RepositoryError::RepositoryError;
};

class PathAbsentError : public RepositoryError {
 public:
  using RepositoryError::RepositoryError;
};

// Unparseable git output; the message carries the raw offending text.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Statistic is undefined for the given input (zero variance, p_e = 1, ...).
class UndefinedStatisticError : public Error {
 public:
  using Error::Error;
};

class InvalidArgumentError : public Error {
 public:
  using Error::Error;
};

class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, int iterations)
      : Error(what + " (after " + std::to_string(iterations) + " iterations)"),
        iterations_(iterations) {}
  int iterations() const noexcept { return iterations_; }

 private:
  int iterations_;
};

// Failure inside one pipeline stage; the stage name is reported by the CLI.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error("stage '" + stage + "': " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace msrlab
