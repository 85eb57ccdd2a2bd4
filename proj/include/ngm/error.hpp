#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ngm {

enum class ErrorKind {
  configuration,
  invalid_data,
  domain,
  degenerate_perturbation,
  numerical,
  training_failure,
};

const char* to_string(ErrorKind kind);

// Exit code used by the command-line tool for each error kind.
int exit_code(ErrorKind kind);

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

class TrainingError : public Error {
public:
  TrainingError(const std::string& what, std::vector<double> trace)
      : Error(ErrorKind::training_failure, what), trace_(std::move(trace)) {}
  const std::vector<double>& loss_trace() const noexcept { return trace_; }

private:
  std::vector<double> trace_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace ngm
