#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace smallscat {

enum class ErrorKind {
  validation,  // bad arguments, malformed input, precondition failures
  numerical,   // solver breakdown, singular systems, non-convergence
  io           // file access and parse failures
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, std::string msg)
      : std::runtime_error(std::move(msg)), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  static Error validation(std::string msg) {
    return Error(ErrorKind::validation, std::move(msg));
  }
  static Error numerical(std::string msg) {
    return Error(ErrorKind::numerical, std::move(msg));
  }
  static Error io(std::string msg) {
    return Error(ErrorKind::io, std::move(msg));
  }

private:
  ErrorKind kind_;
};

}  // namespace smallscat
