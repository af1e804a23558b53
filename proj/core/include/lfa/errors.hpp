#pragma once

#include <stdexcept>
#include <string>

namespace lfa {

/// Base class of everything thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Violated precondition: mismatched shapes, invalid arguments, empty inputs.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Malformed file content. kind() distinguishes the failure classes so
/// callers (and tests) can tell a truncated file from a bad magic.
class FormatError : public Error {
 public:
  enum class Kind {
    Truncated,
    BadMagic,
    BadVersion,
    LabelOutOfRange,
    NonFinitePayload,
    Malformed,
  };

  FormatError(Kind kind, const std::string& message) : Error(message), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Training loss became non-finite or blew past the divergence guard.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace lfa
