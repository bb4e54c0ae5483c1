#pragma once

#include <stdexcept>
#include <string>

namespace orbitforge {

/// Root of every exception thrown by the library. Each module derives its
/// named failure modes from this so callers can catch by module or by kind.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

/// A structurally valid input that breaks an invariant. `field()` names the
/// offending entry (dotted path, e.g. "backplane.clearance").
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace orbitforge
