#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace ewellness {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid input. field() is a path to the offending value, e.g. "body.lat"
// or "items[3]".
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& message)
      : Error(field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class AuthError : public Error {
 public:
  using Error::Error;
};

class ForbiddenError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

// A caller broke an ordering or shape precondition (unsorted trace,
// non-alternating screen states, mixed participant-days, ...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

}  // namespace ewellness
