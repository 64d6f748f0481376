#pragma once

#include <stdexcept>
#include <string>

namespace rbsde {

// Base of everything the library throws on bad input or failed checks.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  DimensionMismatch(const std::string& what, long expected, long got)
      : Error(what + ": expected dimension " + std::to_string(expected) +
              ", got " + std::to_string(got)) {}
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Polytope projection did not reach the residual within the iteration cap.
class ProjectionNotConverged : public Error {
 public:
  using Error::Error;
};

// A standing assumption on the problem data failed. `tag()` names it
// ("H1".."H4", "stability", "grid", ...).
class AssumptionViolation : public Error {
 public:
  AssumptionViolation(std::string tag, const std::string& what)
      : Error("[" + tag + "] " + what), tag_(std::move(tag)) {}
  const std::string& tag() const noexcept { return tag_; }

 private:
  std::string tag_;
};

class SizeGuardExceeded : public Error {
 public:
  using Error::Error;
};

}  // namespace rbsde
