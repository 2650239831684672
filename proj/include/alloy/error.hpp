#pragma once

#include <stdexcept>
#include <string>

namespace alloy {

/// Bad input: violated precondition, malformed configuration.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// A numerical procedure could not deliver its contract
/// (singular resolvent, quadrature or convergence failure, ...).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ValidationError(message);
}

}  // namespace alloy
