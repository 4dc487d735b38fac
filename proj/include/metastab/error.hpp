#pragma once

#include <stdexcept>
#include <string>

namespace metastab {

// Invalid parameters, out-of-range epsilon, malformed config documents.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// A family whose geometry contradicts its own declarations.
class FamilyDefinitionError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Ulam grid too coarse for the requested hole size.
class ResolutionError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ConvergenceError : public std::runtime_error {
public:
  ConvergenceError(const std::string& what, double last_residual)
      : std::runtime_error(what), residual_(last_residual) {}
  double residual() const { return residual_; }

private:
  double residual_;
};

class IrreducibilityError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Two independent computations of the same quantity disagree.
class ConsistencyError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace metastab
