#pragma once

#include <stdexcept>
#include <string>

namespace antibunch {

/// Input violates a documented precondition (bad cutoff, negative magnitude, ...).
class InvalidArgument : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Input is well-formed but outside the weak-field / perturbative regime the
/// model is valid for.
class OutOfRegime : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// Malformed file contents (CSV, JSON sidecar, config).
class FormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace antibunch
