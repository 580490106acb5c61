#pragma once

#include <memory>
#include <stdexcept>
#include <string>

namespace spectra {

// Invalid model/config parameters (probabilities out of range, bad shapes).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Dense-path size guard exceeded.
class SizeGuardError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Numerically tied eigenvalue magnitudes where a strict order is required.
class DegeneracyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Two classes map to the same centroid; they cannot be told apart.
class IndistinguishableClassesError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Iterative solver failed to converge within its iteration cap.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite state in a simulation; carries where it happened.
struct Trace;

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, long long t, int node)
      : std::runtime_error(what), t(t), node(node) {}
  long long t;
  int node;
  // Rows recorded before the failure; attached by the run drivers so
  // callers can persist the partial trace.
  std::shared_ptr<Trace> trace_prefix;
};

// API misuse that a caller contract forbids (e.g. gossip on a non-edge).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace spectra
