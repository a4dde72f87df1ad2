#pragma once

#include <stdexcept>
#include <string>

namespace stagecraft {

/// Failure categories raised by the library. The CLI maps these onto exit
/// codes: precondition and parameter problems are configuration errors (2),
/// everything numeric is an internal error (3).
enum class ErrorKind {
  domain,               // negative argument to a comparison function
  parameter,            // nonpositive coefficient, theta outside (0,1), ...
  non_surjective,       // inversion bracket never passed the target
  decomposition,        // KL envelope failed to dominate on the grid
  simulation,           // non-finite state during rollout
  certificate_malformed,// policy too short for the requested horizon
  choice_rejected,      // q/r choice violates its domination bound
  interaction_rejected, // interaction term violates its declared bound
  non_contraction,      // beta never drops below R_sigma
  budget,               // step count exceeded the configured cap
  construction,         // converse beta failed its KL checks
  precondition,         // theorem hypothesis not met (e.g. no invariance)
  config,               // malformed experiment configuration
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::domain: return "domain";
    case ErrorKind::parameter: return "parameter";
    case ErrorKind::non_surjective: return "non_surjective";
    case ErrorKind::decomposition: return "decomposition";
    case ErrorKind::simulation: return "simulation";
    case ErrorKind::certificate_malformed: return "certificate_malformed";
    case ErrorKind::choice_rejected: return "choice_rejected";
    case ErrorKind::interaction_rejected: return "interaction_rejected";
    case ErrorKind::non_contraction: return "non_contraction";
    case ErrorKind::budget: return "budget";
    case ErrorKind::construction: return "construction";
    case ErrorKind::precondition: return "precondition";
    case ErrorKind::config: return "config";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Rollout failure; carries the step at which the state became invalid.
class SimulationError : public Error {
 public:
  SimulationError(std::size_t step, const std::string& what)
      : Error(ErrorKind::simulation,
              what + " (step " + std::to_string(step) + ")"),
        step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace stagecraft
