#pragma once

/// \file
/// Discrete-time control systems x₊ = f(x,u), trajectories, stage costs and
/// total costs.

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stagecraft/cmpfn.hpp"

namespace stagecraft {

/// States and inputs are flat real vectors; finite sets use a single entry
/// holding the element index.
using State = std::vector<double>;
using Input = std::vector<double>;

enum class EncodingKind { real_vector, finite };

struct Encoding {
  EncodingKind kind = EncodingKind::real_vector;
  std::size_t size = 1;  // dimension, or cardinality for finite sets
};

struct ControlSystem {
  std::string name;
  Encoding state_encoding;
  Encoding input_encoding;
  std::function<State(const State&, const Input&)> transition;
  std::function<double(const State&)> sigma;
  std::function<double(const Input&)> rho;

  Input zero_input() const {
    return Input(input_encoding.kind == EncodingKind::finite
                     ? 1
                     : input_encoding.size,
                 0.0);
  }
};

/// How a finite control prefix continues past its end.
enum class TailRule { none, repeat_last, zero_input };

/// A control sequence u ∈ U^∞ stored as a finite prefix plus a tail rule.
class ControlSequence {
 public:
  ControlSequence() = default;
  ControlSequence(std::vector<Input> prefix, TailRule tail,
                  Input zero = Input{0.0})
      : prefix_(std::move(prefix)), tail_(tail), zero_(std::move(zero)) {}

  /// Constant zero input forever.
  static ControlSequence zeros(Input zero) {
    return ControlSequence({}, TailRule::zero_input, std::move(zero));
  }

  bool covers(std::size_t n) const {
    if (n < prefix_.size()) return true;
    if (tail_ == TailRule::zero_input) return true;
    return tail_ == TailRule::repeat_last && !prefix_.empty();
  }

  /// Number of defined entries; SIZE_MAX when the tail is declared.
  std::size_t defined_length() const {
    return covers(prefix_.size()) ? static_cast<std::size_t>(-1)
                                  : prefix_.size();
  }

  const Input& at(std::size_t n) const {
    if (n < prefix_.size()) return prefix_[n];
    if (tail_ == TailRule::zero_input) return zero_;
    if (tail_ == TailRule::repeat_last && !prefix_.empty()) return prefix_.back();
    throw Error(ErrorKind::certificate_malformed,
                "control sequence undefined at step " + std::to_string(n) +
                    " (prefix length " + std::to_string(prefix_.size()) + ")");
  }

  const std::vector<Input>& prefix() const { return prefix_; }
  TailRule tail() const { return tail_; }
  const Input& zero() const { return zero_; }

 private:
  std::vector<Input> prefix_;
  TailRule tail_ = TailRule::none;
  Input zero_{0.0};
};

/// φ(n; x, u) for n = 0..N together with the inputs applied.
struct Trajectory {
  std::vector<State> states;
  std::vector<Input> inputs;

  std::size_t length() const { return inputs.size(); }

  /// states[n+1] == f(states[n], inputs[n]) exactly, for every n.
  bool replays(const ControlSystem& sys) const {
    if (states.size() != inputs.size() + 1) return false;
    for (std::size_t n = 0; n < inputs.size(); ++n) {
      if (sys.transition(states[n], inputs[n]) != states[n + 1]) return false;
    }
    return true;
  }
};

namespace detail {
inline bool all_finite(const State& x) {
  for (double v : x) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}
}  // namespace detail

inline Trajectory rollout(const ControlSystem& sys, const State& x0,
                          const ControlSequence& u, std::size_t N) {
  Trajectory tr;
  tr.states.reserve(N + 1);
  tr.inputs.reserve(N);
  tr.states.push_back(x0);
  for (std::size_t n = 0; n < N; ++n) {
    const Input& un = u.at(n);
    State next = sys.transition(tr.states.back(), un);
    if (!detail::all_finite(next)) {
      throw SimulationError(n, "non-finite state in " + sys.name);
    }
    tr.inputs.push_back(un);
    tr.states.push_back(std::move(next));
  }
  return tr;
}

inline Trajectory rollout(const ControlSystem& sys, const State& x0,
                          std::span<const Input> u, std::size_t N) {
  if (u.size() < N) {
    throw Error(ErrorKind::certificate_malformed,
                "input sequence shorter than horizon");
  }
  return rollout(sys, x0,
                 ControlSequence(std::vector<Input>(u.begin(), u.begin() + N),
                                 TailRule::none),
                 N);
}

/// Opaque nonnegative map on state-input pairs.
using Interaction = std::function<double(const State&, const Input&)>;

/// ℓ(x,u) = q(σ(x)) + r(ρ(u)) + s(x,u); `s` may be empty.
struct StageCost {
  KInfFn q;
  NonnegFn r;
  Interaction s;

  double operator()(const ControlSystem& sys, const State& x,
                    const Input& u) const {
    double v = q(sys.sigma(x)) + r(sys.rho(u));
    if (s) v += s(x, u);
    return v;
  }

  /// The lower bound α̲ with ℓ(x,u) ≥ α̲(σ(x)).
  const KInfFn& lower_bound() const { return q; }
};

/// J_N(x, u | ℓ)
inline double total_cost(const ControlSystem& sys, const StageCost& ell,
                         const State& x0, const ControlSequence& u,
                         std::size_t N) {
  double J = 0.0;
  State x = x0;
  for (std::size_t n = 0; n < N; ++n) {
    const Input& un = u.at(n);
    J += ell(sys, x, un);
    x = sys.transition(x, un);
    if (!detail::all_finite(x)) {
      throw SimulationError(n, "non-finite state in " + sys.name);
    }
  }
  return J;
}

/// Truncation settings for J_∞.
struct InfiniteHorizon {
  std::size_t max_steps = 2048;
  double tail_tolerance = 1e-10;
};

struct InfiniteCost {
  double value = 0.0;
  bool converged = false;
  std::size_t steps = 0;
};

/// J_∞ by partial sums. Converged once the sum grew by less than the
/// tolerance over the last quarter of the steps taken so far. Running out
/// of defined controls or steps yields converged == false.
inline InfiniteCost total_cost_infinite(const ControlSystem& sys,
                                        const StageCost& ell, const State& x0,
                                        const ControlSequence& u,
                                        const InfiniteHorizon& h = {}) {
  std::vector<double> partial{0.0};
  partial.reserve(h.max_steps + 1);
  State x = x0;
  for (std::size_t n = 0; n < h.max_steps; ++n) {
    if (!u.covers(n)) return {partial.back(), false, n};
    const Input& un = u.at(n);
    partial.push_back(partial.back() + ell(sys, x, un));
    x = sys.transition(x, un);
    if (!detail::all_finite(x)) {
      throw SimulationError(n, "non-finite state in " + sys.name);
    }
    const std::size_t k = n + 1;
    if (k >= 8 && partial[k] - partial[(3 * k) / 4] < h.tail_tolerance) {
      return {partial[k], true, k};
    }
  }
  return {partial.back(), false, h.max_steps};
}

// Built-in systems. σ and ρ are Euclidean norms unless noted.

/// x₊ = a·x + b·u on R.
inline ControlSystem scalar_linear(double a = 0.5, double b = 1.0) {
  ControlSystem s;
  s.name = "scalar_linear";
  s.transition = [a, b](const State& x, const Input& u) {
    return State{a * x[0] + b * u[0]};
  };
  s.sigma = [](const State& x) { return std::abs(x[0]); };
  s.rho = [](const Input& u) { return std::abs(u[0]); };
  return s;
}

/// Double integrator x₊ = [[1,1],[0,1]]x + [0,1]ᵀu, a controllable pair.
inline ControlSystem double_integrator() {
  ControlSystem s;
  s.name = "double_integrator";
  s.state_encoding = {EncodingKind::real_vector, 2};
  s.transition = [](const State& x, const Input& u) {
    return State{x[0] + x[1], x[1] + u[0]};
  };
  s.sigma = [](const State& x) { return std::hypot(x[0], x[1]); };
  s.rho = [](const Input& u) { return std::abs(u[0]); };
  return s;
}

/// x₊ = x/(1+x²) + u on R.
inline ControlSystem scalar_nonlinear() {
  ControlSystem s;
  s.name = "scalar_nonlinear";
  s.transition = [](const State& x, const Input& u) {
    return State{x[0] / (1.0 + x[0] * x[0]) + u[0]};
  };
  s.sigma = [](const State& x) { return std::abs(x[0]); };
  s.rho = [](const Input& u) { return std::abs(u[0]); };
  return s;
}

}  // namespace stagecraft
