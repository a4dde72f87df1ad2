#pragma once

/// \file
/// Built-in systems paired with a stabilizing policy and a UVC certificate
/// for it, plus deterministic sample generation.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "stagecraft/certificates.hpp"
#include "stagecraft/cmpfn.hpp"
#include "stagecraft/kl.hpp"
#include "stagecraft/oracle.hpp"
#include "stagecraft/system.hpp"

namespace stagecraft {

using FeedbackLaw = std::function<Input(const State&)>;

/// The closed-loop controls of `law` from x, rolled out for `length` steps.
inline PolicyOracle feedback_policy(const ControlSystem& sys, FeedbackLaw law,
                                    std::size_t length) {
  return [sys, law, length](const State& x0) {
    std::vector<Input> u;
    u.reserve(length);
    State x = x0;
    for (std::size_t n = 0; n < length; ++n) {
      u.push_back(law(x));
      x = sys.transition(x, u.back());
    }
    return ControlSequence(std::move(u), TailRule::none, sys.zero_input());
  };
}

struct BuiltinCase {
  ControlSystem sys;
  UVCCert cert;
};

inline KLFn halving(double c = 1.0) {
  const KInfFn g = c == 1.0 ? KInfFn::identity() : KInfFn::linear(c);
  return KLFn::separable(g, 0.5, KInfFn::identity());
}

/// x₊ = a·x + b·u with u = k·x, k = (0.5 − a)/b, so x₊ = 0.5x.
/// β_x = r·0.5ᵗ and β_u = max(|k|,1)·r·0.5ᵗ. With a = 0.5 the policy is
/// u ≡ 0.
inline BuiltinCase builtin_scalar_linear(double a = 0.5, double b = 1.0,
                                         std::size_t length = 1024) {
  if (b == 0.0) throw Error(ErrorKind::parameter, "b must be nonzero");
  BuiltinCase c{scalar_linear(a, b), {}};
  const double k = (0.5 - a) / b;
  c.cert.beta_x = halving();
  c.cert.beta_u = halving(std::max(std::abs(k), 1.0));
  if (k == 0.0) {
    c.cert.policy = [](const State&) { return ControlSequence::zeros(Input{0.0}); };
  } else {
    c.cert.policy = feedback_policy(
        c.sys, [k](const State& x) { return Input{k * x[0]}; }, length);
  }
  return c;
}

/// Deadbeat u = −x₀ − 2x₁ reaches the origin in two steps.
inline BuiltinCase builtin_double_integrator(std::size_t length = 1024) {
  BuiltinCase c{double_integrator(), {}};
  c.cert.beta_x = halving(4.0);
  c.cert.beta_u = halving(3.0);
  c.cert.policy = feedback_policy(
      c.sys, [](const State& x) { return Input{-x[0] - 2.0 * x[1]}; }, length);
  return c;
}

/// finite_grid(n) halving towards 0, then staying.
inline BuiltinCase builtin_finite_grid(std::size_t n = 32,
                                       std::size_t length = 1024) {
  BuiltinCase c{finite_grid(n).as_control_system(), {}};
  c.cert.beta_x = halving();
  c.cert.beta_u = halving();
  c.cert.policy = feedback_policy(
      c.sys, [](const State& x) { return Input{x[0] > 0.0 ? 2.0 : 0.0}; },
      length);
  return c;
}

/// u = −x/(2(1+x²)) gives x₊ = x/(2(1+x²)).
inline BuiltinCase builtin_scalar_nonlinear(std::size_t length = 1024) {
  BuiltinCase c{scalar_nonlinear(), {}};
  c.cert.beta_x = halving();
  c.cert.beta_u = halving(0.5);
  c.cert.policy = feedback_policy(
      c.sys,
      [](const State& x) { return Input{-x[0] / (2.0 * (1.0 + x[0] * x[0]))}; },
      length);
  return c;
}

inline const std::vector<std::string>& builtin_names() {
  static const std::vector<std::string> names{
      "scalar_linear", "double_integrator", "finite_grid", "scalar_nonlinear"};
  return names;
}

inline BuiltinCase make_builtin(const std::string& name,
                                std::size_t length = 1024) {
  if (name == "scalar_linear") return builtin_scalar_linear(0.5, 1.0, length);
  if (name == "double_integrator") return builtin_double_integrator(length);
  if (name == "finite_grid") return builtin_finite_grid(32, length);
  if (name == "scalar_nonlinear") return builtin_scalar_nonlinear(length);
  throw Error(ErrorKind::config, "unknown built-in system '" + name + "'");
}

/// `count` states with σ log-spaced on [lo, hi]; signs or directions drawn
/// from `seed`. Finite systems yield the first `count` elements instead.
inline std::vector<State> make_samples(const ControlSystem& sys,
                                       std::size_t count, double lo = 1e-3,
                                       double hi = 1e3, std::uint64_t seed = 0) {
  std::vector<State> out;
  if (count == 0) return out;
  if (sys.state_encoding.kind == EncodingKind::finite) {
    for (std::size_t i = 0; i < std::min(count, sys.state_encoding.size); ++i) {
      out.push_back(State{static_cast<double>(i)});
    }
    return out;
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto radii = log_grid(lo, hi, count);
  const std::size_t dim = sys.state_encoding.size;
  for (double r : radii) {
    State dir(dim);
    double norm = 0.0;
    while (!(norm > 1e-12)) {
      for (auto& v : dir) v = normal(rng);
      norm = 0.0;
      for (double v : dir) norm += v * v;
      norm = std::sqrt(norm);
    }
    State x(dim);
    for (std::size_t k = 0; k < dim; ++k) x[k] = dir[k] / norm;
    // rescale so σ(x) hits r exactly when σ is positively homogeneous
    const double s = sys.sigma(x);
    for (auto& v : x) v *= r / s;
    out.push_back(std::move(x));
  }
  return out;
}

}  // namespace stagecraft
