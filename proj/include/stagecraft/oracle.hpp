#pragma once

/// \file
/// Value iteration on finite systems, used as a ground-truth source of
/// UCC certificates and near-optimal controls.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <string>
#include <vector>

#include "stagecraft/certificates.hpp"
#include "stagecraft/cmpfn.hpp"
#include "stagecraft/parallel.hpp"
#include "stagecraft/system.hpp"

namespace stagecraft {

/// Explicit tables: next[x][u], σ per state, ρ per input.
struct FiniteSystem {
  std::string name = "finite";
  std::vector<std::vector<std::size_t>> next;
  std::vector<double> sigma;
  std::vector<double> rho;

  std::size_t states() const { return next.size(); }
  std::size_t inputs() const { return rho.size(); }

  void validate() const {
    if (states() == 0 || states() > 10000) {
      throw Error(ErrorKind::parameter, "finite system needs 1..10^4 states");
    }
    if (inputs() == 0 || inputs() > 100) {
      throw Error(ErrorKind::parameter, "finite system needs 1..100 inputs");
    }
    if (sigma.size() != states()) {
      throw Error(ErrorKind::parameter, "sigma table size mismatch");
    }
    bool has_target = false;
    for (std::size_t x = 0; x < states(); ++x) {
      if (next[x].size() != inputs()) {
        throw Error(ErrorKind::parameter,
                    "transition row " + std::to_string(x) + " is not total");
      }
      for (std::size_t y : next[x]) {
        if (y >= states()) {
          throw Error(ErrorKind::parameter, "transition leaves the state set");
        }
      }
      if (!(sigma[x] >= 0.0) || !std::isfinite(sigma[x])) {
        throw Error(ErrorKind::parameter, "sigma must be finite and nonnegative");
      }
      if (sigma[x] == 0.0) has_target = true;
    }
    for (double r : rho) {
      if (!(r >= 0.0) || !std::isfinite(r)) {
        throw Error(ErrorKind::parameter, "rho must be finite and nonnegative");
      }
    }
    if (!has_target) {
      throw Error(ErrorKind::parameter, "finite system has no state with sigma = 0");
    }
  }

  /// The same system over index-encoded states and inputs.
  ControlSystem as_control_system() const {
    validate();
    ControlSystem s;
    s.name = name;
    s.state_encoding = {EncodingKind::finite, states()};
    s.input_encoding = {EncodingKind::finite, inputs()};
    auto tbl = std::make_shared<const FiniteSystem>(*this);
    s.transition = [tbl](const State& x, const Input& u) {
      return State{static_cast<double>(
          tbl->next[index(x, tbl->states())][index(u, tbl->inputs())])};
    };
    s.sigma = [tbl](const State& x) { return tbl->sigma[index(x, tbl->states())]; };
    s.rho = [tbl](const Input& u) { return tbl->rho[index(u, tbl->inputs())]; };
    return s;
  }

  static std::size_t index(const std::vector<double>& v, std::size_t n) {
    if (v.size() != 1 || !(v[0] >= 0.0) || v[0] != std::floor(v[0]) ||
        static_cast<std::size_t>(v[0]) >= n) {
      throw Error(ErrorKind::domain, "not a valid finite-set element");
    }
    return static_cast<std::size_t>(v[0]);
  }
};

/// States 0..n−1 with σ(i) = i; inputs stay (ρ = 0) and left (ρ = 1).
inline FiniteSystem finite_chain(std::size_t n) {
  FiniteSystem f;
  f.name = "chain";
  f.rho = {0.0, 1.0};
  for (std::size_t i = 0; i < n; ++i) {
    f.next.push_back({i, i == 0 ? 0 : i - 1});
    f.sigma.push_back(static_cast<double>(i));
  }
  return f;
}

/// States 0..n−1 with σ(i) = i; inputs stay (ρ = 0), left (ρ = 1) and
/// halve (ρ = 1, i ↦ ⌊i/2⌋).
inline FiniteSystem finite_grid(std::size_t n) {
  FiniteSystem f;
  f.name = "finite_grid";
  f.rho = {0.0, 1.0, 1.0};
  for (std::size_t i = 0; i < n; ++i) {
    f.next.push_back({i, i == 0 ? 0 : i - 1, i / 2});
    f.sigma.push_back(static_cast<double>(i));
  }
  return f;
}

/// Scalar system sampled on n evenly spaced points of [lo, hi]; successors
/// snap to the nearest grid point (clamped to the interval).
inline FiniteSystem discretize(const ControlSystem& sys, double lo, double hi,
                               std::size_t n, const std::vector<double>& inputs) {
  if (!(hi > lo) || n < 2 || inputs.empty()) {
    throw Error(ErrorKind::parameter, "discretizer needs lo < hi, n >= 2, inputs");
  }
  const double h = (hi - lo) / static_cast<double>(n - 1);
  auto point = [&](std::size_t i) {
    const double x = lo + h * static_cast<double>(i);
    return std::abs(x) < 0.5 * h * 1e-9 ? 0.0 : x;
  };
  FiniteSystem f;
  f.name = sys.name + "_grid";
  for (double u : inputs) f.rho.push_back(sys.rho(Input{u}));
  for (std::size_t i = 0; i < n; ++i) {
    const double x = point(i);
    f.sigma.push_back(sys.sigma(State{x}));
    std::vector<std::size_t> row;
    for (double u : inputs) {
      const double y = sys.transition(State{x}, Input{u})[0];
      const double k = std::clamp(std::round((y - lo) / h), 0.0,
                                  static_cast<double>(n - 1));
      row.push_back(static_cast<std::size_t>(k));
    }
    f.next.push_back(std::move(row));
  }
  return f;
}

inline constexpr double kInfiniteValue = std::numeric_limits<double>::infinity();

struct ValueTable {
  std::vector<double> V;  // kInfiniteValue marks stranded states
  std::vector<std::size_t> policy;
  std::size_t iterations = 0;
  double residual = 0.0;

  bool finite(std::size_t x) const { return std::isfinite(V[x]); }
};

struct ViOptions {
  double tol = 1e-10;
  std::size_t max_iter = 1000000;
};

/// ℓ(x,u) for every state-input pair of a finite system.
inline std::vector<std::vector<double>> cost_table(const FiniteSystem& fs,
                                                   const StageCost& ell) {
  const ControlSystem sys = fs.as_control_system();
  std::vector<std::vector<double>> c(fs.states(),
                                     std::vector<double>(fs.inputs(), 0.0));
  for (std::size_t x = 0; x < fs.states(); ++x) {
    for (std::size_t u = 0; u < fs.inputs(); ++u) {
      c[x][u] = ell(sys, State{static_cast<double>(x)},
                    Input{static_cast<double>(u)});
      if (!(c[x][u] >= 0.0) || !std::isfinite(c[x][u])) {
        throw Error(ErrorKind::parameter, "stage cost must be finite and nonnegative");
      }
    }
  }
  return c;
}

namespace detail {

/// States from which some path reaches a set that can be held at zero
/// cost forever; exactly the states with finite optimal cost.
inline std::vector<bool> finite_cost_states(
    const FiniteSystem& fs, const std::vector<std::vector<double>>& c) {
  const std::size_t n = fs.states();
  std::vector<bool> hold(n, true);
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t x = 0; x < n; ++x) {
      if (!hold[x]) continue;
      bool ok = false;
      for (std::size_t u = 0; u < fs.inputs() && !ok; ++u) {
        ok = c[x][u] == 0.0 && hold[fs.next[x][u]];
      }
      if (!ok) {
        hold[x] = false;
        changed = true;
      }
    }
  }
  std::vector<std::vector<std::size_t>> pred(n);
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t y : fs.next[x]) pred[y].push_back(x);
  }
  std::vector<bool> reach = hold;
  std::deque<std::size_t> queue;
  for (std::size_t x = 0; x < n; ++x) {
    if (hold[x]) queue.push_back(x);
  }
  while (!queue.empty()) {
    const std::size_t y = queue.front();
    queue.pop_front();
    for (std::size_t x : pred[y]) {
      if (!reach[x]) {
        reach[x] = true;
        queue.push_back(x);
      }
    }
  }
  return reach;
}

}  // namespace detail

/// Jacobi value iteration from V = 0. States that cannot reach a zero-cost
/// holding set, or whose value passes 10⁶·max ℓ, are marked infinite.
inline ValueTable value_iterate(const FiniteSystem& fs, const StageCost& ell,
                                const ViOptions& opt = {}) {
  fs.validate();
  const auto c = cost_table(fs, ell);
  const std::size_t n = fs.states();
  double max_cost = 0.0;
  for (const auto& row : c) {
    for (double v : row) max_cost = std::max(max_cost, v);
  }
  const double cap = 1e6 * std::max(max_cost, 1e-300);
  const std::vector<bool> live = detail::finite_cost_states(fs, c);

  ValueTable vt;
  vt.V.assign(n, 0.0);
  vt.policy.assign(n, 0);
  for (std::size_t x = 0; x < n; ++x) {
    if (!live[x]) vt.V[x] = kInfiniteValue;
  }
  auto backup = [&](const std::vector<double>& V, std::size_t x,
                    std::size_t& arg) {
    double best = kInfiniteValue;
    arg = 0;
    for (std::size_t u = 0; u < fs.inputs(); ++u) {
      const double v = c[x][u] + V[fs.next[x][u]];
      if (v < best) {
        best = v;
        arg = u;
      }
    }
    return best;
  };
  std::vector<double> next(n);
  std::vector<double> delta(n);
  for (;;) {
    parallel_for(n, [&](std::size_t x) {
      std::size_t arg = 0;
      next[x] = live[x] ? backup(vt.V, x, arg) : kInfiniteValue;
      if (next[x] > cap) next[x] = kInfiniteValue;
      delta[x] = std::isfinite(next[x]) && std::isfinite(vt.V[x])
                     ? std::abs(next[x] - vt.V[x])
                     : (std::isfinite(next[x]) == std::isfinite(vt.V[x]) ? 0.0
                                                                         : kInfiniteValue);
    });
    vt.V.swap(next);
    ++vt.iterations;
    vt.residual = *std::max_element(delta.begin(), delta.end());
    if (vt.residual <= opt.tol) break;
    if (vt.iterations >= opt.max_iter) {
      throw Error(ErrorKind::budget,
                  "value iteration stopped after " + std::to_string(vt.iterations) +
                      " sweeps with residual " + std::to_string(vt.residual));
    }
  }
  double res = 0.0;
  for (std::size_t x = 0; x < n; ++x) {
    const double b = backup(vt.V, x, vt.policy[x]);
    if (vt.finite(x)) res = std::max(res, std::abs(vt.V[x] - b));
  }
  vt.residual = res;
  return vt;
}

/// The greedy controls from x for `length` steps.
inline std::vector<Input> greedy_controls(const FiniteSystem& fs,
                                          const ValueTable& vt, std::size_t x,
                                          std::size_t length) {
  std::vector<Input> u;
  u.reserve(length);
  for (std::size_t n = 0; n < length; ++n) {
    const std::size_t a = vt.policy[x];
    u.push_back(Input{static_cast<double>(a)});
    x = fs.next[x][a];
  }
  return u;
}

/// J of the greedy policy from x over `max_steps` steps.
inline double greedy_cost(const FiniteSystem& fs, const StageCost& ell,
                          const ValueTable& vt, std::size_t x,
                          std::size_t max_steps = 100000) {
  const auto c = cost_table(fs, ell);
  double J = 0.0;
  for (std::size_t n = 0; n < max_steps; ++n) {
    const std::size_t a = vt.policy[x];
    J += c[x][a];
    x = fs.next[x][a];
  }
  return J;
}

struct ExtractOptions {
  double margin = 1.0;
  /// Length of the greedy control prefix returned by the policy.
  std::size_t policy_length = 4096;
};

/// UCC certificate from a value table: ᾱ is the strictly increasing
/// envelope of {(σ(x), margin·V(x))} over finite-V states (+10⁻⁹·r), the
/// policy is the greedy rollout and the domain is the finite-V states.
inline UCCCert extract_ucc(const ValueTable& vt, const FiniteSystem& fs,
                           const StageCost& ell, const ExtractOptions& opt = {}) {
  if (!(opt.margin >= 1.0)) {
    throw Error(ErrorKind::parameter, "margin must be >= 1");
  }
  std::vector<std::pair<double, double>> pts;
  for (std::size_t x = 0; x < fs.states(); ++x) {
    if (!vt.finite(x)) continue;
    if (fs.sigma[x] == 0.0 && vt.V[x] > 0.0) {
      throw Error(ErrorKind::decomposition,
                  "state " + std::to_string(x) + " has sigma 0 but V = " +
                      std::to_string(vt.V[x]));
    }
    pts.emplace_back(fs.sigma[x], opt.margin * vt.V[x]);
  }
  const KInfFn alpha_bar = upper_envelope(std::move(pts), 1e-9);
  auto tbl = std::make_shared<const FiniteSystem>(fs);
  auto val = std::make_shared<const ValueTable>(vt);
  const std::size_t len = opt.policy_length;
  UCCCert cert;
  cert.ell = ell;
  cert.alpha_bar = alpha_bar;
  cert.domain = [val, n = fs.states()](const State& x) {
    return val->finite(FiniteSystem::index(x, n));
  };
  cert.policy = [tbl, val, len](const State& x) {
    return ControlSequence(
        greedy_controls(*tbl, *val, FiniteSystem::index(x, tbl->states()), len),
        TailRule::none, Input{0.0});
  };
  cert.invariant = true;
  return cert;
}

/// Every finite-V state as a sample.
inline std::vector<State> finite_states(const ValueTable& vt) {
  std::vector<State> out;
  for (std::size_t x = 0; x < vt.V.size(); ++x) {
    if (vt.finite(x)) out.push_back(State{static_cast<double>(x)});
  }
  return out;
}

}  // namespace stagecraft
