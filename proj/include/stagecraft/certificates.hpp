#pragma once

/// \file
/// Controllability certificates and their sampled verification.
///
/// A certificate bundles comparison-function data with a policy oracle that
/// returns, for every x in the domain, the control sequence u_x witnessing
/// the bounds. Verification replays u_x from each sample and records the
/// margin lhs − rhs of every inequality; uniformity over the whole domain
/// is only probed, never proved.

#include <algorithm>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "stagecraft/cmpfn.hpp"
#include "stagecraft/kl.hpp"
#include "stagecraft/parallel.hpp"
#include "stagecraft/system.hpp"

namespace stagecraft {

using Domain = std::function<bool(const State&)>;
using PolicyOracle = std::function<ControlSequence(const State&)>;

inline Domain whole_space() {
  return [](const State&) { return true; };
}

/// σ(φ(n;x,u_x)) ≤ β(σ(x), n)
struct UACCert {
  KLFn beta;
  Domain domain = whole_space();
  PolicyOracle policy;
};

/// UAC with ρ(u_x(n)) ≤ β_u(σ(x), n).
struct UVCCert {
  KLFn beta_x;
  KLFn beta_u;
  Domain domain = whole_space();
  PolicyOracle policy;
};

/// UAC with Σ_{n<N} η(ρ(u_x(n))) ≤ γ(σ(x)) for all N ≥ 1. η may be merely
/// nonnegative; η.is_kinf() gates the guarantees that need η ∈ K∞.
struct UBgECCert {
  KLFn beta;
  NonnegFn eta;
  KInfFn gamma;
  Domain domain = whole_space();
  PolicyOracle policy;
};

/// J_∞(x, u_x | ℓ) ≤ ᾱ(σ(x)); with `invariant`, φ(n;x,u_x) stays in the
/// domain for all n.
struct UCCCert {
  StageCost ell;
  KInfFn alpha_bar;
  Domain domain = whole_space();
  PolicyOracle policy;
  bool invariant = false;
};

using Certificate = std::variant<UACCert, UVCCert, UBgECCert, UCCCert>;

enum class Inequality { state, control, energy, cost, invariance };

inline const char* to_string(Inequality i) {
  switch (i) {
    case Inequality::state: return "state";
    case Inequality::control: return "control";
    case Inequality::energy: return "energy";
    case Inequality::cost: return "cost";
    case Inequality::invariance: return "invariance";
  }
  return "?";
}

struct ReportRow {
  std::size_t sample = 0;
  Inequality inequality = Inequality::state;
  std::size_t n = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;  // lhs − rhs; the check passes when margin ≤ slack
};

struct VerificationReport {
  std::vector<ReportRow> rows;
  /// worst[i] = largest margin seen for sample i (any inequality).
  std::vector<double> worst;
  double slack = 1e-9;
  bool passed = true;
  /// No samples were checked.
  bool vacuous = false;

  double worst_margin() const {
    double w = -std::numeric_limits<double>::infinity();
    for (double v : worst) w = std::max(w, v);
    return w;
  }

  /// Largest margin of one inequality kind over all rows.
  double worst_margin(Inequality kind) const {
    double w = -std::numeric_limits<double>::infinity();
    for (const auto& r : rows) {
      if (r.inequality == kind) w = std::max(w, r.margin);
    }
    return w;
  }
};

namespace detail {

inline ControlSequence policy_controls(const PolicyOracle& policy,
                                       const State& x, std::size_t horizon) {
  if (!policy) {
    throw Error(ErrorKind::certificate_malformed, "certificate has no policy");
  }
  ControlSequence u = policy(x);
  if (horizon > 0 && !u.covers(horizon - 1)) {
    throw Error(ErrorKind::certificate_malformed,
                "policy returned " + std::to_string(u.prefix().size()) +
                    " controls without a tail rule, horizon is " +
                    std::to_string(horizon));
  }
  return u;
}

inline void require_in_domain(const Domain& domain, const State& x,
                              std::size_t i) {
  if (domain && !domain(x)) {
    throw Error(ErrorKind::precondition,
                "sample " + std::to_string(i) + " lies outside the domain");
  }
}

struct RowSink {
  std::vector<ReportRow> rows;
  double worst = -std::numeric_limits<double>::infinity();
  std::size_t sample = 0;

  void add(Inequality k, std::size_t n, double lhs, double rhs) {
    const double m = lhs - rhs;
    rows.push_back({sample, k, n, lhs, rhs, m});
    worst = std::max(worst, m);
  }
};

inline void check_state_bound(RowSink& sink, const ControlSystem& sys,
                              const Trajectory& tr, const KLFn& beta) {
  const double s0 = sys.sigma(tr.states.front());
  for (std::size_t n = 0; n < tr.states.size(); ++n) {
    sink.add(Inequality::state, n, sys.sigma(tr.states[n]),
             beta(s0, static_cast<double>(n)));
  }
}

inline void check_sample(RowSink& sink, const UACCert& c,
                         const ControlSystem& sys, const State& x,
                         std::size_t horizon) {
  const auto u = policy_controls(c.policy, x, horizon);
  check_state_bound(sink, sys, rollout(sys, x, u, horizon), c.beta);
}

inline void check_sample(RowSink& sink, const UVCCert& c,
                         const ControlSystem& sys, const State& x,
                         std::size_t horizon) {
  const auto u = policy_controls(c.policy, x, horizon);
  const Trajectory tr = rollout(sys, x, u, horizon);
  check_state_bound(sink, sys, tr, c.beta_x);
  const double s0 = sys.sigma(x);
  for (std::size_t n = 0; n < tr.inputs.size(); ++n) {
    sink.add(Inequality::control, n, sys.rho(tr.inputs[n]),
             c.beta_u(s0, static_cast<double>(n)));
  }
}

inline void check_sample(RowSink& sink, const UBgECCert& c,
                         const ControlSystem& sys, const State& x,
                         std::size_t horizon) {
  const auto u = policy_controls(c.policy, x, horizon);
  const Trajectory tr = rollout(sys, x, u, horizon);
  check_state_bound(sink, sys, tr, c.beta);
  const double bound = c.gamma(sys.sigma(x));
  double energy = 0.0;
  for (std::size_t n = 0; n < tr.inputs.size(); ++n) {
    energy += c.eta(sys.rho(tr.inputs[n]));
    sink.add(Inequality::energy, n + 1, energy, bound);
  }
}

inline void check_sample(RowSink& sink, const UCCCert& c,
                         const ControlSystem& sys, const State& x,
                         std::size_t horizon) {
  const auto u = policy_controls(c.policy, x, horizon);
  const Trajectory tr = rollout(sys, x, u, horizon);
  const double bound = c.alpha_bar(sys.sigma(x));
  double J = 0.0;
  for (std::size_t n = 0; n < tr.inputs.size(); ++n) {
    J += c.ell(sys, tr.states[n], tr.inputs[n]);
    sink.add(Inequality::cost, n + 1, J, bound);
  }
  if (c.invariant) {
    for (std::size_t n = 0; n < tr.states.size(); ++n) {
      const bool inside = !c.domain || c.domain(tr.states[n]);
      sink.add(Inequality::invariance, n, inside ? 0.0 : 1.0, 0.0);
    }
  }
}

template <class Cert>
VerificationReport verify_impl(const Cert& cert, const ControlSystem& sys,
                               std::span<const State> samples,
                               std::size_t horizon, double slack) {
  std::vector<RowSink> sinks(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    require_in_domain(cert.domain, samples[i], i);
  }
  parallel_for(samples.size(), [&](std::size_t i) {
    sinks[i].sample = i;
    check_sample(sinks[i], cert, sys, samples[i], horizon);
  });
  VerificationReport rep;
  rep.slack = slack;
  rep.vacuous = samples.empty();
  for (auto& s : sinks) {
    rep.worst.push_back(s.worst);
    if (s.worst > slack) rep.passed = false;
    rep.rows.insert(rep.rows.end(), s.rows.begin(), s.rows.end());
  }
  return rep;
}

}  // namespace detail

inline constexpr double kDefaultSlack = 1e-9;

/// Replays every sample for `horizon` steps and checks each inequality of
/// the certificate. Passes iff every margin is ≤ slack.
inline VerificationReport verify(const Certificate& cert,
                                 const ControlSystem& sys,
                                 std::span<const State> samples,
                                 std::size_t horizon,
                                 double slack = kDefaultSlack) {
  return std::visit(
      [&](const auto& c) {
        return detail::verify_impl(c, sys, samples, horizon, slack);
      },
      cert);
}

/// UACwUVC ⇒ UACwUBgEC: with β_u ≤ γ₂(θⁿγ₁), η = γ₂⁻¹ and
/// γ = γ₁/(1−θ) bound the generalized energy.
inline UBgECCert uvc_to_ubgec(const UVCCert& cert, double theta = 0.5,
                              const ValidationGrid& grid = {}) {
  const KLDecomposition d = kl_decompose(cert.beta_u, theta, grid);
  return UBgECCert{cert.beta_x, NonnegFn(d.gamma2.inverse_fn()),
                   scale(1.0 / (1.0 - theta), d.gamma1), cert.domain,
                   cert.policy};
}

/// UACwUBgEC ⇒ UAC by forgetting the energy bound.
inline UACCert drop_energy(const UBgECCert& cert) {
  return UACCert{cert.beta, cert.domain, cert.policy};
}

/// β = max(w1,1)·β_x + max(w2,1)·β_u bounds w1·σ(φ(n)) + w2·ρ(u(n)).
inline KLFn joint_bound_merge(const UVCCert& cert, double w1, double w2) {
  if (!(w1 >= 0.0) || !(w2 >= 0.0)) {
    throw Error(ErrorKind::parameter, "joint bound weights must be nonnegative");
  }
  return KLFn::weighted(
      {{std::max(w1, 1.0), cert.beta_x}, {std::max(w2, 1.0), cert.beta_u}});
}

struct UvcBounds {
  KLFn beta_x;
  KLFn beta_u;
};

/// From w1·σ + w2·ρ ≤ β: β_x = β_u = max(1/w1, 1/w2)·β.
inline UvcBounds joint_bound_split(const KLFn& beta, double w1, double w2) {
  if (!(w1 > 0.0) || !(w2 > 0.0)) {
    throw Error(ErrorKind::parameter, "joint bound weights must be positive");
  }
  const KLFn b = scale(std::max(1.0 / w1, 1.0 / w2), beta);
  return {b, b};
}

}  // namespace stagecraft
