#pragma once

/// \file
/// Stage-cost synthesis from a UACwUBgEC certificate.
///
/// Given β ≤ γ₂(θⁿγ₁), q ≤ C_q·γ₂⁻¹ and r ≤ C_r·η, the stage cost
/// ℓ = q∘σ + r∘ρ has J_∞(x,u_x|ℓ) ≤ ᾱ(σ(x)) with
/// ᾱ = C_q/(1−θ)·γ₁ + C_r·γ. Interaction terms s(x,u) enlarge ᾱ, and a
/// stage cost that is only roughly bounded while σ ≥ R_σ is handled by
/// splitting the time axis at the threshold.
///
/// Bounds on q, r and s are checked by sampling. A passing check is a
/// failed attempt at falsification, not a proof.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "stagecraft/certificates.hpp"
#include "stagecraft/cmpfn.hpp"
#include "stagecraft/kl.hpp"
#include "stagecraft/system.hpp"

namespace stagecraft {

/// The data a SynthesisResult was built from.
struct Provenance {
  KInfFn gamma1;
  KInfFn gamma2;
  double theta = 0.5;
  double Cq = 1.0;
  double Cr = 1.0;
  double C1 = 0.0;
  double C2 = 0.0;
  double C3 = 0.0;
  std::optional<KInfFn> alpha;
  std::optional<double> R_sigma;
};

struct SynthesisResult {
  StageCost ell;
  KInfFn alpha_bar;
  Provenance provenance;
};

struct SynthesisOptions {
  double theta = 0.5;
  double Cq = 1.0;
  double Cr = 1.0;
  std::optional<KInfFn> q_choice;
  std::optional<NonnegFn> r_choice;
  ValidationGrid grid;
};

namespace detail {

inline bool within(double lhs, double rhs) {
  return lhs <= rhs + 1e-9 * std::max(1.0, std::abs(rhs));
}

inline void require_positive_coefficient(double c, const char* what) {
  if (!(c > 0.0) || !std::isfinite(c)) {
    throw Error(ErrorKind::parameter,
                std::string(what) + " must be positive, got " + std::to_string(c));
  }
}

}  // namespace detail

/// Builds ℓ = q∘σ + r∘ρ and ᾱ = C_q/(1−θ)·γ₁ + C_r·γ. Defaults q = γ₂⁻¹,
/// r = η. Custom choices must satisfy q ≤ C_q·γ₂⁻¹ and r ≤ C_r·η on the
/// validation grid, otherwise Error(choice_rejected).
inline SynthesisResult synthesize(const UBgECCert& cert,
                                  const SynthesisOptions& opt = {}) {
  require_theta(opt.theta);
  detail::require_positive_coefficient(opt.Cq, "C_q");
  detail::require_positive_coefficient(opt.Cr, "C_r");
  const KLDecomposition d = kl_decompose(cert.beta, opt.theta, opt.grid);
  const KInfFn g2inv = d.gamma2.inverse_fn();

  KInfFn q = g2inv;
  if (opt.q_choice) {
    for (double r : opt.grid.r) {
      if (!detail::within((*opt.q_choice)(r), opt.Cq * g2inv(r))) {
        throw Error(ErrorKind::choice_rejected,
                    "q exceeds C_q·γ₂⁻¹ at r = " + std::to_string(r));
      }
    }
    q = *opt.q_choice;
  }
  NonnegFn rfn = cert.eta;
  if (opt.r_choice) {
    for (double r : opt.grid.r) {
      if (!detail::within((*opt.r_choice)(r), opt.Cr * cert.eta(r))) {
        throw Error(ErrorKind::choice_rejected,
                    "r exceeds C_r·η at r = " + std::to_string(r));
      }
    }
    rfn = *opt.r_choice;
  }
  const KInfFn alpha_bar = scale(opt.Cq / (1.0 - opt.theta), d.gamma1) +
                           scale(opt.Cr, cert.gamma);
  Provenance p;
  p.gamma1 = d.gamma1;
  p.gamma2 = d.gamma2;
  p.theta = opt.theta;
  p.Cq = opt.Cq;
  p.Cr = opt.Cr;
  return SynthesisResult{StageCost{q, rfn, {}}, alpha_bar, p};
}

/// Checks J_N(x, u_x | ℓ) ≤ ᾱ(σ(x)) for N ≤ horizon with the certificate's
/// controls.
inline VerificationReport certify_ucc(const SynthesisResult& result,
                                      const UBgECCert& cert,
                                      const ControlSystem& sys,
                                      std::span<const State> samples,
                                      std::size_t horizon,
                                      double slack = kDefaultSlack) {
  UCCCert ucc{result.ell, result.alpha_bar, cert.domain, cert.policy, false};
  return verify(ucc, sys, samples, horizon, slack);
}

/// Bound data for the large-σ region: ℓ ≤ α_x(σ) + α_u(ρ) when σ ≥ R_σ.
struct TransientData {
  double R_sigma = 1.0;
  KInfFn alpha_x;
  KInfFn alpha_u;
};

/// An interaction term s with its declared bound
///   s(x,u) ≤ C₁γ₂⁻¹(σ) + C₂η(ρ) + C₃γ₂⁻¹(σ)·α(ρ).
/// With transient data present, `s` is the complete stage cost, the bound
/// above is only required where σ < R_σ, and ℓ ≤ α_x(σ) + α_u(ρ) elsewhere.
/// `check_points` are the (x,u) pairs the bound is sampled on.
struct InteractionSpec {
  Interaction s;
  double C1 = 0.0;
  double C2 = 0.0;
  double C3 = 0.0;
  std::optional<KInfFn> alpha;
  std::optional<TransientData> transient;
  std::vector<std::pair<State, Input>> check_points;
};

/// Cross product of states and inputs, the usual check-point set.
inline std::vector<std::pair<State, Input>> cross_points(
    std::span<const State> xs, std::span<const Input> us) {
  std::vector<std::pair<State, Input>> out;
  out.reserve(xs.size() * us.size());
  for (const auto& x : xs) {
    for (const auto& u : us) out.emplace_back(x, u);
  }
  return out;
}

struct InteractionCheck {
  bool passed = true;
  double worst_excess = -std::numeric_limits<double>::infinity();
  std::size_t worst_point = 0;
};

/// Samples the declared bound of `spec` on its check points.
inline InteractionCheck check_interaction(const InteractionSpec& spec,
                                          const KInfFn& gamma2,
                                          const NonnegFn& eta,
                                          const ControlSystem& sys) {
  if (!spec.s) throw Error(ErrorKind::parameter, "interaction term is empty");
  if (spec.C1 < 0.0 || spec.C2 < 0.0 || spec.C3 < 0.0) {
    throw Error(ErrorKind::parameter, "interaction coefficients must be >= 0");
  }
  if (spec.C3 > 0.0 && !spec.alpha) {
    throw Error(ErrorKind::parameter, "C3 > 0 needs an alpha function");
  }
  InteractionCheck out;
  for (std::size_t i = 0; i < spec.check_points.size(); ++i) {
    const auto& [x, u] = spec.check_points[i];
    const double sx = sys.sigma(x);
    const double ru = sys.rho(u);
    double rhs;
    if (spec.transient && sx >= spec.transient->R_sigma) {
      rhs = spec.transient->alpha_x(sx) + spec.transient->alpha_u(ru);
    } else {
      const double g = gamma2.inverse(sx);
      rhs = spec.C1 * g + spec.C2 * eta(ru);
      if (spec.C3 > 0.0) rhs += spec.C3 * g * (*spec.alpha)(ru);
    }
    const double lhs = spec.s(x, u);
    const double excess = lhs - rhs;
    if (excess > out.worst_excess) {
      out.worst_excess = excess;
      out.worst_point = i;
    }
    if (!detail::within(lhs, rhs)) out.passed = false;
  }
  return out;
}

/// The interaction contribution
///   C₁/(1−θ)·γ₁ + C₂·γ + C₃/(1−θ)·γ₁·(α∘η⁻¹∘γ),
/// or nullopt when all coefficients vanish.
inline std::optional<KInfFn> interaction_bound(double C1, double C2, double C3,
                                               const std::optional<KInfFn>& alpha,
                                               const KInfFn& gamma1,
                                               const KInfFn& eta,
                                               const KInfFn& gamma,
                                               double theta) {
  std::optional<KInfFn> acc;
  auto add = [&acc](const KInfFn& f) { acc = acc ? *acc + f : f; };
  if (C1 > 0.0) add(scale(C1 / (1.0 - theta), gamma1));
  if (C2 > 0.0) add(scale(C2, gamma));
  if (C3 > 0.0) {
    const KInfFn growth = compose(*alpha, compose(eta.inverse_fn(), gamma));
    add(scale(C3 / (1.0 - theta), gamma1) * growth);
  }
  return acc;
}

/// ℓ + s with the enlarged bound
///   ᾱ = (C_q+C₁)/(1−θ)·γ₁ + (C_r+C₂)·γ + C₃/(1−θ)·γ₁·(α∘η⁻¹∘γ).
/// Needs η ∈ K∞. Error(interaction_rejected) when the sampled bound check
/// fails.
inline SynthesisResult admit_interaction(const InteractionSpec& spec,
                                         const SynthesisResult& base,
                                         const UBgECCert& cert,
                                         const ControlSystem& sys) {
  const auto eta = cert.eta.as_kinf();
  if (!eta) {
    throw Error(ErrorKind::precondition,
                "interaction terms need a K-infinity eta");
  }
  const Provenance& p = base.provenance;
  const InteractionCheck chk = check_interaction(spec, p.gamma2, cert.eta, sys);
  if (!chk.passed) {
    throw Error(ErrorKind::interaction_rejected,
                "declared bound exceeded by " + std::to_string(chk.worst_excess) +
                    " at check point " + std::to_string(chk.worst_point));
  }
  KInfFn alpha_bar = scale((p.Cq + spec.C1) / (1.0 - p.theta), p.gamma1) +
                     scale(p.Cr + spec.C2, cert.gamma);
  if (spec.C3 > 0.0) {
    alpha_bar = alpha_bar + *interaction_bound(0.0, 0.0, spec.C3, spec.alpha,
                                               p.gamma1, *eta, cert.gamma,
                                               p.theta);
  }
  SynthesisResult out = base;
  out.ell.s = spec.s;
  out.alpha_bar = alpha_bar;
  out.provenance.C1 = spec.C1;
  out.provenance.C2 = spec.C2;
  out.provenance.C3 = spec.C3;
  out.provenance.alpha = spec.alpha;
  return out;
}

/// α₃(s) = min{γ₂⁻¹(α₁⁻¹(s/2)), η(α₂⁻¹(s/2))}, so that
/// s(x,u) = α₃(α₁(σ(x)) + α₂(ρ(u))) is admissible with C₁ = C₂ = 1.
inline KInfFn build_alpha3(const KInfFn& alpha1, const KInfFn& alpha2,
                           const KInfFn& gamma2, const KInfFn& eta) {
  const KInfFn half = KInfFn::linear(0.5);
  const KInfFn a = compose(gamma2.inverse_fn(), compose(alpha1.inverse_fn(), half));
  const KInfFn b = compose(eta, compose(alpha2.inverse_fn(), half));
  return combine(a, b, Combine::min);
}

/// min{n : β(r,n) < R_σ} by forward search.
inline std::size_t transient_steps(const KLFn& beta, double R_sigma, double r,
                                   std::size_t cap = 1000000) {
  for (std::size_t n = 0; n <= cap; ++n) {
    if (beta(r, static_cast<double>(n)) < R_sigma) return n;
  }
  throw Error(ErrorKind::non_contraction,
              "beta(" + std::to_string(r) + ", n) stays above R_sigma for " +
                  std::to_string(cap) + " steps");
}

/// The transient-split total cost bound and the pieces it is made of.
struct TransientBound {
  KInfFn alpha_bar;
  double R_sigma = 1.0;
  KLDecomposition decomposition;
  KLFn beta;
  KInfFn alpha_x;
  KInfFn alpha_u;
  KInfFn eta;
  KInfFn gamma;
  std::optional<KInfFn> alpha_tilde2_fn;
  /// r-grid and the nondecreasing step counts N(r) on it.
  std::vector<double> r_grid;
  std::vector<std::size_t> steps;

  std::size_t steps_at(double r) const { return transient_steps(beta, R_sigma, r); }

  /// N(r)·(α_x(β(r,0)) + (α_u∘η⁻¹∘γ)(r))
  double alpha_tilde1(double r) const {
    const double n = static_cast<double>(steps_at(r));
    if (n == 0.0) return 0.0;
    return n * (alpha_x(beta(r, 0.0)) + alpha_u(eta.inverse(gamma(r))));
  }

  double alpha_tilde2(double r) const {
    return alpha_tilde2_fn ? (*alpha_tilde2_fn)(r) : 0.0;
  }
};

/// K∞ bound ᾱ ≥ α̃₁ + α̃₂ for a stage cost bounded per `spec` (transient
/// data required). α̃₁ is tabulated on the validation r-grid with the
/// running maximum of N(r); each knot carries the value of the next knot so
/// the table dominates between knots. Certified for r up to the last grid
/// point.
inline TransientBound transient_split_bound(const InteractionSpec& spec,
                                            const UBgECCert& cert,
                                            double theta = 0.5,
                                            const ValidationGrid& grid = {}) {
  if (!spec.transient) {
    throw Error(ErrorKind::parameter, "transient split needs transient data");
  }
  if (!(spec.transient->R_sigma > 0.0)) {
    throw Error(ErrorKind::parameter, "R_sigma must be positive");
  }
  const auto eta = cert.eta.as_kinf();
  if (!eta) {
    throw Error(ErrorKind::precondition, "transient split needs a K-infinity eta");
  }
  TransientBound tb{KInfFn::identity(),
                    spec.transient->R_sigma,
                    kl_decompose(cert.beta, theta, grid),
                    cert.beta,
                    spec.transient->alpha_x,
                    spec.transient->alpha_u,
                    *eta,
                    cert.gamma,
                    std::nullopt,
                    {},
                    {}};
  tb.alpha_tilde2_fn = interaction_bound(spec.C1, spec.C2, spec.C3, spec.alpha,
                                         tb.decomposition.gamma1, *eta,
                                         cert.gamma, theta);
  tb.r_grid = grid.r;
  std::sort(tb.r_grid.begin(), tb.r_grid.end());
  std::size_t run = 0;
  for (double r : tb.r_grid) {
    run = std::max(run, transient_steps(cert.beta, tb.R_sigma, r));
    tb.steps.push_back(run);
  }
  if (!tb.steps.empty() && tb.steps.front() > 0) {
    throw Error(ErrorKind::parameter,
                "grid must start below the transient threshold");
  }
  auto tilde1_at = [&](std::size_t i) {
    const double r = tb.r_grid[i];
    const double n = static_cast<double>(tb.steps[i]);
    if (n == 0.0) return 0.0;
    return n * (tb.alpha_x(cert.beta(r, 0.0)) +
                tb.alpha_u(eta->inverse(cert.gamma(r))));
  };
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < tb.r_grid.size(); ++i) {
    const std::size_t next = std::min(i + 1, tb.r_grid.size() - 1);
    pts.emplace_back(tb.r_grid[i], tilde1_at(next));
  }
  const KInfFn tilde1_env = upper_envelope(std::move(pts), 1e-9);
  tb.alpha_bar = tb.alpha_tilde2_fn ? tilde1_env + *tb.alpha_tilde2_fn : tilde1_env;
  return tb;
}

/// Pairs a stage cost bounded per a transient spec with its split bound.
inline SynthesisResult transient_result(const StageCost& ell,
                                        const TransientBound& tb,
                                        const InteractionSpec& spec) {
  Provenance p;
  p.gamma1 = tb.decomposition.gamma1;
  p.gamma2 = tb.decomposition.gamma2;
  p.theta = tb.decomposition.theta;
  p.Cq = 0.0;
  p.Cr = 0.0;
  p.C1 = spec.C1;
  p.C2 = spec.C2;
  p.C3 = spec.C3;
  p.alpha = spec.alpha;
  p.R_sigma = tb.R_sigma;
  return SynthesisResult{ell, tb.alpha_bar, p};
}

/// Per-sample split of a trajectory's cost at R_σ.
struct TransientPartitionRow {
  std::size_t sample = 0;
  double sigma0 = 0.0;
  std::size_t large_steps = 0;  // |I₁|
  std::size_t step_bound = 0;   // N(σ(x))
  double large_cost = 0.0;      // Σ_{n∈I₁} ℓ(n)
  double small_cost = 0.0;      // Σ_{n∈I₂} ℓ(n)
  double tilde1 = 0.0;
  double tilde2 = 0.0;
};

struct TransientPartitionReport {
  std::vector<TransientPartitionRow> rows;
  bool passed = true;
};

/// Replays each sample for `horizon` steps with the certificate's controls
/// and checks Σ_{I₁} ℓ ≤ α̃₁(σ(x)), Σ_{I₂} ℓ ≤ α̃₂(σ(x)) and |I₁| ≤ N(σ(x)).
inline TransientPartitionReport check_transient_partition(
    const TransientBound& tb, const Interaction& ell, const UBgECCert& cert,
    const ControlSystem& sys, std::span<const State> samples,
    std::size_t horizon, double slack = kDefaultSlack) {
  TransientPartitionReport rep;
  rep.rows.resize(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    const auto u = detail::policy_controls(cert.policy, samples[i], horizon);
    const Trajectory tr = rollout(sys, samples[i], u, horizon);
    TransientPartitionRow row;
    row.sample = i;
    row.sigma0 = sys.sigma(samples[i]);
    for (std::size_t n = 0; n < tr.inputs.size(); ++n) {
      const double c = ell(tr.states[n], tr.inputs[n]);
      if (sys.sigma(tr.states[n]) >= tb.R_sigma) {
        ++row.large_steps;
        row.large_cost += c;
      } else {
        row.small_cost += c;
      }
    }
    row.step_bound = tb.steps_at(row.sigma0);
    row.tilde1 = tb.alpha_tilde1(row.sigma0);
    row.tilde2 = tb.alpha_tilde2(row.sigma0);
    rep.rows[i] = row;
  });
  for (const auto& row : rep.rows) {
    if (row.large_cost > row.tilde1 + slack || row.small_cost > row.tilde2 + slack ||
        row.large_steps > row.step_bound) {
      rep.passed = false;
    }
  }
  return rep;
}

}  // namespace stagecraft
