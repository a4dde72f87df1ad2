#pragma once

/// \file
/// From a UCC certificate with controlled invariance to a UACwUBgEC
/// certificate.
///
/// With γ_σ = q⁻¹∘ᾱ every UCC control keeps σ(φ(n)) ≤ γ_σ(σ(x)). Restarting
/// the UCC control once σ has dropped below γ_σ⁻¹(ε̃) gives controls that
/// reach any ε-ball within N(R,ε) steps at cost α̃ = ᾱ + ᾱ∘γ_σ. Chaining
/// such restarts along a shrinking ε̃-schedule gives u_x with
/// J_∞ ≤ α̂(σ(x)), α̂ = α̃ + ᾱ, and a step function N_R(ε) after which
/// σ stays below ε. ν_R smooths N_R and β is assembled from ν_R⁻¹.
///
/// Numerically the schedule has finite depth and the stitched controls
/// are materialized only up to a horizon; the β table resolves every cell
/// the schedule covers and extrapolates the rest geometrically.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "stagecraft/certificates.hpp"
#include "stagecraft/cmpfn.hpp"
#include "stagecraft/kl.hpp"
#include "stagecraft/parallel.hpp"
#include "stagecraft/system.hpp"

namespace stagecraft {

enum class EpsSchedule { harmonic, geometric };

struct ConverseConfig {
  /// ε̃ = factor·ε in the restart step.
  double eps_tilde_factor = 0.5;
  /// Schedule depth M_max.
  std::size_t depth = 16;
  /// ε_m = s·(1/m) or s·2^{1−m}, with s = min{1, γ̂(R)}.
  EpsSchedule schedule = EpsSchedule::harmonic;
  /// Length of the materialized stitched controls and of verification.
  std::size_t horizon = 256;
  /// Extra R values for β; positive sample σ values are always added.
  std::vector<double> R_grid = log_grid(1e-3, 1e3, 25);
  /// Geometric t-columns beyond the horizon.
  std::size_t tail_columns = 24;
  std::uint64_t step_cap = 1000000000ULL;
  double slack = kDefaultSlack;
};

namespace detail {

inline void require_converse_input(const UCCCert& ucc) {
  if (!ucc.invariant) {
    throw Error(ErrorKind::precondition,
                "converse needs a UCC certificate with the invariance flag");
  }
  if (!ucc.policy) {
    throw Error(ErrorKind::certificate_malformed, "UCC certificate has no policy");
  }
}

inline void require_factor(double f) {
  if (!(f > 0.0 && f < 1.0)) {
    throw Error(ErrorKind::parameter, "eps_tilde_factor must lie in (0,1)");
  }
}

/// Smallest integer ≥ v, forgiving relative rounding noise of 1e-12.
inline double ceil_tolerant(double v) {
  const double c = std::ceil(v);
  if (c - 1.0 >= v - 1e-12 * std::max(1.0, std::abs(v))) return c - 1.0;
  return c;
}

}  // namespace detail

/// γ_σ = q⁻¹∘ᾱ
inline KInfFn gamma_sigma(const UCCCert& ucc) {
  return compose(ucc.ell.q.inverse_fn(), ucc.alpha_bar);
}

/// α̃ = ᾱ + ᾱ∘γ_σ
inline KInfFn alpha_tilde(const UCCCert& ucc) {
  return ucc.alpha_bar + compose(ucc.alpha_bar, gamma_sigma(ucc));
}

/// α̂ = α̃ + ᾱ
inline KInfFn alpha_hat(const UCCCert& ucc) {
  return alpha_tilde(ucc) + ucc.alpha_bar;
}

/// γ̂ = q⁻¹∘α̂ bounds σ along the stitched controls.
inline KInfFn gamma_hat(const UCCCert& ucc) {
  return compose(ucc.ell.q.inverse_fn(), alpha_hat(ucc));
}

/// Smallest positive integer N ≥ ᾱ(R)/q(γ_σ⁻¹(ε̃)) − 1.
inline std::uint64_t step2_N_tilde(const UCCCert& ucc, double R,
                                   double eps_tilde,
                                   std::uint64_t cap = 1000000000ULL) {
  if (!(R > 0.0) || !(eps_tilde > 0.0)) {
    throw Error(ErrorKind::parameter, "step 2 needs R > 0 and eps > 0");
  }
  const double denom = ucc.ell.q(gamma_sigma(ucc).inverse(eps_tilde));
  const double v = ucc.alpha_bar(R) / denom - 1.0;
  if (!(denom > 0.0) || !(v <= static_cast<double>(cap))) {
    throw Error(ErrorKind::budget,
                "step count for eps_tilde = " + std::to_string(eps_tilde) +
                    " exceeds the cap of " + std::to_string(cap));
  }
  const double n = std::max(1.0, detail::ceil_tolerant(v));
  return static_cast<std::uint64_t>(n);
}

/// N(R,ε) with ε̃ = factor·ε.
inline std::uint64_t step2_N(const UCCCert& ucc, double R, double eps,
                             double factor = 0.5,
                             std::uint64_t cap = 1000000000ULL) {
  detail::require_factor(factor);
  return step2_N_tilde(ucc, R, factor * eps, cap);
}

namespace detail {

struct Step2Block {
  std::vector<Input> controls;
  std::optional<std::size_t> n_q;
};

/// The first `count` entries of the restarted control u(y, ε) for the
/// bound R ≥ σ(y).
inline Step2Block step2_controls(const UCCCert& ucc, const ControlSystem& sys,
                                 const State& y, double R, double eps,
                                 std::size_t count, double factor,
                                 std::uint64_t cap) {
  const std::uint64_t N = step2_N(ucc, R, eps, factor, cap);
  const double threshold = gamma_sigma(ucc).inverse(factor * eps);
  const ControlSequence u1 = ucc.policy(y);
  Step2Block out;
  State x = y;
  const std::uint64_t scan = std::min<std::uint64_t>(N, count);
  for (std::size_t n = 0; n <= scan && n < count; ++n) {
    if (sys.sigma(x) <= threshold) {
      out.n_q = n;
      break;
    }
    if (!u1.covers(n)) {
      throw Error(ErrorKind::certificate_malformed,
                  "UCC policy ends at step " + std::to_string(n));
    }
    out.controls.push_back(u1.at(n));
    x = sys.transition(x, u1.at(n));
  }
  if (out.n_q) {
    const ControlSequence u2 = ucc.policy(x);
    for (std::size_t k = 0; out.controls.size() < count; ++k) {
      if (!u2.covers(k)) {
        throw Error(ErrorKind::certificate_malformed,
                    "UCC policy ends at step " + std::to_string(k));
      }
      out.controls.push_back(u2.at(k));
    }
  } else if (count > N) {
    throw Error(ErrorKind::construction,
                "sigma stayed above gamma_sigma^-1(eps_tilde) for " +
                    std::to_string(N) +
                    " steps; the UCC certificate is not valid");
  }
  out.controls.resize(count);
  return out;
}

}  // namespace detail

struct Step2Result {
  ControlSequence controls;
  std::optional<std::size_t> n_q;
  std::uint64_t N = 0;
  /// J over the horizon and the bound α̃(σ(x)).
  double cost = 0.0;
  double cost_bound = 0.0;
  bool cost_ok = false;
  /// σ(φ(n)) < ε for N ≤ n ≤ horizon.
  bool tail_ok = false;
};

/// Restarted control u(x, ε) with R = σ(x), materialized for `horizon`
/// steps and checked against α̃ and the ε-ball.
inline Step2Result step2_stitch(const UCCCert& ucc, const ControlSystem& sys,
                                const State& x, double eps,
                                std::size_t horizon, double factor = 0.5,
                                std::uint64_t cap = 1000000000ULL) {
  detail::require_converse_input(ucc);
  const double R = sys.sigma(x);
  Step2Result out;
  if (R == 0.0) {
    out.controls = ucc.policy(x);
    out.n_q = 0;
  } else {
    out.N = step2_N(ucc, R, eps, factor, cap);
    auto block = detail::step2_controls(ucc, sys, x, R, eps, horizon, factor, cap);
    out.controls = ControlSequence(std::move(block.controls), TailRule::none);
    out.n_q = block.n_q;
  }
  const Trajectory tr = rollout(sys, x, out.controls, horizon);
  for (std::size_t n = 0; n < tr.inputs.size(); ++n) {
    out.cost += ucc.ell(sys, tr.states[n], tr.inputs[n]);
  }
  out.cost_bound = alpha_tilde(ucc)(R);
  out.cost_ok = out.cost <= out.cost_bound + kDefaultSlack;
  out.tail_ok = true;
  for (std::size_t n = out.N; n < tr.states.size(); ++n) {
    if (!(sys.sigma(tr.states[n]) < eps)) out.tail_ok = false;
  }
  return out;
}

/// ε_m, ε̃_m, N(R,ε̃_m) and M_m for m = 1..depth (index m−1).
struct Schedule {
  double R = 0.0;
  std::vector<double> eps;
  std::vector<double> eps_tilde;
  std::vector<std::uint64_t> N;
  std::vector<std::uint64_t> M;
};

inline double schedule_eps(EpsSchedule kind, double s, std::size_t m) {
  const double md = static_cast<double>(m);
  return kind == EpsSchedule::harmonic ? s / md : s * std::pow(2.0, 1.0 - md);
}

/// ε̃_m = min{α̃⁻¹(q(ε_m)), α̃⁻¹(2^{−m}ᾱ(R)), R} and M_n = Σ_{m≤n} N(R,ε̃_m).
inline Schedule step3_schedule(const UCCCert& ucc, double R,
                               const ConverseConfig& cfg = {}) {
  if (!(R > 0.0)) throw Error(ErrorKind::parameter, "schedule needs R > 0");
  if (cfg.depth == 0) throw Error(ErrorKind::parameter, "schedule depth is 0");
  detail::require_factor(cfg.eps_tilde_factor);
  const KInfFn at = alpha_tilde(ucc);
  const double s = std::min(1.0, gamma_hat(ucc)(R));
  const double abar = ucc.alpha_bar(R);
  Schedule sch;
  sch.R = R;
  std::uint64_t total = 0;
  for (std::size_t m = 1; m <= cfg.depth; ++m) {
    const double e = schedule_eps(cfg.schedule, s, m);
    const double et = std::min({at.inverse(ucc.ell.q(e)),
                                at.inverse(std::ldexp(abar, -static_cast<int>(m))),
                                R});
    std::uint64_t n;
    try {
      n = step2_N(ucc, R, et, cfg.eps_tilde_factor, cfg.step_cap);
    } catch (const Error& err) {
      throw Error(err.kind(), "m = " + std::to_string(m) + ": " + err.what());
    }
    total += n;
    sch.eps.push_back(e);
    sch.eps_tilde.push_back(et);
    sch.N.push_back(n);
    sch.M.push_back(total);
  }
  return sch;
}

/// The chained restarts u = (u₀ u₁ ⋯) for R = σ(x), first `horizon`
/// entries. Blocks past the schedule depth reuse its last ε̃.
inline std::vector<Input> step3_controls(const UCCCert& ucc,
                                         const ControlSystem& sys,
                                         const State& x,
                                         const ConverseConfig& cfg = {}) {
  const double R = sys.sigma(x);
  std::vector<Input> out;
  out.reserve(cfg.horizon);
  if (R == 0.0) {
    const ControlSequence u = ucc.policy(x);
    for (std::size_t n = 0; n < cfg.horizon; ++n) {
      if (!u.covers(n)) {
        throw Error(ErrorKind::certificate_malformed,
                    "UCC policy ends at step " + std::to_string(n));
      }
      out.push_back(u.at(n));
    }
    return out;
  }
  const Schedule sch = step3_schedule(ucc, R, cfg);
  State y = x;
  for (std::size_t m = 0; out.size() < cfg.horizon; ++m) {
    const std::size_t k = std::min(m, sch.eps_tilde.size() - 1);
    const std::size_t want = static_cast<std::size_t>(
        std::min<std::uint64_t>(sch.N[k], cfg.horizon - out.size()));
    auto block = detail::step2_controls(ucc, sys, y, R, sch.eps_tilde[k], want,
                                        cfg.eps_tilde_factor, cfg.step_cap);
    for (const auto& u : block.controls) {
      y = sys.transition(y, u);
      out.push_back(u);
    }
  }
  return out;
}

/// Policy oracle returning the chained restarts with no tail.
inline PolicyOracle stitched_policy(const UCCCert& ucc, const ControlSystem& sys,
                                    const ConverseConfig& cfg = {}) {
  return [ucc, sys, cfg](const State& x) {
    return ControlSequence(step3_controls(ucc, sys, x, cfg), TailRule::none);
  };
}

struct Step3Check {
  bool passed = true;
  /// Largest σ(φ(n)) − ε_m over n ≥ M_m within the horizon.
  double worst_ball = -std::numeric_limits<double>::infinity();
  /// Largest J_horizon − α̂(σ(x)).
  double worst_cost = -std::numeric_limits<double>::infinity();
};

/// Replays the chained restarts from each sample and checks
/// σ(φ(n)) < ε_m for n ≥ M_m and J ≤ α̂(σ(x)).
inline Step3Check check_step3(const UCCCert& ucc, const ControlSystem& sys,
                              std::span<const State> samples,
                              const ConverseConfig& cfg = {}) {
  const KInfFn ah = alpha_hat(ucc);
  std::vector<double> ball(samples.size(), -std::numeric_limits<double>::infinity());
  std::vector<double> cost(samples.size(), -std::numeric_limits<double>::infinity());
  parallel_for(samples.size(), [&](std::size_t i) {
    const State& x = samples[i];
    const double R = sys.sigma(x);
    const auto u = step3_controls(ucc, sys, x, cfg);
    const Trajectory tr = rollout(sys, x, std::span<const Input>(u), cfg.horizon);
    double J = 0.0;
    for (std::size_t n = 0; n < tr.inputs.size(); ++n) {
      J += ucc.ell(sys, tr.states[n], tr.inputs[n]);
    }
    cost[i] = J - ah(R);
    if (R == 0.0) return;
    const Schedule sch = step3_schedule(ucc, R, cfg);
    for (std::size_t m = 0; m < sch.M.size(); ++m) {
      for (std::uint64_t n = sch.M[m]; n < tr.states.size(); ++n) {
        ball[i] = std::max(ball[i], sys.sigma(tr.states[n]) - sch.eps[m]);
      }
    }
  });
  Step3Check out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out.worst_ball = std::max(out.worst_ball, ball[i]);
    out.worst_cost = std::max(out.worst_cost, cost[i]);
    if (ball[i] >= 0.0 || cost[i] > cfg.slack) out.passed = false;
  }
  return out;
}

/// ν_R(ε) = (2/ε)∫_{ε/2}^{ε} N_R(s)ds + R/ε for the step function
/// N_R(ε) = M_{m*}, m* the smallest m with ε_m < ε, and N_R = 0 above γ̂(R).
/// N_R is only known above ε_{depth}, so ν_R is exact for ε > 2ε_{depth}.
class NuFunction {
 public:
  NuFunction(const Schedule& sch, double gamma_hat_R)
      : R_(sch.R), top_(gamma_hat_R), eps_(sch.eps), M_(sch.M) {}

  double R() const { return R_; }
  double top() const { return top_; }
  double resolvable_below() const { return 2.0 * std::min(top_, eps_.back()); }
  bool resolvable(double e) const { return e > resolvable_below(); }

  /// N_R(e), or nullopt below the schedule.
  std::optional<std::uint64_t> N(double e) const {
    if (e > top_) return 0;
    for (std::size_t m = 0; m < eps_.size(); ++m) {
      if (eps_[m] < e) return M_[m];
    }
    return std::nullopt;
  }

  double operator()(double e) const {
    if (!(e > 0.0)) throw Error(ErrorKind::domain, "nu needs eps > 0");
    if (!resolvable(e)) {
      throw Error(ErrorKind::domain, "nu unresolved at eps = " + std::to_string(e));
    }
    const double a = 0.5 * e;
    const double b = e;
    double integral = 0.0;
    // Piece m covers (ε_m, ε_{m−1}] with ε_0 = γ̂(R) and value M_m.
    double upper = top_;
    for (std::size_t m = 0; m < eps_.size(); ++m) {
      const double lower = std::min(eps_[m], upper);
      const double lo = std::max(a, lower);
      const double hi = std::min(b, upper);
      if (hi > lo) integral += (hi - lo) * static_cast<double>(M_[m]);
      upper = lower;
    }
    return (2.0 / e) * integral + R_ / e;
  }

  /// Largest-safe ε with ν_R(ε) ≤ t, i.e. the upper end of a bisection
  /// bracket shrunk to adjacent doubles; nullopt if it lies below the
  /// resolved range.
  std::optional<double> inverse(double t) const {
    if (!(t > 0.0)) throw Error(ErrorKind::domain, "nu inverse needs t > 0");
    double lo = resolvable_below();
    lo = std::nextafter(lo, std::numeric_limits<double>::infinity());
    if ((*this)(lo) <= t) return std::nullopt;
    double hi = std::max(2.0 * top_, lo);
    while ((*this)(hi) > t) hi *= 2.0;
    for (int i = 0; i < 2000; ++i) {
      const double mid = lo + 0.5 * (hi - lo);
      if (!(mid > lo && mid < hi)) break;
      if ((*this)(mid) > t) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    return hi;
  }

 private:
  double R_;
  double top_;
  std::vector<double> eps_;
  std::vector<std::uint64_t> M_;
};

inline NuFunction make_nu(const UCCCert& ucc, double R,
                          const ConverseConfig& cfg = {}) {
  return NuFunction(step3_schedule(ucc, R, cfg), gamma_hat(ucc)(R));
}

/// Dense 0..horizon, then horizon·2^k for k = 1..tail_columns.
inline std::vector<double> converse_t_grid(const ConverseConfig& cfg) {
  std::vector<double> t = integer_grid(static_cast<int>(cfg.horizon));
  double last = static_cast<double>(std::max<std::size_t>(cfg.horizon, 1));
  for (std::size_t k = 0; k < cfg.tail_columns; ++k) {
    last *= 2.0;
    t.push_back(last);
  }
  return t;
}

struct Step5Result {
  KLFn beta;
  std::vector<double> R_grid;
  std::vector<double> t_grid;
  /// min{γ̂(R), ν_R⁻¹(t)} per cell before the strictness factors and
  /// repairs; NaN where the cell was extrapolated.
  std::vector<std::vector<double>> nu_inverse;
  std::vector<Schedule> schedules;
};

/// β(r,0) = γ̂(r)(1+10⁻³), β(r,t) = min{γ̂(r), ν_r⁻¹(t)}(1 + 10⁻³/(1+t)),
/// unresolved cells extrapolated geometrically per column (ratio at least
/// 0.5), then repaired to strict decrease in t and strict increase in r
/// (both by raising).
inline Step5Result step5_beta(const UCCCert& ucc, std::vector<double> R_grid,
                              const ConverseConfig& cfg = {}) {
  std::sort(R_grid.begin(), R_grid.end());
  R_grid.erase(std::unique(R_grid.begin(), R_grid.end()), R_grid.end());
  R_grid.erase(std::remove_if(R_grid.begin(), R_grid.end(),
                              [](double r) { return !(r > 0.0) || !std::isfinite(r); }),
               R_grid.end());
  if (R_grid.empty()) throw Error(ErrorKind::parameter, "empty R grid");
  const KInfFn gh = gamma_hat(ucc);
  Step5Result out;
  out.R_grid = R_grid;
  out.t_grid = converse_t_grid(cfg);
  const std::size_t nR = R_grid.size();
  const std::size_t nT = out.t_grid.size();
  out.nu_inverse.assign(nR, std::vector<double>(nT, 0.0));
  out.schedules.resize(nR);
  std::vector<std::vector<double>> v(nR, std::vector<double>(nT, 0.0));
  const double nan = std::numeric_limits<double>::quiet_NaN();

  parallel_for(nR, [&](std::size_t i) {
    const double R = R_grid[i];
    out.schedules[i] = step3_schedule(ucc, R, cfg);
    const NuFunction nu(out.schedules[i], gh(R));
    const double top = gh(R);
    auto& row = v[i];
    auto& raw = out.nu_inverse[i];
    raw[0] = top;
    row[0] = top * (1.0 + 1e-3);
    bool resolved = true;
    for (std::size_t j = 1; j < nT; ++j) {
      const double t = out.t_grid[j];
      std::optional<double> e;
      if (resolved) e = nu.inverse(t);
      if (!e) {
        resolved = false;
        raw[j] = nan;
        row[j] = nan;
        continue;
      }
      raw[j] = std::min(top, *e);
      row[j] = raw[j] * (1.0 + 1e-3 / (1.0 + t));
    }
    for (std::size_t j = 1; j < nT; ++j) {
      if (!std::isnan(row[j])) continue;
      if (j < 2) {
        throw Error(ErrorKind::construction,
                    "no resolved t-cells for R = " + std::to_string(R));
      }
      // per column, so the doubling tail cannot underflow
      const double ratio = std::clamp(row[j - 1] / row[j - 2], 0.5, 1.0 - 1e-12);
      row[j] = row[j - 1] * ratio;
    }
    for (std::size_t j = nT - 1; j > 0; --j) {
      if (!(row[j - 1] > row[j])) {
        row[j - 1] = std::nextafter(row[j], std::numeric_limits<double>::infinity());
      }
    }
  });

  for (std::size_t i = 1; i < nR; ++i) {
    for (std::size_t j = 0; j < nT; ++j) {
      if (!(v[i][j] > v[i - 1][j])) v[i][j] = v[i - 1][j] * (1.0 + 1e-9);
    }
  }
  for (std::size_t i = 0; i < nR; ++i) {
    for (std::size_t j = 0; j < nT; ++j) {
      const bool pos = v[i][j] > 0.0 && std::isfinite(v[i][j]);
      const bool up = i == 0 || v[i][j] > v[i - 1][j];
      const bool down = j == 0 || v[i][j] < v[i][j - 1];
      if (!pos || !up || !down) {
        throw Error(ErrorKind::construction,
                    "beta grid invalid at R = " + std::to_string(R_grid[i]) +
                        ", t = " + std::to_string(out.t_grid[j]));
      }
    }
  }
  out.beta = KLFn::sampled(R_grid, out.t_grid, std::move(v));
  return out;
}

struct ConverseIntermediates {
  KInfFn gamma_sigma;
  KInfFn alpha_tilde;
  KInfFn alpha_hat;
  KInfFn gamma_hat;
  std::vector<double> R_grid;
  std::vector<double> t_grid;
  std::vector<Schedule> schedules;
  std::vector<std::vector<double>> nu_inverse;
};

struct ConverseResult {
  UBgECCert cert;
  ConverseIntermediates intermediates;
  PolicyOracle stitched_policy;
  VerificationReport ucc_report;
  VerificationReport report;
};

namespace detail {

template <class F>
auto labelled(const char* step, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const SimulationError&) {
    throw;
  } catch (const Error& e) {
    throw Error(e.kind(), std::string(step) + ": " + e.what());
  }
}

}  // namespace detail

/// Steps 1–5 end to end. The UCC certificate is verified on the samples
/// first (precondition); the returned certificate is verified on the same
/// samples with η = r and γ = α̂.
inline ConverseResult converse_pipeline(const UCCCert& ucc,
                                        const ControlSystem& sys,
                                        std::span<const State> samples,
                                        const ConverseConfig& cfg = {}) {
  detail::require_converse_input(ucc);
  detail::require_factor(cfg.eps_tilde_factor);
  ConverseResult res{UBgECCert{KLFn::separable(KInfFn::identity(), 0.5,
                                               KInfFn::identity()),
                               NonnegFn::zero(), KInfFn::identity(), ucc.domain,
                               {}},
                     {gamma_sigma(ucc), alpha_tilde(ucc), alpha_hat(ucc),
                      gamma_hat(ucc), {}, {}, {}, {}},
                     {},
                     {},
                     {}};
  res.ucc_report = detail::labelled("step 1", [&] {
    return verify(ucc, sys, samples, cfg.horizon, cfg.slack);
  });
  if (!res.ucc_report.passed) {
    throw Error(ErrorKind::precondition,
                "UCC certificate fails verification (worst margin " +
                    std::to_string(res.ucc_report.worst_margin()) + ")");
  }
  std::vector<double> R_grid = cfg.R_grid;
  for (const auto& x : samples) R_grid.push_back(sys.sigma(x));
  const Step5Result s5 =
      detail::labelled("step 5", [&] { return step5_beta(ucc, R_grid, cfg); });
  res.intermediates.R_grid = s5.R_grid;
  res.intermediates.t_grid = s5.t_grid;
  res.intermediates.schedules = s5.schedules;
  res.intermediates.nu_inverse = s5.nu_inverse;
  res.stitched_policy = stitched_policy(ucc, sys, cfg);
  res.cert = UBgECCert{s5.beta, ucc.ell.r, res.intermediates.alpha_hat,
                       ucc.domain, res.stitched_policy};
  res.report = detail::labelled("step 4", [&] {
    return verify(res.cert, sys, samples, cfg.horizon, cfg.slack);
  });
  return res;
}

}  // namespace stagecraft
