#pragma once

/// \file
/// Experiment configs: one JSON object naming a system, a certificate and
/// the settings of each pipeline.
///
///   {
///     "name": "...",
///     "system": {"builtin": "scalar_linear", "a": 0.5, "b": 1.0}
///             | {"finite": "chain" | "grid", "n": 10}
///             | {"finite": {"next": [[...]], "sigma": [...], "rho": [...]}}
///             | {"discretize": {"builtin": "...", "lo", "hi", "n", "inputs"}},
///     "certificate": {"type": "builtin" | "uac" | "uvc" | "ubgec" | "ucc" | "oracle", ...},
///     "policy": "builtin" | "oracle" | "zeros",
///     "samples": {"count": 32, "lo": 1e-3, "hi": 1e3, "seed": 0} | {"all_states": true},
///     "horizon": 256, "slack": 1e-9,
///     "synthesis": {"theta", "Cq", "Cr", "q_choice", "r_choice", "alpha_bar_scale"},
///     "interaction": {"form": "sigma_rho" | "additive", ...},
///     "oracle": {"q", "r", "tol", "max_iter", "margin"},
///     "converse": {"eps_tilde_factor", "depth", "schedule", "horizon",
///                  "R_grid": {"lo", "hi", "n"}, "tail_columns"}
///   }

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stagecraft/builtins.hpp"
#include "stagecraft/converse.hpp"
#include "stagecraft/io.hpp"
#include "stagecraft/oracle.hpp"
#include "stagecraft/synthesis.hpp"

namespace stagecraft {

struct ExperimentConfig {
  json raw;
  std::string name;
  ControlSystem sys;
  std::optional<FiniteSystem> finite;
  std::optional<BuiltinCase> builtin;
  std::uint64_t seed = 0;
  std::size_t horizon = 256;
  double slack = kDefaultSlack;
};

namespace detail {

inline json section(const json& j, const char* key) {
  if (!j.contains(key)) return json::object();
  if (!j.at(key).is_object()) {
    throw Error(ErrorKind::config, std::string("'") + key + "' must be an object");
  }
  return j.at(key);
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::config, std::string("field '") + key + "' has the wrong type");
  }
}

inline BuiltinCase builtin_from_json(const json& s) {
  const std::string name = field(s, "builtin").get<std::string>();
  const auto length = get_or<std::size_t>(s, "policy_length", 1024);
  if (name == "scalar_linear") {
    return builtin_scalar_linear(get_or(s, "a", 0.5), get_or(s, "b", 1.0), length);
  }
  if (name == "finite_grid") {
    return builtin_finite_grid(get_or<std::size_t>(s, "n", 32), length);
  }
  return make_builtin(name, length);
}

}  // namespace detail

/// Parses and resolves a config. `seed` overrides the sample seed.
inline ExperimentConfig load_experiment(const json& j,
                                        std::optional<std::uint64_t> seed = {}) {
  if (!j.is_object()) throw Error(ErrorKind::config, "config must be a JSON object");
  ExperimentConfig cfg;
  cfg.raw = j;
  cfg.name = detail::get_or<std::string>(j, "name", "experiment");
  cfg.horizon = detail::get_or<std::size_t>(j, "horizon", 256);
  cfg.slack = detail::get_or(j, "slack", kDefaultSlack);
  if (!(cfg.slack >= 0.0)) throw Error(ErrorKind::config, "slack must be >= 0");
  const json samples = detail::section(j, "samples");
  cfg.seed = seed ? *seed : detail::get_or<std::uint64_t>(samples, "seed", 0);

  const json& s = detail::field(j, "system");
  if (s.contains("builtin")) {
    cfg.builtin = detail::builtin_from_json(s);
    cfg.sys = cfg.builtin->sys;
    if (cfg.builtin->sys.state_encoding.kind == EncodingKind::finite) {
      cfg.finite = finite_grid(detail::get_or<std::size_t>(s, "n", 32));
    }
  } else if (s.contains("finite")) {
    const json& f = s.at("finite");
    if (f.is_string()) {
      const auto n = detail::get_or<std::size_t>(s, "n", 10);
      const std::string kind = f.get<std::string>();
      if (kind == "chain") {
        cfg.finite = finite_chain(n);
      } else if (kind == "grid") {
        cfg.finite = finite_grid(n);
      } else {
        throw Error(ErrorKind::config, "unknown finite system '" + kind + "'");
      }
    } else {
      cfg.finite = finite_from_json(f);
    }
    cfg.sys = cfg.finite->as_control_system();
  } else if (s.contains("discretize")) {
    const json& d = s.at("discretize");
    const auto base = detail::builtin_from_json(d);
    cfg.finite = discretize(base.sys, detail::number(d, "lo"), detail::number(d, "hi"),
                            detail::get_or<std::size_t>(d, "n", 101),
                            detail::numbers(d, "inputs"));
    cfg.sys = cfg.finite->as_control_system();
  } else {
    throw Error(ErrorKind::config, "system needs 'builtin', 'finite' or 'discretize'");
  }
  return cfg;
}

/// Sample states per the "samples" section; finite systems default to all
/// states.
inline std::vector<State> experiment_samples(const ExperimentConfig& cfg) {
  const json s = detail::section(cfg.raw, "samples");
  if (cfg.finite) {
    const auto count = detail::get_or<std::size_t>(s, "count", cfg.finite->states());
    return make_samples(cfg.sys, count);
  }
  return make_samples(cfg.sys, detail::get_or<std::size_t>(s, "count", 32),
                      detail::get_or(s, "lo", 1e-3), detail::get_or(s, "hi", 1e3),
                      cfg.seed);
}

struct OracleRun {
  StageCost ell;
  ValueTable vt;
  UCCCert ucc;
};

/// Value iteration on the finite system with the "oracle" section's cost.
inline OracleRun run_oracle(const ExperimentConfig& cfg) {
  if (!cfg.finite) {
    throw Error(ErrorKind::config, "the oracle needs a finite or discretized system");
  }
  const json o = detail::section(cfg.raw, "oracle");
  OracleRun run;
  run.ell.q = o.contains("q") ? kinf_from_json(o.at("q")) : KInfFn::identity();
  run.ell.r = o.contains("r") ? nonneg_from_json(o.at("r")) : NonnegFn(KInfFn::identity());
  ViOptions vi;
  vi.tol = detail::get_or(o, "tol", vi.tol);
  vi.max_iter = detail::get_or(o, "max_iter", vi.max_iter);
  run.vt = value_iterate(*cfg.finite, run.ell, vi);
  ExtractOptions ex;
  ex.margin = detail::get_or(o, "margin", 1.0);
  ex.policy_length = std::max<std::size_t>(ex.policy_length, cfg.horizon + 1);
  run.ucc = extract_ucc(run.vt, *cfg.finite, run.ell, ex);
  return run;
}

inline PolicyOracle experiment_policy(const ExperimentConfig& cfg) {
  std::string src = detail::get_or<std::string>(cfg.raw, "policy", "");
  if (src.empty()) src = cfg.builtin ? "builtin" : "oracle";
  if (src == "builtin") {
    if (!cfg.builtin) throw Error(ErrorKind::config, "no built-in policy for this system");
    return cfg.builtin->cert.policy;
  }
  if (src == "oracle") return run_oracle(cfg).ucc.policy;
  if (src == "zeros") {
    const Input z = cfg.sys.zero_input();
    return [z](const State&) { return ControlSequence::zeros(z); };
  }
  throw Error(ErrorKind::config, "unknown policy source '" + src + "'");
}

inline std::string certificate_type(const ExperimentConfig& cfg) {
  const json c = detail::section(cfg.raw, "certificate");
  return detail::get_or<std::string>(c, "type", "builtin");
}

/// The configured certificate. "oracle" yields the extracted UCC
/// certificate; "builtin" the system's UVC certificate.
inline Certificate experiment_certificate(const ExperimentConfig& cfg) {
  const json c = detail::section(cfg.raw, "certificate");
  const std::string type = certificate_type(cfg);
  if (type == "builtin") {
    if (!cfg.builtin) throw Error(ErrorKind::config, "system has no built-in certificate");
    return cfg.builtin->cert;
  }
  if (type == "oracle") return run_oracle(cfg).ucc;
  const PolicyOracle policy = experiment_policy(cfg);
  if (type == "uac") return UACCert{kl_from_json(detail::field(c, "beta")), whole_space(), policy};
  if (type == "uvc") {
    return UVCCert{kl_from_json(detail::field(c, "beta_x")),
                   kl_from_json(detail::field(c, "beta_u")), whole_space(), policy};
  }
  if (type == "ubgec") {
    return UBgECCert{kl_from_json(detail::field(c, "beta")),
                     nonneg_from_json(detail::field(c, "eta")),
                     kinf_from_json(detail::field(c, "gamma")), whole_space(), policy};
  }
  if (type == "ucc") {
    UCCCert u;
    u.ell.q = kinf_from_json(detail::field(c, "q"));
    u.ell.r = nonneg_from_json(detail::field(c, "r"));
    u.alpha_bar = kinf_from_json(detail::field(c, "alpha_bar"));
    u.policy = policy;
    u.invariant = detail::get_or(c, "invariant", false);
    return u;
  }
  throw Error(ErrorKind::config, "unknown certificate type '" + type + "'");
}

/// UVC certificates convert through the KL-decomposition with `theta`.
inline UBgECCert as_ubgec(const Certificate& cert, double theta,
                          const ValidationGrid& grid = {}) {
  if (const auto* c = std::get_if<UBgECCert>(&cert)) return *c;
  if (const auto* c = std::get_if<UVCCert>(&cert)) return uvc_to_ubgec(*c, theta, grid);
  throw Error(ErrorKind::config, "synthesis needs a UVC or UBgEC certificate");
}

inline SynthesisOptions synthesis_options(const ExperimentConfig& cfg) {
  const json s = detail::section(cfg.raw, "synthesis");
  SynthesisOptions opt;
  opt.theta = detail::get_or(s, "theta", opt.theta);
  opt.Cq = detail::get_or(s, "Cq", opt.Cq);
  opt.Cr = detail::get_or(s, "Cr", opt.Cr);
  if (s.contains("q_choice")) opt.q_choice = kinf_from_json(s.at("q_choice"));
  if (s.contains("r_choice")) opt.r_choice = nonneg_from_json(s.at("r_choice"));
  return opt;
}

inline double alpha_bar_scale(const ExperimentConfig& cfg) {
  const double k = detail::get_or(detail::section(cfg.raw, "synthesis"), "alpha_bar_scale", 1.0);
  if (!(k > 0.0)) throw Error(ErrorKind::config, "alpha_bar_scale must be positive");
  return k;
}

/// The interaction term and its declared bound, or nullopt when absent.
/// "sigma_rho": s = c·σ·ρ with C3 and α; "additive": s = α₃(α₁(σ)+α₂(ρ))
/// with α₃ from build_alpha3 and C1 = C2 = 1.
inline std::optional<InteractionSpec> interaction_spec(const ExperimentConfig& cfg,
                                                       const UBgECCert& cert,
                                                       const Provenance& prov,
                                                       std::span<const State> samples) {
  const json s = detail::section(cfg.raw, "interaction");
  if (s.empty()) return std::nullopt;
  const std::string form = detail::field(s, "form").get<std::string>();
  const ControlSystem sys = cfg.sys;
  InteractionSpec spec;
  if (form == "sigma_rho") {
    const double c = detail::get_or(s, "c", 1.0);
    spec.s = [sys, c](const State& x, const Input& u) { return c * sys.sigma(x) * sys.rho(u); };
    spec.C3 = detail::number(s, "C3");
    spec.alpha = kinf_from_json(detail::field(s, "alpha"));
  } else if (form == "additive") {
    const auto eta = cert.eta.as_kinf();
    if (!eta) throw Error(ErrorKind::precondition, "additive interaction needs eta in K-infinity");
    const KInfFn a1 = kinf_from_json(detail::field(s, "alpha1"));
    const KInfFn a2 = kinf_from_json(detail::field(s, "alpha2"));
    const KInfFn a3 = build_alpha3(a1, a2, prov.gamma2, *eta);
    spec.s = [sys, a1, a2, a3](const State& x, const Input& u) {
      return a3(a1(sys.sigma(x)) + a2(sys.rho(u)));
    };
    spec.C1 = spec.C2 = 1.0;
  } else {
    throw Error(ErrorKind::config, "unknown interaction form '" + form + "'");
  }
  std::vector<Input> us;
  if (s.contains("inputs")) {
    for (double v : detail::numbers(s, "inputs")) us.push_back(Input{v});
  } else if (cfg.finite) {
    for (std::size_t k = 0; k < cfg.finite->inputs(); ++k) us.push_back(Input{double(k)});
  } else {
    us.push_back(sys.zero_input());
    for (double v : log_grid(1e-3, 1e3, 13)) {
      Input a = sys.zero_input(), b = sys.zero_input();
      for (auto& e : a) e = v;
      for (auto& e : b) e = -v;
      us.push_back(a);
      us.push_back(b);
    }
  }
  spec.check_points = cross_points(samples, us);
  return spec;
}

inline ConverseConfig converse_config(const ExperimentConfig& cfg) {
  const json c = detail::section(cfg.raw, "converse");
  ConverseConfig out;
  out.eps_tilde_factor = detail::get_or(c, "eps_tilde_factor", out.eps_tilde_factor);
  out.depth = detail::get_or(c, "depth", out.depth);
  const std::string sched = detail::get_or<std::string>(c, "schedule", "harmonic");
  if (sched == "harmonic") {
    out.schedule = EpsSchedule::harmonic;
  } else if (sched == "geometric") {
    out.schedule = EpsSchedule::geometric;
  } else {
    throw Error(ErrorKind::config, "unknown schedule '" + sched + "'");
  }
  out.horizon = detail::get_or(c, "horizon", cfg.horizon);
  if (c.contains("R_grid")) {
    const json& g = c.at("R_grid");
    out.R_grid = log_grid(detail::number(g, "lo"), detail::number(g, "hi"),
                          detail::get_or<std::size_t>(g, "n", 25));
  }
  out.tail_columns = detail::get_or(c, "tail_columns", out.tail_columns);
  out.step_cap = detail::get_or(c, "step_cap", out.step_cap);
  out.slack = cfg.slack;
  return out;
}

}  // namespace stagecraft
