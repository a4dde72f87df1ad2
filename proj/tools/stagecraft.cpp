// Batch front end: stagecraft {synthesize|verify|converse|oracle}
//   --config PATH [--out DIR] [--seed U64]
//
// Exit codes: 0 pass, 1 verification failure or rejected choice,
// 2 precondition or config error, 3 internal or numeric error.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>

#include "stagecraft/stagecraft.hpp"

using namespace stagecraft;

namespace {

struct Run {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
};

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::choice_rejected:
    case ErrorKind::interaction_rejected: return 1;
    case ErrorKind::precondition:
    case ErrorKind::config:
    case ErrorKind::parameter:
    case ErrorKind::certificate_malformed:
    case ErrorKind::domain: return 2;
    default: return 3;
  }
}

std::string path_in(const Run& run, const std::string& file) {
  return (std::filesystem::path(run.out) / file).string();
}

void write_report(const Run& run, const VerificationReport& rep) {
  std::ostringstream os;
  write_csv(os, rep);
  write_file(path_in(run, "report.csv"), os.str());
}

void write_summary(const Run& run, const std::string& command, const ExperimentConfig& cfg,
                   const VerificationReport& rep, json extra = json::object()) {
  json j{{"command", command}, {"name", cfg.name}, {"seed", cfg.seed}, {"report", to_json(rep)}};
  for (auto& [k, v] : extra.items()) j[k] = v;
  write_file(path_in(run, "summary.json"), j.dump(2) + "\n");
}

int finish(const std::string& command, const VerificationReport& rep) {
  if (rep.vacuous) std::cerr << command << ": warning: no samples, pass is vacuous\n";
  std::cout << command << ": " << (rep.passed ? "PASS" : "FAIL")
            << " (worst margin " << csv_number(rep.worst_margin()) << ")\n";
  return rep.passed ? 0 : 1;
}

std::vector<State> in_domain(const Domain& d, std::vector<State> xs) {
  std::erase_if(xs, [&](const State& x) { return d && !d(x); });
  return xs;
}

struct Synthesized {
  UBgECCert cert;
  SynthesisResult result;
};

Synthesized synthesize_from(const ExperimentConfig& cfg, std::span<const State> samples) {
  const auto opt = synthesis_options(cfg);
  Synthesized s{as_ubgec(experiment_certificate(cfg), opt.theta, opt.grid), {}};
  s.result = synthesize(s.cert, opt);
  if (auto spec = interaction_spec(cfg, s.cert, s.result.provenance, samples)) {
    s.result = admit_interaction(*spec, s.result, s.cert, cfg.sys);
  }
  const double k = alpha_bar_scale(cfg);
  if (k != 1.0) s.result.alpha_bar = scale(k, s.result.alpha_bar);
  return s;
}

int cmd_synthesize(const Run& run) {
  const auto cfg = load_experiment(read_json_file(run.config), run.seed);
  const auto samples = experiment_samples(cfg);
  const auto s = synthesize_from(cfg, samples);
  const auto rep = certify_ucc(s.result, s.cert, cfg.sys, samples, cfg.horizon, cfg.slack);
  write_file(path_in(run, "synthesis.json"), to_json(s.result).dump(2) + "\n");
  write_report(run, rep);
  write_summary(run, "synthesize", cfg, rep);
  return finish("synthesize", rep);
}

int cmd_verify(const Run& run) {
  const auto cfg = load_experiment(read_json_file(run.config), run.seed);
  const auto cert = experiment_certificate(cfg);
  auto samples = experiment_samples(cfg);
  if (const auto* u = std::get_if<UCCCert>(&cert)) samples = in_domain(u->domain, samples);
  const auto rep = verify(cert, cfg.sys, samples, cfg.horizon, cfg.slack);
  write_report(run, rep);
  write_summary(run, "verify", cfg, rep, {{"certificate", certificate_type(cfg)}});
  return finish("verify", rep);
}

int cmd_converse(const Run& run) {
  const auto cfg = load_experiment(read_json_file(run.config), run.seed);
  auto samples = experiment_samples(cfg);
  const std::string type = certificate_type(cfg);
  UCCCert ucc;
  if (type == "ucc" || type == "oracle") {
    ucc = std::get<UCCCert>(experiment_certificate(cfg));
  } else {
    const auto s = synthesize_from(cfg, samples);
    ucc.ell = s.result.ell;
    ucc.alpha_bar = s.result.alpha_bar;
    ucc.domain = s.cert.domain;
    ucc.policy = s.cert.policy;
    ucc.invariant = detail::get_or(detail::section(cfg.raw, "certificate"), "invariant", true);
  }
  samples = in_domain(ucc.domain, samples);
  const auto res = converse_pipeline(ucc, cfg.sys, samples, converse_config(cfg));
  write_file(path_in(run, "converse.json"), to_json(res).dump(2) + "\n");
  std::ostringstream beta, sched;
  write_beta_csv(beta, res);
  write_schedule_csv(sched, res.intermediates.schedules);
  write_file(path_in(run, "beta.csv"), beta.str());
  write_file(path_in(run, "schedule.csv"), sched.str());
  write_report(run, res.report);
  write_summary(run, "converse", cfg, res.report, {{"ucc_report", to_json(res.ucc_report)}});
  return finish("converse", res.report);
}

int cmd_oracle(const Run& run) {
  const auto cfg = load_experiment(read_json_file(run.config), run.seed);
  const auto o = run_oracle(cfg);
  const auto samples = finite_states(o.vt);
  const auto rep = verify(o.ucc, cfg.sys, samples, cfg.horizon, cfg.slack);
  std::ostringstream vt;
  write_csv(vt, *cfg.finite, o.vt);
  write_file(path_in(run, "value_table.csv"), vt.str());
  write_file(path_in(run, "ucc.json"),
             json{{"q", to_json(o.ell.q)},
                  {"r", to_json(o.ell.r)},
                  {"alpha_bar", to_json(o.ucc.alpha_bar)},
                  {"invariant", o.ucc.invariant}}
                     .dump(2) + "\n");
  write_report(run, rep);
  write_summary(run, "oracle", cfg, rep,
                {{"iterations", o.vt.iterations}, {"residual", o.vt.residual},
                 {"finite_states", samples.size()}});
  return finish("oracle", rep);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stage-cost and controllability certificate pipelines"};
  app.require_subcommand(1);
  Run run;
  std::uint64_t seed = 0;
  const std::vector<std::pair<std::string, int (*)(const Run&)>> commands{
      {"synthesize", cmd_synthesize},
      {"verify", cmd_verify},
      {"converse", cmd_converse},
      {"oracle", cmd_oracle}};
  std::vector<CLI::App*> subs;
  for (const auto& [name, fn] : commands) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", run.config, "experiment JSON")->required();
    sub->add_option("--out", run.out, "output directory");
    sub->add_option("--seed", seed, "sample RNG seed");
    subs.push_back(sub);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  for (std::size_t i = 0; i < subs.size(); ++i) {
    if (!subs[i]->parsed()) continue;
    if (subs[i]->count("--seed") > 0) run.seed = seed;
    try {
      std::filesystem::create_directories(run.out);
      return commands[i].second(run);
    } catch (const Error& e) {
      std::cerr << commands[i].first << ": " << e.what() << "\n";
      return exit_code(e.kind());
    } catch (const std::exception& e) {
      std::cerr << commands[i].first << ": internal error: " << e.what() << "\n";
      return 3;
    }
  }
  return 2;
}
