#pragma once

/// \file
/// JSON for expression trees, KL functions and results; CSV for reports
/// and tables. CSV numbers carry 17 significant digits.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "stagecraft/certificates.hpp"
#include "stagecraft/cmpfn.hpp"
#include "stagecraft/converse.hpp"
#include "stagecraft/kl.hpp"
#include "stagecraft/oracle.hpp"
#include "stagecraft/synthesis.hpp"

namespace stagecraft {

using json = nlohmann::json;

// ---------------------------------------------------------------- trees

inline const char* op_name(Op op) {
  switch (op) {
    case Op::zero: return "zero";
    case Op::identity: return "identity";
    case Op::power: return "power";
    case Op::linear: return "linear";
    case Op::scale: return "scale";
    case Op::sum: return "sum";
    case Op::product: return "product";
    case Op::min: return "min";
    case Op::compose: return "compose";
    case Op::inverse: return "inverse";
    case Op::table: return "table";
  }
  return "?";
}

inline json node_to_json(const Node& n) {
  json j{{"op", op_name(n.op)}};
  switch (n.op) {
    case Op::zero:
    case Op::identity: break;
    case Op::power: j["p"] = n.param; break;
    case Op::linear: j["c"] = n.param; break;
    case Op::scale:
      j["c"] = n.param;
      j["arg"] = node_to_json(*n.lhs);
      break;
    case Op::sum:
    case Op::product:
    case Op::min:
      j["lhs"] = node_to_json(*n.lhs);
      j["rhs"] = node_to_json(*n.rhs);
      break;
    case Op::compose:
      j["outer"] = node_to_json(*n.lhs);
      j["inner"] = node_to_json(*n.rhs);
      break;
    case Op::inverse: j["arg"] = node_to_json(*n.lhs); break;
    case Op::table:
      j["x"] = n.table->xs();
      j["y"] = n.table->ys();
      j["strict"] = n.table->strict();
      break;
  }
  return j;
}

namespace detail {

inline const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw Error(ErrorKind::config, std::string("missing field '") + key + "'");
  }
  return j.at(key);
}

inline double number(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_number()) {
    throw Error(ErrorKind::config, std::string("field '") + key + "' is not a number");
  }
  return v.get<double>();
}

inline std::vector<double> numbers(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_array()) {
    throw Error(ErrorKind::config, std::string("field '") + key + "' is not an array");
  }
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) {
      throw Error(ErrorKind::config, std::string("field '") + key + "' holds a non-number");
    }
    out.push_back(e.get<double>());
  }
  return out;
}

}  // namespace detail

inline NodePtr node_from_json(const json& j) {
  const std::string op = detail::field(j, "op").get<std::string>();
  auto n = std::make_shared<Node>();
  if (op == "zero") {
    n->op = Op::zero;
  } else if (op == "identity") {
    n->op = Op::identity;
  } else if (op == "power") {
    n->op = Op::power;
    n->param = detail::number(j, "p");
  } else if (op == "linear") {
    n->op = Op::linear;
    n->param = detail::number(j, "c");
  } else if (op == "scale") {
    n->op = Op::scale;
    n->param = detail::number(j, "c");
    n->lhs = node_from_json(detail::field(j, "arg"));
  } else if (op == "sum" || op == "product" || op == "min") {
    n->op = op == "sum" ? Op::sum : op == "product" ? Op::product : Op::min;
    n->lhs = node_from_json(detail::field(j, "lhs"));
    n->rhs = node_from_json(detail::field(j, "rhs"));
  } else if (op == "compose") {
    n->op = Op::compose;
    n->lhs = node_from_json(detail::field(j, "outer"));
    n->rhs = node_from_json(detail::field(j, "inner"));
  } else if (op == "inverse") {
    n->op = Op::inverse;
    n->lhs = node_from_json(detail::field(j, "arg"));
  } else if (op == "table") {
    n->op = Op::table;
    const bool strict = j.value("strict", true);
    n->table = std::make_shared<const MonotoneTable>(detail::numbers(j, "x"),
                                                     detail::numbers(j, "y"), strict);
  } else {
    throw Error(ErrorKind::config, "unknown op '" + op + "'");
  }
  if ((n->op == Op::power || n->op == Op::linear || n->op == Op::scale) &&
      !(n->param > 0.0 && std::isfinite(n->param))) {
    throw Error(ErrorKind::parameter, op + " parameter must be positive");
  }
  return n;
}

inline json to_json(const KInfFn& f) { return node_to_json(*f.node()); }

inline json to_json(const NonnegFn& f) {
  json j = node_to_json(*f.node());
  if (!f.is_kinf()) j["positive_definite"] = f.positive_definite();
  return j;
}

inline KInfFn kinf_from_json(const json& j) {
  return KInfFn::from_node(node_from_json(j));
}

inline NonnegFn nonneg_from_json(const json& j) {
  return NonnegFn::from_node(node_from_json(j), j.value("positive_definite", false));
}

// ------------------------------------------------------------------- KL

inline json to_json(const KLFn& b) {
  if (const auto* s = b.as_separable()) {
    return {{"kind", "separable"},
            {"gamma2", to_json(s->gamma2)},
            {"theta", s->theta},
            {"gamma1", to_json(s->gamma1)}};
  }
  if (const auto* s = b.as_sampled()) {
    return {{"kind", "sampled"}, {"r", s->r()}, {"t", s->t()}, {"values", s->values()}};
  }
  json terms = json::array();
  for (const auto& [w, beta] : b.as_weighted()->terms) {
    terms.push_back({{"w", w}, {"beta", to_json(beta)}});
  }
  return {{"kind", "weighted"}, {"terms", terms}};
}

inline KLFn kl_from_json(const json& j) {
  const std::string kind = detail::field(j, "kind").get<std::string>();
  if (kind == "separable") {
    return KLFn::separable(kinf_from_json(detail::field(j, "gamma2")),
                           detail::number(j, "theta"),
                           kinf_from_json(detail::field(j, "gamma1")));
  }
  if (kind == "sampled") {
    std::vector<std::vector<double>> values;
    for (const auto& row : detail::field(j, "values")) {
      values.push_back(row.get<std::vector<double>>());
    }
    return KLFn::sampled(detail::numbers(j, "r"), detail::numbers(j, "t"),
                         std::move(values));
  }
  if (kind == "weighted") {
    std::vector<std::pair<double, KLFn>> terms;
    for (const auto& t : detail::field(j, "terms")) {
      terms.emplace_back(detail::number(t, "w"), kl_from_json(detail::field(t, "beta")));
    }
    return KLFn::weighted(std::move(terms));
  }
  throw Error(ErrorKind::config, "unknown KL kind '" + kind + "'");
}

// -------------------------------------------------------------- results

inline json to_json(const VerificationReport& rep) {
  const double w = rep.worst_margin();
  return {{"passed", rep.passed},
          {"vacuous", rep.vacuous},
          {"slack", rep.slack},
          {"samples", rep.worst.size()},
          {"rows", rep.rows.size()},
          {"worst_margin", std::isfinite(w) ? json(w) : json(nullptr)}};
}

inline json to_json(const SynthesisResult& res) {
  const auto& p = res.provenance;
  json prov{{"gamma1", to_json(p.gamma1)},
            {"gamma2", to_json(p.gamma2)},
            {"theta", p.theta},
            {"Cq", p.Cq},
            {"Cr", p.Cr},
            {"C1", p.C1},
            {"C2", p.C2},
            {"C3", p.C3}};
  if (p.alpha) prov["alpha"] = to_json(*p.alpha);
  if (p.R_sigma) prov["R_sigma"] = *p.R_sigma;
  return {{"stage_cost",
           {{"q", to_json(res.ell.q)},
            {"r", to_json(res.ell.r)},
            {"interaction", static_cast<bool>(res.ell.s)}}},
          {"alpha_bar", to_json(res.alpha_bar)},
          {"provenance", prov}};
}

inline json to_json(const Schedule& s) {
  return {{"R", s.R}, {"eps", s.eps}, {"eps_tilde", s.eps_tilde}, {"N", s.N}, {"M", s.M}};
}

inline json to_json(const ConverseResult& res) {
  const auto& im = res.intermediates;
  json schedules = json::array();
  for (const auto& s : im.schedules) schedules.push_back(to_json(s));
  json nu = json::array();
  for (const auto& row : im.nu_inverse) {
    json r = json::array();
    for (double v : row) r.push_back(std::isnan(v) ? json(nullptr) : json(v));
    nu.push_back(r);
  }
  return {{"cert",
           {{"beta", to_json(res.cert.beta)},
            {"eta", to_json(res.cert.eta)},
            {"gamma", to_json(res.cert.gamma)}}},
          {"intermediates",
           {{"gamma_sigma", to_json(im.gamma_sigma)},
            {"alpha_tilde", to_json(im.alpha_tilde)},
            {"alpha_hat", to_json(im.alpha_hat)},
            {"gamma_hat", to_json(im.gamma_hat)},
            {"R_grid", im.R_grid},
            {"t_grid", im.t_grid},
            {"schedules", schedules},
            {"nu_inverse", nu}}},
          {"ucc_report", to_json(res.ucc_report)},
          {"report", to_json(res.report)}};
}

inline FiniteSystem finite_from_json(const json& j) {
  FiniteSystem f;
  f.name = j.value("name", std::string("finite"));
  for (const auto& row : detail::field(j, "next")) {
    f.next.push_back(row.get<std::vector<std::size_t>>());
  }
  f.sigma = detail::numbers(j, "sigma");
  f.rho = detail::numbers(j, "rho");
  f.validate();
  return f;
}

inline json to_json(const FiniteSystem& f) {
  return {{"name", f.name}, {"next", f.next}, {"sigma", f.sigma}, {"rho", f.rho}};
}

// ------------------------------------------------------------------ CSV

/// 17 significant digits; "inf", "-inf" and "nan" for non-finite values.
inline std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Quotes a field when it holds a comma, quote or line break.
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& os) : os_(os) {}

  CsvWriter& operator<<(double v) { return cell(csv_number(v)); }
  CsvWriter& operator<<(std::size_t v) { return cell(std::to_string(v)); }
  CsvWriter& operator<<(const std::string& s) { return cell(csv_field(s)); }
  CsvWriter& operator<<(const char* s) { return cell(csv_field(s)); }

  void end_row() {
    os_ << "\r\n";
    first_ = true;
  }

  template <class... T>
  void row(const T&... v) {
    (*this << ... << v);
    end_row();
  }

 private:
  CsvWriter& cell(const std::string& s) {
    if (!first_) os_ << ',';
    os_ << s;
    first_ = false;
    return *this;
  }

  std::ostream& os_;
  bool first_ = true;
};

inline void write_csv(std::ostream& os, const VerificationReport& rep) {
  CsvWriter w(os);
  w.row("sample", "inequality", "n", "lhs", "rhs", "margin");
  for (const auto& r : rep.rows) {
    w.row(r.sample, std::string(to_string(r.inequality)), r.n, r.lhs, r.rhs, r.margin);
  }
}

/// Columns n, sigma, rho, stage_cost, cumulative_cost.
inline void write_csv(std::ostream& os, const ControlSystem& sys, const StageCost& ell,
                      const Trajectory& tr) {
  CsvWriter w(os);
  w.row("n", "sigma", "rho", "stage_cost", "cumulative_cost");
  double J = 0.0;
  for (std::size_t n = 0; n < tr.inputs.size(); ++n) {
    const double c = ell(sys, tr.states[n], tr.inputs[n]);
    J += c;
    w.row(n, sys.sigma(tr.states[n]), sys.rho(tr.inputs[n]), c, J);
  }
}

inline void write_csv(std::ostream& os, const FiniteSystem& fs, const ValueTable& vt) {
  CsvWriter w(os);
  w.row("state", "sigma", "V", "policy");
  for (std::size_t x = 0; x < vt.V.size(); ++x) {
    w.row(x, fs.sigma[x], vt.V[x], vt.policy[x]);
  }
}

/// β on its grid in long form, plus the raw min{γ̂, ν⁻¹} column.
inline void write_beta_csv(std::ostream& os, const ConverseResult& res) {
  CsvWriter w(os);
  w.row("R", "t", "beta", "nu_inverse");
  const auto& im = res.intermediates;
  for (std::size_t i = 0; i < im.R_grid.size(); ++i) {
    for (std::size_t j = 0; j < im.t_grid.size(); ++j) {
      w.row(im.R_grid[i], im.t_grid[j], res.cert.beta(im.R_grid[i], im.t_grid[j]),
            im.nu_inverse[i][j]);
    }
  }
}

/// The ε schedule with N(R,ε̃_m) and M_m per grid R.
inline void write_schedule_csv(std::ostream& os, const std::vector<Schedule>& sch) {
  CsvWriter w(os);
  w.row("R", "m", "eps", "eps_tilde", "N", "M");
  for (const auto& s : sch) {
    for (std::size_t m = 0; m < s.eps.size(); ++m) {
      w.row(s.R, m + 1, s.eps[m], s.eps_tilde[m], static_cast<std::size_t>(s.N[m]),
            static_cast<std::size_t>(s.M[m]));
    }
  }
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::config, "cannot write " + path);
  f << text;
}

inline json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::config, "cannot read " + path);
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::config, path + ": " + e.what());
  }
}

}  // namespace stagecraft
