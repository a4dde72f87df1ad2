#pragma once

/// \file
/// Class-KL functions and KL-decompositions β(r,t) ≤ γ₂(θᵗ γ₁(r)).

#include <algorithm>
#include <cmath>
#include <memory>
#include <utility>
#include <variant>
#include <vector>

#include "stagecraft/cmpfn.hpp"

namespace stagecraft {

inline double decay(double theta, double t) { return std::pow(theta, t); }

inline void require_theta(double theta) {
  if (!(theta > 0.0 && theta < 1.0)) {
    throw Error(ErrorKind::parameter,
                "theta must lie in (0,1), got " + std::to_string(theta));
  }
}

/// β(r,t) = γ₂(θᵗ γ₁(r)).
struct SeparableKL {
  KInfFn gamma2;
  double theta;
  KInfFn gamma1;

  double operator()(double r, double t) const {
    return gamma2(decay(theta, t) * gamma1(r));
  }
};

/// KL function given on a rectangular (r, t) grid.
///
/// Between knots the value is bilinear. Past the last r-knot each column is
/// extended proportionally to r; past the last t-knot all columns decay
/// geometrically with the slowest ratio observed between the final two
/// columns, which keeps the extension KL.
class SampledKL {
 public:
  SampledKL(std::vector<double> r, std::vector<double> t,
            std::vector<std::vector<double>> values)
      : r_(std::move(r)), t_(std::move(t)), v_(std::move(values)) {
    if (r_.empty() || t_.size() < 2 || v_.size() != r_.size()) {
      throw Error(ErrorKind::parameter,
                  "sampled KL needs r knots, >=2 t knots and matching rows");
    }
    for (const auto& row : v_) {
      if (row.size() != t_.size()) {
        throw Error(ErrorKind::parameter, "sampled KL row has wrong length");
      }
    }
    if (r_.front() != 0.0) {
      r_.insert(r_.begin(), 0.0);
      v_.insert(v_.begin(), std::vector<double>(t_.size(), 0.0));
    }
    if (t_.front() != 0.0) {
      throw Error(ErrorKind::parameter, "sampled KL t knots must start at 0");
    }
    for (std::size_t j = 1; j < t_.size(); ++j) {
      if (!(t_[j] > t_[j - 1])) {
        throw Error(ErrorKind::parameter, "t knots must be strictly increasing");
      }
    }
    for (std::size_t i = 0; i < r_.size(); ++i) {
      if (i > 0 && !(r_[i] > r_[i - 1])) {
        throw Error(ErrorKind::parameter, "r knots must be strictly increasing");
      }
      for (std::size_t j = 0; j < t_.size(); ++j) {
        const double v = v_[i][j];
        if (i == 0) {
          if (v != 0.0) {
            throw Error(ErrorKind::parameter, "sampled KL must vanish at r = 0");
          }
          continue;
        }
        if (!(v > v_[i - 1][j]) || !std::isfinite(v)) {
          throw Error(ErrorKind::parameter,
                      "sampled KL not strictly increasing in r");
        }
        if (j > 0 && !(v < v_[i][j - 1])) {
          throw Error(ErrorKind::parameter,
                      "sampled KL not strictly decreasing in t");
        }
      }
    }
    const std::size_t L = t_.size() - 1;
    tail_ratio_ = 0.0;
    for (std::size_t i = 1; i < r_.size(); ++i) {
      tail_ratio_ = std::max(tail_ratio_, v_[i][L] / v_[i][L - 1]);
    }
    tail_ratio_ = std::min(tail_ratio_, 1.0 - 1e-12);
  }

  double operator()(double r, double t) const {
    const std::size_t L = t_.size() - 1;
    if (t >= t_[L]) {
      const double steps = (t - t_[L]) / (t_[L] - t_[L - 1]);
      return column(L, r) * std::pow(tail_ratio_, steps);
    }
    const auto it = std::upper_bound(t_.begin(), t_.end(), t);
    const std::size_t j = static_cast<std::size_t>(it - t_.begin()) - 1;
    const double a = column(j, r);
    if (t == t_[j]) return a;
    const double w = (t - t_[j]) / (t_[j + 1] - t_[j]);
    return a + w * (column(j + 1, r) - a);
  }

  const std::vector<double>& r() const { return r_; }
  const std::vector<double>& t() const { return t_; }
  const std::vector<std::vector<double>>& values() const { return v_; }
  double tail_ratio() const { return tail_ratio_; }

 private:
  double column(std::size_t j, double r) const {
    const std::size_t K = r_.size() - 1;
    if (r >= r_[K]) return v_[K][j] * (r / r_[K]);
    const auto it = std::upper_bound(r_.begin(), r_.end(), r);
    const std::size_t i = static_cast<std::size_t>(it - r_.begin()) - 1;
    if (r == r_[i]) return v_[i][j];
    const double w = (r - r_[i]) / (r_[i + 1] - r_[i]);
    return v_[i][j] + w * (v_[i + 1][j] - v_[i][j]);
  }

  std::vector<double> r_;
  std::vector<double> t_;
  std::vector<std::vector<double>> v_;
  double tail_ratio_ = 0.5;
};

class KLFn;

/// Positive combination Σ wᵢ βᵢ.
struct WeightedKL {
  std::vector<std::pair<double, KLFn>> terms;
  double operator()(double r, double t) const;
};

class KLFn {
 public:
  /// r·0.5ᵗ
  KLFn() : rep_(SeparableKL{KInfFn{}, 0.5, KInfFn{}}) {}

  static KLFn separable(KInfFn gamma2, double theta, KInfFn gamma1) {
    require_theta(theta);
    return KLFn(SeparableKL{std::move(gamma2), theta, std::move(gamma1)});
  }

  static KLFn sampled(std::vector<double> r, std::vector<double> t,
                      std::vector<std::vector<double>> values) {
    return KLFn(std::make_shared<const SampledKL>(std::move(r), std::move(t),
                                                  std::move(values)));
  }

  static KLFn weighted(std::vector<std::pair<double, KLFn>> terms) {
    if (terms.empty()) {
      throw Error(ErrorKind::parameter, "weighted KL needs at least one term");
    }
    for (const auto& [w, b] : terms) {
      if (!(w > 0.0) || !std::isfinite(w)) {
        throw Error(ErrorKind::parameter, "KL weights must be positive");
      }
    }
    return KLFn(std::make_shared<const WeightedKL>(WeightedKL{std::move(terms)}));
  }

  double operator()(double r, double t) const {
    if (!(r >= 0.0) || !(t >= 0.0)) {
      throw Error(ErrorKind::domain, "KL function evaluated at negative argument");
    }
    return std::visit(
        [&](const auto& rep) -> double {
          using T = std::decay_t<decltype(rep)>;
          if constexpr (std::is_same_v<T, SeparableKL>) {
            return rep(r, t);
          } else {
            return (*rep)(r, t);
          }
        },
        rep_);
  }

  const SeparableKL* as_separable() const {
    return std::get_if<SeparableKL>(&rep_);
  }
  const SampledKL* as_sampled() const {
    auto p = std::get_if<std::shared_ptr<const SampledKL>>(&rep_);
    return p ? p->get() : nullptr;
  }
  const WeightedKL* as_weighted() const {
    auto p = std::get_if<std::shared_ptr<const WeightedKL>>(&rep_);
    return p ? p->get() : nullptr;
  }

 private:
  using Rep = std::variant<SeparableKL, std::shared_ptr<const SampledKL>,
                           std::shared_ptr<const WeightedKL>>;
  explicit KLFn(Rep rep) : rep_(std::move(rep)) {}
  Rep rep_;
};

inline double WeightedKL::operator()(double r, double t) const {
  double s = 0.0;
  for (const auto& [w, b] : terms) s += w * b(r, t);
  return s;
}

/// c·β. Separable inputs stay separable by scaling γ₂.
inline KLFn scale(double c, const KLFn& beta) {
  if (const auto* s = beta.as_separable()) {
    return KLFn::separable(scale(c, s->gamma2), s->theta, s->gamma1);
  }
  return KLFn::weighted({{c, beta}});
}

inline KLFn operator+(const KLFn& a, const KLFn& b) {
  return KLFn::weighted({{1.0, a}, {1.0, b}});
}

/// Grid-level KL checks. `decays` asks for β(r, t_last) ≤ decay_tol·β(r, 0).
struct KLCheck {
  bool zero_at_zero = true;
  bool increasing_in_r = true;
  bool decreasing_in_t = true;
  bool decays = true;
  bool ok() const {
    return zero_at_zero && increasing_in_r && decreasing_in_t && decays;
  }
};

inline KLCheck check_kl(const KLFn& beta, std::span<const double> r_grid,
                        std::span<const double> t_grid,
                        double decay_tol = 1e-6) {
  KLCheck c;
  for (double t : t_grid) {
    if (std::abs(beta(0.0, t)) > 1e-12) c.zero_at_zero = false;
    double prev = beta(0.0, t);
    for (double r : r_grid) {
      const double v = beta(r, t);
      if (!(v > prev)) c.increasing_in_r = false;
      prev = v;
    }
  }
  for (double r : r_grid) {
    if (r <= 0.0) continue;
    double prev = std::numeric_limits<double>::infinity();
    for (double t : t_grid) {
      const double v = beta(r, t);
      if (!(v < prev)) c.decreasing_in_t = false;
      prev = v;
    }
    if (!t_grid.empty() && !(beta(r, t_grid.back()) <= decay_tol * beta(r, 0.0))) {
      c.decays = false;
    }
  }
  return c;
}

inline std::vector<double> integer_grid(int t_max) {
  std::vector<double> t(static_cast<std::size_t>(t_max) + 1);
  for (int i = 0; i <= t_max; ++i) t[static_cast<std::size_t>(i)] = i;
  return t;
}

struct KLDecomposition {
  KInfFn gamma1;
  KInfFn gamma2;
  double theta;

  double bound(double r, double t) const {
    return gamma2(decay(theta, t) * gamma1(r));
  }
};

/// min over the grid of γ₂(θᵗγ₁(r)) − β(r,t); nonnegative means dominated.
inline double decomposition_margin(const KLFn& beta, const KLDecomposition& d,
                                   const ValidationGrid& grid) {
  double worst = std::numeric_limits<double>::infinity();
  for (double r : grid.r) {
    for (int t = 0; t <= grid.t_max; ++t) {
      worst = std::min(worst, d.bound(r, t) - beta(r, t));
    }
  }
  return worst;
}

/// KL-decomposition of β at θ.
///
/// A separable β with the same θ is returned as stored. Otherwise
/// γ₁(r) = β(r,0) + r on the grid and γ₂ is the strictly increasing upper
/// envelope of {(θᵗγ₁(r), β(r,t))}; the result is certified only on `grid`.
inline KLDecomposition kl_decompose(const KLFn& beta, double theta,
                                    const ValidationGrid& grid = {}) {
  require_theta(theta);
  if (const auto* s = beta.as_separable(); s && s->theta == theta) {
    return {s->gamma1, s->gamma2, theta};
  }
  std::vector<std::pair<double, double>> g1pts;
  g1pts.reserve(grid.r.size());
  for (double r : grid.r) g1pts.emplace_back(r, beta(r, 0.0) + r);
  const KInfFn gamma1 = upper_envelope(std::move(g1pts), 0.0);

  std::vector<std::pair<double, double>> cloud;
  cloud.reserve(grid.r.size() * static_cast<std::size_t>(grid.t_max + 1));
  for (double r : grid.r) {
    const double g = gamma1(r);
    for (int t = 0; t <= grid.t_max; ++t) {
      cloud.emplace_back(decay(theta, t) * g, beta(r, t));
    }
  }
  KLDecomposition d{gamma1, upper_envelope(std::move(cloud), 1e-9), theta};
  const double margin = decomposition_margin(beta, d, grid);
  if (!(margin >= -1e-9)) {
    throw Error(ErrorKind::decomposition,
                "envelope misses beta by " + std::to_string(-margin));
  }
  return d;
}

}  // namespace stagecraft
