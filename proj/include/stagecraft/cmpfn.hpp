#pragma once

/// \file
/// Comparison functions as immutable expression trees.
///
/// A KInfFn is built only from primitives that are zero at zero, strictly
/// increasing and unbounded, and from combinators that preserve those
/// properties (sum, product, pointwise min, composition, inversion). The
/// `table` primitive admits sampled data through a monotone piecewise
/// linear interpolant that is checked at construction. NonnegFn shares the
/// representation but additionally admits `zero` and non-strict tables.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stagecraft/error.hpp"

namespace stagecraft {

enum class Op {
  zero,
  identity,
  power,
  linear,
  scale,
  sum,
  product,
  min,
  compose,
  inverse,
  table,
};

/// Piecewise linear interpolant through (0,0) and the given knots.
///
/// Knots must have strictly increasing abscissae and nondecreasing
/// (strictly increasing when `strict`) ordinates. Past the last knot the
/// final segment is extended, so a strict table is unbounded.
class MonotoneTable {
 public:
  MonotoneTable(std::vector<double> xs, std::vector<double> ys, bool strict)
      : xs_(std::move(xs)), ys_(std::move(ys)), strict_(strict) {
    if (xs_.size() != ys_.size() || xs_.empty()) {
      throw Error(ErrorKind::parameter, "table needs matching, nonempty knots");
    }
    if (xs_.front() != 0.0) {
      xs_.insert(xs_.begin(), 0.0);
      ys_.insert(ys_.begin(), 0.0);
    }
    if (ys_.front() != 0.0) {
      throw Error(ErrorKind::parameter, "table must pass through the origin");
    }
    if (xs_.size() < 2) {
      throw Error(ErrorKind::parameter, "table needs a knot beyond the origin");
    }
    for (std::size_t i = 1; i < xs_.size(); ++i) {
      if (!std::isfinite(xs_[i]) || !std::isfinite(ys_[i])) {
        throw Error(ErrorKind::parameter, "table knots must be finite");
      }
      if (!(xs_[i] > xs_[i - 1])) {
        throw Error(ErrorKind::parameter,
                    "table abscissae must be strictly increasing");
      }
      const bool ok = strict_ ? ys_[i] > ys_[i - 1] : ys_[i] >= ys_[i - 1];
      if (!ok) {
        throw Error(ErrorKind::parameter,
                    strict_ ? "table values must be strictly increasing"
                            : "table values must be nondecreasing");
      }
    }
    const std::size_t n = xs_.size();
    tail_slope_ = (ys_[n - 1] - ys_[n - 2]) / (xs_[n - 1] - xs_[n - 2]);
  }

  double operator()(double x) const {
    const std::size_t n = xs_.size();
    if (x >= xs_[n - 1]) {
      return ys_[n - 1] + (x - xs_[n - 1]) * tail_slope_;
    }
    const auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - xs_.begin()) - 1;
    if (x == xs_[i]) return ys_[i];
    const double w = (x - xs_[i]) / (xs_[i + 1] - xs_[i]);
    return ys_[i] + w * (ys_[i + 1] - ys_[i]);
  }

  /// Exact inverse of the interpolant; only meaningful for strict tables.
  double inverse(double y) const {
    const std::size_t n = ys_.size();
    if (y >= ys_[n - 1]) {
      return xs_[n - 1] + (y - ys_[n - 1]) / tail_slope_;
    }
    const auto it = std::upper_bound(ys_.begin(), ys_.end(), y);
    const std::size_t i = static_cast<std::size_t>(it - ys_.begin()) - 1;
    if (y == ys_[i]) return xs_[i];
    const double w = (y - ys_[i]) / (ys_[i + 1] - ys_[i]);
    return xs_[i] + w * (xs_[i + 1] - xs_[i]);
  }

  const std::vector<double>& xs() const { return xs_; }
  const std::vector<double>& ys() const { return ys_; }
  bool strict() const { return strict_; }

 private:
  std::vector<double> xs_;
  std::vector<double> ys_;
  bool strict_;
  double tail_slope_ = 0.0;
};

struct Node;
using NodePtr = std::shared_ptr<const Node>;

/// One expression-tree node. `lhs` is the outer function of a composition
/// and the sole argument of scale/inverse; `rhs` is the inner function.
struct Node {
  Op op = Op::identity;
  double param = 0.0;
  NodePtr lhs;
  NodePtr rhs;
  std::shared_ptr<const MonotoneTable> table;
};

/// Bracket-and-bisect settings for numeric inversion.
struct InvertOptions {
  int max_doublings = 200;
  int max_bisections = 2000;
};

namespace detail {

inline NodePtr make_node(Op op, double param = 0.0, NodePtr lhs = nullptr,
                         NodePtr rhs = nullptr) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->param = param;
  n->lhs = std::move(lhs);
  n->rhs = std::move(rhs);
  return n;
}

double evaluate(const Node& n, double r);
double invert(const Node& n, double y);

/// Bracket [0,1], double the upper end until it passes y, then bisect down
/// to adjacent doubles.
template <class F>
double bisect_inverse(const F& f, double y, const InvertOptions& opt = {}) {
  if (!(y >= 0.0) || !std::isfinite(y)) {
    throw Error(ErrorKind::domain, "cannot invert at " + std::to_string(y));
  }
  if (y == 0.0) return 0.0;
  double lo = 0.0;
  double hi = 1.0;
  int doublings = 0;
  while (f(hi) < y) {
    lo = hi;
    hi *= 2.0;
    if (++doublings > opt.max_doublings) {
      throw Error(ErrorKind::non_surjective,
                  "bracket did not pass " + std::to_string(y));
    }
  }
  for (int i = 0; i < opt.max_bisections; ++i) {
    const double mid = lo + 0.5 * (hi - lo);
    if (!(mid > lo && mid < hi)) break;
    if (f(mid) < y) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double flo = f(lo);
  const double fhi = f(hi);
  return (y - flo <= fhi - y) ? lo : hi;
}

inline double evaluate(const Node& n, double r) {
  switch (n.op) {
    case Op::zero: return 0.0;
    case Op::identity: return r;
    case Op::power: return std::pow(r, n.param);
    case Op::linear: return n.param * r;
    case Op::scale: return n.param * evaluate(*n.lhs, r);
    case Op::sum: return evaluate(*n.lhs, r) + evaluate(*n.rhs, r);
    case Op::product: return evaluate(*n.lhs, r) * evaluate(*n.rhs, r);
    case Op::min: return std::min(evaluate(*n.lhs, r), evaluate(*n.rhs, r));
    case Op::compose: return evaluate(*n.lhs, evaluate(*n.rhs, r));
    case Op::inverse: return invert(*n.lhs, r);
    case Op::table: return (*n.table)(r);
  }
  return 0.0;
}

inline double invert(const Node& n, double y) {
  if (!(y >= 0.0)) {
    throw Error(ErrorKind::domain, "cannot invert at " + std::to_string(y));
  }
  switch (n.op) {
    case Op::identity: return y;
    case Op::power: return std::pow(y, 1.0 / n.param);
    case Op::linear: return y / n.param;
    case Op::scale: return invert(*n.lhs, y / n.param);
    case Op::compose: return invert(*n.rhs, invert(*n.lhs, y));
    case Op::inverse: return evaluate(*n.lhs, y);
    case Op::table: return n.table->inverse(y);
    // min(f,g)^{-1} = max(f^{-1}, g^{-1}) for increasing f, g.
    case Op::min: return std::max(invert(*n.lhs, y), invert(*n.rhs, y));
    case Op::sum:
    case Op::product:
      return bisect_inverse([&n](double r) { return evaluate(n, r); }, y);
    case Op::zero:
      throw Error(ErrorKind::non_surjective, "zero function has no inverse");
  }
  return 0.0;
}

/// True iff the tree only uses K-infinity preserving parts.
inline bool is_kinf_tree(const Node& n) {
  switch (n.op) {
    case Op::zero: return false;
    case Op::identity: return true;
    case Op::power:
    case Op::linear: return n.param > 0.0 && std::isfinite(n.param);
    case Op::scale:
      return n.param > 0.0 && std::isfinite(n.param) && n.lhs &&
             is_kinf_tree(*n.lhs);
    case Op::inverse: return n.lhs && is_kinf_tree(*n.lhs);
    case Op::sum:
    case Op::product:
    case Op::min:
    case Op::compose:
      return n.lhs && n.rhs && is_kinf_tree(*n.lhs) && is_kinf_tree(*n.rhs);
    case Op::table: return n.table && n.table->strict();
  }
  return false;
}

inline bool is_wellformed_nonneg(const Node& n) {
  switch (n.op) {
    case Op::zero:
    case Op::identity: return true;
    case Op::power:
    case Op::linear: return n.param > 0.0;
    case Op::scale: return n.param > 0.0 && n.lhs && is_wellformed_nonneg(*n.lhs);
    // inversion needs surjectivity
    case Op::inverse: return n.lhs && is_kinf_tree(*n.lhs);
    case Op::sum:
    case Op::product:
    case Op::min:
      return n.lhs && n.rhs && is_wellformed_nonneg(*n.lhs) &&
             is_wellformed_nonneg(*n.rhs);
    // Outer part must be defined on all of R>=0; inner must be nonneg.
    case Op::compose:
      return n.lhs && n.rhs && is_wellformed_nonneg(*n.lhs) &&
             is_wellformed_nonneg(*n.rhs);
    case Op::table: return static_cast<bool>(n.table);
  }
  return false;
}

inline double checked_arg(double r) {
  if (!(r >= 0.0)) {
    throw Error(ErrorKind::domain,
                "comparison function evaluated at " + std::to_string(r));
  }
  return r;
}

}  // namespace detail

/// A class-K-infinity function.
class KInfFn {
 public:
  /// The identity.
  KInfFn() : node_(detail::make_node(Op::identity)) {}

  static KInfFn identity() { return KInfFn(detail::make_node(Op::identity)); }

  static KInfFn power(double p) {
    require_positive(p, "power exponent");
    return KInfFn(detail::make_node(Op::power, p));
  }

  static KInfFn linear(double c) {
    require_positive(c, "linear slope");
    return KInfFn(detail::make_node(Op::linear, c));
  }

  /// Strictly increasing piecewise linear interpolant through the knots.
  static KInfFn table(std::vector<double> xs, std::vector<double> ys) {
    auto n = std::make_shared<Node>();
    n->op = Op::table;
    n->table = std::make_shared<const MonotoneTable>(std::move(xs),
                                                     std::move(ys), true);
    return KInfFn(n);
  }

  /// Adopts an arbitrary tree after checking it only uses K-infinity parts.
  static KInfFn from_node(NodePtr node) {
    if (!node || !detail::is_kinf_tree(*node)) {
      throw Error(ErrorKind::parameter, "expression is not a K-infinity tree");
    }
    return KInfFn(std::move(node));
  }

  double operator()(double r) const {
    return detail::evaluate(*node_, detail::checked_arg(r));
  }

  /// r with f(r) = y, structurally where possible, else by bisection.
  double inverse(double y) const {
    return detail::invert(*node_, detail::checked_arg(y));
  }

  /// The inverse function as a new tree node.
  KInfFn inverse_fn() const {
    if (node_->op == Op::inverse) return KInfFn(node_->lhs);
    return KInfFn(detail::make_node(Op::inverse, 0.0, node_));
  }

  const NodePtr& node() const { return node_; }

 private:
  explicit KInfFn(NodePtr node) : node_(std::move(node)) {}

  static void require_positive(double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw Error(ErrorKind::parameter,
                  std::string(what) + " must be positive, got " +
                      std::to_string(v));
    }
  }

  friend KInfFn compose(const KInfFn&, const KInfFn&);
  friend KInfFn scale(double, const KInfFn&);
  friend class KInfBuilder;

  NodePtr node_;
};

/// Internal constructor access for combinators.
class KInfBuilder {
 public:
  static KInfFn wrap(NodePtr n) { return KInfFn(std::move(n)); }
};

/// outer ∘ inner
inline KInfFn compose(const KInfFn& outer, const KInfFn& inner) {
  return KInfFn(detail::make_node(Op::compose, 0.0, outer.node(), inner.node()));
}

/// r ↦ c·f(r)
inline KInfFn scale(double c, const KInfFn& f) {
  KInfFn::require_positive(c, "scale factor");
  if (c == 1.0) return f;
  return KInfFn(detail::make_node(Op::scale, c, f.node()));
}

enum class Combine { sum, product, min };

/// Pointwise c1·f ⊕ c2·g for ⊕ in {+, ·, min}.
inline KInfFn combine(const KInfFn& f, const KInfFn& g, Combine mode,
                      double c1 = 1.0, double c2 = 1.0) {
  const KInfFn a = scale(c1, f);
  const KInfFn b = scale(c2, g);
  const Op op = mode == Combine::sum       ? Op::sum
                : mode == Combine::product ? Op::product
                                           : Op::min;
  return KInfBuilder::wrap(detail::make_node(op, 0.0, a.node(), b.node()));
}

inline KInfFn operator+(const KInfFn& f, const KInfFn& g) {
  return combine(f, g, Combine::sum);
}
inline KInfFn operator*(const KInfFn& f, const KInfFn& g) {
  return combine(f, g, Combine::product);
}
inline KInfFn operator*(double c, const KInfFn& f) { return scale(c, f); }

inline double eval(const KInfFn& f, double r) { return f(r); }
inline double invert(const KInfFn& f, double y) { return f.inverse(y); }

/// Forces the bracket-and-bisect path regardless of tree structure.
inline double invert_numeric(const KInfFn& f, double y,
                             const InvertOptions& opt = {}) {
  return detail::bisect_inverse([&f](double r) { return f(r); },
                                detail::checked_arg(y), opt);
}

/// (α(2a), α(2b)); their sum bounds α(a+b).
inline std::pair<double, double> weak_triangle_split(const KInfFn& alpha,
                                                     double a, double b) {
  return {alpha(2.0 * detail::checked_arg(a)),
          alpha(2.0 * detail::checked_arg(b))};
}

/// A nonnegative function on R>=0, possibly K-infinity.
class NonnegFn {
 public:
  /// The zero function.
  NonnegFn()
      : node_(detail::make_node(Op::zero)), positive_definite_(false), kinf_(false) {}

  NonnegFn(const KInfFn& f)  // NOLINT(google-explicit-constructor)
      : node_(f.node()), positive_definite_(true), kinf_(true) {}

  static NonnegFn zero() {
    return NonnegFn(detail::make_node(Op::zero), false, false);
  }

  /// A non-strict table through (0,0).
  static NonnegFn table(std::vector<double> xs, std::vector<double> ys,
                        bool positive_definite) {
    auto n = std::make_shared<Node>();
    n->op = Op::table;
    n->table = std::make_shared<const MonotoneTable>(std::move(xs),
                                                     std::move(ys), false);
    return from_node(n, positive_definite);
  }

  static NonnegFn from_node(NodePtr node, bool positive_definite) {
    if (!node || !detail::is_wellformed_nonneg(*node)) {
      throw Error(ErrorKind::parameter, "malformed nonnegative expression");
    }
    const bool kinf = detail::is_kinf_tree(*node);
    return NonnegFn(std::move(node), positive_definite || kinf, kinf);
  }

  double operator()(double r) const {
    return detail::evaluate(*node_, detail::checked_arg(r));
  }

  bool positive_definite() const { return positive_definite_; }
  bool is_kinf() const { return kinf_; }

  std::optional<KInfFn> as_kinf() const {
    if (!kinf_) return std::nullopt;
    return KInfBuilder::wrap(node_);
  }

  const NodePtr& node() const { return node_; }

 private:
  NonnegFn(NodePtr node, bool pd, bool kinf)
      : node_(std::move(node)), positive_definite_(pd), kinf_(kinf) {}

  NodePtr node_;
  bool positive_definite_;
  bool kinf_;
};

inline double eval(const NonnegFn& f, double r) { return f(r); }

/// n points log-spaced on [lo, hi].
inline std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  std::vector<double> g(n);
  if (n == 1) {
    g[0] = lo;
    return g;
  }
  const double a = std::log(lo);
  const double b = std::log(hi);
  for (std::size_t i = 0; i < n; ++i) {
    g[i] = std::exp(a + (b - a) * static_cast<double>(i) /
                            static_cast<double>(n - 1));
  }
  g.front() = lo;
  g.back() = hi;
  return g;
}

/// The r-axis and integer horizon on which numeric constructions are
/// certified.
struct ValidationGrid {
  std::vector<double> r = log_grid(1e-4, 1e4, 64);
  int t_max = 64;
};

/// Smallest strictly increasing table through the origin that lies on or
/// above every point, with `eps`·x added for strictness. Points sharing an
/// abscissa are merged by their maximum.
///
/// Throws Error(decomposition) when a point at x = 0 has positive value.
inline KInfFn upper_envelope(std::vector<std::pair<double, double>> pts,
                             double eps = 1e-9) {
  std::sort(pts.begin(), pts.end());
  std::vector<double> xs;
  std::vector<double> ys;
  double run = 0.0;
  for (std::size_t i = 0; i < pts.size();) {
    const double x = pts[i].first;
    double y = pts[i].second;
    std::size_t j = i;
    while (j < pts.size() && pts[j].first == x) {
      y = std::max(y, pts[j].second);
      ++j;
    }
    i = j;
    if (!(x >= 0.0) || !std::isfinite(x) || !std::isfinite(y)) {
      throw Error(ErrorKind::decomposition,
                  "envelope point is negative or non-finite");
    }
    if (x == 0.0) {
      if (y > 0.0) {
        throw Error(ErrorKind::decomposition,
                    "envelope needs value 0 at 0, got " + std::to_string(y));
      }
      continue;
    }
    run = std::max(run, y);
    double v = run + eps * x;
    const double prev = ys.empty() ? 0.0 : ys.back();
    if (!(v > prev)) v = std::nextafter(prev, std::numeric_limits<double>::infinity());
    xs.push_back(x);
    ys.push_back(v);
  }
  if (xs.empty()) return KInfFn::linear(eps > 0.0 ? eps : 1.0);
  return KInfFn::table(std::move(xs), std::move(ys));
}

/// Grid-level check of the K-infinity invariants.
struct KInfCheck {
  bool zero_at_zero = false;
  bool strictly_increasing = false;
  bool unbounded = false;
  bool ok() const { return zero_at_zero && strictly_increasing && unbounded; }
};

inline KInfCheck check_kinf(const KInfFn& f, std::span<const double> grid,
                            double unbounded_target = 1e6) {
  KInfCheck c;
  c.zero_at_zero = std::abs(f(0.0)) <= 1e-12;
  c.strictly_increasing = true;
  double prev = f(0.0);
  for (double r : grid) {
    const double v = f(r);
    if (!(v > prev)) {
      c.strictly_increasing = false;
      break;
    }
    prev = v;
  }
  const double target = unbounded_target * (1.0 + f(1.0));
  double probe = 1.0;
  for (int k = 0; k < 1000 && std::isfinite(probe); ++k, probe *= 2.0) {
    if (f(probe) > target) {
      c.unbounded = true;
      break;
    }
  }
  return c;
}

}  // namespace stagecraft
