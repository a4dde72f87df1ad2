#pragma once

// Random K-infinity expression trees for property tests.
//
// Growth is tracked through the power-law exponents near 0 and near
// infinity; trees whose exponents leave [0.25, 4] are redrawn so values on
// [1e-6, 1e6] stay well inside double range. At most one inverse node lies
// on any root-to-leaf path.

#include <random>
#include <vector>

#include "stagecraft/cmpfn.hpp"

namespace testing_support {

struct Grown {
  stagecraft::KInfFn f;
  double e0;    // exponent near 0
  double einf;  // exponent near infinity
  bool has_inverse;
};

inline bool tame(const Grown& g) {
  return g.e0 >= 0.25 && g.e0 <= 4.0 && g.einf >= 0.25 && g.einf <= 4.0;
}

inline Grown random_leaf(std::mt19937_64& rng) {
  using stagecraft::KInfFn;
  std::uniform_int_distribution<int> kind(0, 3);
  std::uniform_real_distribution<double> p(0.5, 2.0);
  switch (kind(rng)) {
    case 0: return {KInfFn::identity(), 1, 1, false};
    case 1: {
      const double e = p(rng);
      return {KInfFn::power(e), e, e, false};
    }
    case 2: return {KInfFn::linear(p(rng)), 1, 1, false};
    default: {
      std::uniform_real_distribution<double> step(0.1, 2.0);
      std::vector<double> xs, ys;
      double x = 0.0, y = 0.0;
      const int n = 2 + static_cast<int>(rng() % 5);
      for (int i = 0; i < n; ++i) {
        x += step(rng);
        y += step(rng);
        xs.push_back(x);
        ys.push_back(y);
      }
      return {KInfFn::table(xs, ys), 1, 1, false};
    }
  }
}

inline Grown grow(std::mt19937_64& rng, int depth, bool inverse_allowed) {
  using namespace stagecraft;
  if (depth <= 1) return random_leaf(rng);
  std::uniform_int_distribution<int> kind(0, 7);
  std::uniform_real_distribution<double> c(0.25, 4.0);
  for (int attempt = 0; attempt < 20; ++attempt) {
    Grown out{KInfFn::identity(), 1, 1, false};
    switch (kind(rng)) {
      case 0: out = random_leaf(rng); break;
      case 1: {
        auto a = grow(rng, depth - 1, inverse_allowed);
        out = {scale(c(rng), a.f), a.e0, a.einf, a.has_inverse};
        break;
      }
      case 2: {
        auto a = grow(rng, depth - 1, inverse_allowed);
        auto b = grow(rng, depth - 1, inverse_allowed);
        out = {combine(a.f, b.f, Combine::sum, c(rng), c(rng)), std::min(a.e0, b.e0),
               std::max(a.einf, b.einf), a.has_inverse || b.has_inverse};
        break;
      }
      case 3: {
        auto a = grow(rng, depth - 1, inverse_allowed);
        auto b = grow(rng, depth - 1, inverse_allowed);
        out = {a.f * b.f, a.e0 + b.e0, a.einf + b.einf, a.has_inverse || b.has_inverse};
        break;
      }
      case 4: {
        auto a = grow(rng, depth - 1, inverse_allowed);
        auto b = grow(rng, depth - 1, inverse_allowed);
        out = {combine(a.f, b.f, Combine::min), std::max(a.e0, b.e0),
               std::min(a.einf, b.einf), a.has_inverse || b.has_inverse};
        break;
      }
      case 5:
      case 6: {
        auto a = grow(rng, depth - 1, inverse_allowed);
        auto b = grow(rng, depth - 1, inverse_allowed);
        out = {compose(a.f, b.f), a.e0 * b.e0, a.einf * b.einf,
               a.has_inverse || b.has_inverse};
        break;
      }
      default: {
        if (!inverse_allowed) continue;
        auto a = grow(rng, depth - 1, false);
        out = {a.f.inverse_fn(), 1.0 / a.e0, 1.0 / a.einf, true};
        break;
      }
    }
    if (tame(out)) return out;
  }
  return random_leaf(rng);
}

/// A random K-infinity tree of depth at most `depth`.
inline stagecraft::KInfFn random_tree(std::mt19937_64& rng, int depth) {
  return grow(rng, depth, true).f;
}

}  // namespace testing_support
