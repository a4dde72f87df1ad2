#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "stagecraft/builtins.hpp"
#include "stagecraft/oracle.hpp"

using namespace stagecraft;

namespace {

const KInfFn id = KInfFn::identity();

// {0: σ = 0, 1: σ = 1}; input 0 stays, input 1 moves to 0.
FiniteSystem two_state() {
  FiniteSystem f;
  f.next = {{0, 0}, {1, 0}};
  f.sigma = {0.0, 1.0};
  f.rho = {0.0, 0.0};
  return f;
}

StageCost sigma_cost() { return StageCost{id, NonnegFn::zero(), {}}; }

// Cheapest cost over every control sequence of length `depth`, with the
// terminal value added at the leaves.
double brute_force(const FiniteSystem& fs, const std::vector<std::vector<double>>& c,
                   const std::vector<double>& terminal, std::size_t x, int depth) {
  if (depth == 0) return terminal[x];
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t u = 0; u < fs.inputs(); ++u) {
    best = std::min(best, c[x][u] + brute_force(fs, c, terminal, fs.next[x][u], depth - 1));
  }
  return best;
}

}  // namespace

TEST(ValueIterate, TwoStateExample) {
  const auto vt = value_iterate(two_state(), sigma_cost());
  EXPECT_DOUBLE_EQ(vt.V[0], 0.0);
  EXPECT_DOUBLE_EQ(vt.V[1], 1.0);
  EXPECT_EQ(vt.policy[1], 1u);
  EXPECT_LE(vt.residual, 1e-10);
}

TEST(ValueIterate, ZeroCostGivesZeroValue) {
  const StageCost zero{id, NonnegFn::zero(), [](const State&, const Input&) { return 0.0; }};
  const FiniteSystem fs = finite_chain(6);
  // ℓ = q(σ) is positive off the target, so use a chain whose σ is zero
  FiniteSystem flat = fs;
  for (auto& s : flat.sigma) s = 0.0;
  const auto vt = value_iterate(flat, zero);
  for (double v : vt.V) EXPECT_EQ(v, 0.0);
}

TEST(ValueIterate, StrandedStateIsInfinite) {
  FiniteSystem f = two_state();
  f.next.push_back({2, 2});  // state 2 can never leave
  f.sigma.push_back(2.0);
  const auto vt = value_iterate(f, sigma_cost());
  EXPECT_FALSE(vt.finite(2));
  EXPECT_TRUE(vt.finite(1));
  EXPECT_EQ(finite_states(vt).size(), 2u);
}

TEST(ValueIterate, ChainValues) {
  const auto fs = finite_chain(10);
  const StageCost ell{id, NonnegFn(id), {}};
  const auto vt = value_iterate(fs, ell);
  // stepping left from i costs i + 1
  double expect = 0.0;
  for (std::size_t i = 0; i < 10; ++i) {
    if (i > 0) expect += static_cast<double>(i) + 1.0;
    EXPECT_NEAR(vt.V[i], expect, 1e-9);
  }
}

TEST(ValueIterate, BudgetExceeded) {
  ViOptions opt;
  opt.max_iter = 2;
  try {
    value_iterate(finite_chain(10), StageCost{id, NonnegFn(id), {}}, opt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::budget);
  }
}

TEST(FiniteSystemChecks, InvalidTablesRejected) {
  FiniteSystem f = two_state();
  f.next[1] = {0};
  EXPECT_THROW(f.validate(), Error);
  f = two_state();
  f.sigma = {1.0, 1.0};
  EXPECT_THROW(f.validate(), Error);
  f = two_state();
  f.next[0] = {0, 5};
  EXPECT_THROW(f.validate(), Error);
}

TEST(Discretize, ScalarLinearSnapsToGrid) {
  const auto fs = discretize(scalar_linear(), -2.0, 2.0, 41, {-0.5, 0.0, 0.5});
  EXPECT_NO_THROW(fs.validate());
  EXPECT_EQ(fs.states(), 41u);
  // x = 1 with u = 0 goes to 0.5, index 25
  EXPECT_EQ(fs.next[30][1], 25u);
  EXPECT_EQ(fs.sigma[20], 0.0);
}

TEST(ExtractUcc, SinglePointEnvelope) {
  const auto fs = two_state();
  const auto vt = value_iterate(fs, sigma_cost());
  ExtractOptions opt;
  opt.margin = 1.5;
  const auto ucc = extract_ucc(vt, fs, sigma_cost(), opt);
  EXPECT_GE(ucc.alpha_bar(1.0), 1.5);
  EXPECT_TRUE(ucc.invariant);
}

TEST(ExtractUcc, TargetOnlyIsVacuous) {
  FiniteSystem f;
  f.next = {{0}};
  f.sigma = {0.0};
  f.rho = {0.0};
  const auto vt = value_iterate(f, sigma_cost());
  const auto ucc = extract_ucc(vt, f, sigma_cost());
  const auto rep = verify(ucc, f.as_control_system(), finite_states(vt), 16);
  EXPECT_TRUE(rep.passed);
}

TEST(ExtractUcc, EnvelopeIsRunningMax) {
  // five states with V = 2^i but σ ordering reversed for two of them
  FiniteSystem f;
  f.rho = {0.0};
  f.sigma = {0.0, 1.0, 2.0, 3.0, 4.0};
  f.next = {{0}, {0}, {1}, {2}, {3}};
  const StageCost ell{id, NonnegFn::zero(), [](const State& x, const Input&) {
                        const double k = x[0];
                        return k == 0 ? 0.0 : std::pow(2.0, k) - k;
                      }};
  const auto vt = value_iterate(f, ell);
  const auto ucc = extract_ucc(vt, f, ell);
  double run = 0.0;
  for (std::size_t i = 0; i < 5; ++i) {
    run = std::max(run, vt.V[i]);
    EXPECT_GE(ucc.alpha_bar(f.sigma[i]), run);
    EXPECT_LE(ucc.alpha_bar(f.sigma[i]), run + 1e-8 * std::max(1.0, run) + 1e-8);
  }
}

TEST(ExtractUcc, PositiveValueAtTargetRejected) {
  FiniteSystem f;
  f.next = {{1}, {1}};
  f.sigma = {0.0, 0.0};
  f.rho = {0.0};
  const StageCost ell{id, NonnegFn::zero(), [](const State& x, const Input&) {
                        return x[0] == 0.0 ? 1.0 : 0.0;
                      }};
  const auto vt = value_iterate(f, ell);
  try {
    extract_ucc(vt, f, ell);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::decomposition);
  }
}

TEST(Properties, GreedyCostMatchesValue) {
  const StageCost ell{id, NonnegFn(id), {}};
  for (const auto& fs : {finite_chain(10), finite_grid(64),
                         discretize(scalar_nonlinear(), -3, 3, 121, {-1, -0.5, 0, 0.5, 1})}) {
    const auto vt = value_iterate(fs, ell);
    for (std::size_t x = 0; x < fs.states(); ++x) {
      if (!vt.finite(x)) continue;
      EXPECT_NEAR(greedy_cost(fs, ell, vt, x, 5000), vt.V[x], 1e-9) << fs.name << " " << x;
    }
  }
}

TEST(Properties, ExtractedCertificatePasses) {
  const StageCost ell{id, NonnegFn(id), {}};
  for (const auto& fs : {finite_chain(10), finite_grid(64)}) {
    const auto vt = value_iterate(fs, ell);
    const auto ucc = extract_ucc(vt, fs, ell);
    const auto rep = verify(ucc, fs.as_control_system(), finite_states(vt), 256);
    EXPECT_TRUE(rep.passed) << fs.name;
  }
}

TEST(Properties, AgreesWithExhaustiveSearch) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 25; ++trial) {
    FiniteSystem f;
    const std::size_t n = 2 + rng() % 4, m = 1 + rng() % 3;
    for (std::size_t u = 0; u < m; ++u) f.rho.push_back(static_cast<double>(rng() % 3));
    for (std::size_t x = 0; x < n; ++x) {
      f.sigma.push_back(x == 0 ? 0.0 : 1.0 + static_cast<double>(rng() % 4));
      std::vector<std::size_t> row;
      for (std::size_t u = 0; u < m; ++u) row.push_back(x == 0 && u == 0 ? 0 : rng() % n);
      f.next.push_back(row);
    }
    f.rho[0] = 0.0;
    const StageCost ell{id, NonnegFn(id), {}};
    const auto vt = value_iterate(f, ell);
    const auto c = cost_table(f, ell);
    std::vector<double> zero(n, 0.0);
    for (std::size_t x = 0; x < n; ++x) {
      const double lower = brute_force(f, c, zero, x, 8);
      const double upper = brute_force(f, c, vt.V, x, 8);
      if (!vt.finite(x)) {
        // every path pays at least the smallest positive stage cost per step
        EXPECT_GE(lower, 8.0);
        continue;
      }
      EXPECT_LE(lower, vt.V[x] + 1e-9);
      EXPECT_NEAR(upper, vt.V[x], 1e-9);
    }
  }
}
