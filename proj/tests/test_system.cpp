#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "stagecraft/system.hpp"

using namespace stagecraft;

namespace {

StageCost squares() {
  return StageCost{KInfFn::power(2), KInfFn::power(2), {}};
}

ControlSequence inputs(std::vector<double> v, TailRule tail = TailRule::none) {
  std::vector<Input> u;
  for (double x : v) u.push_back(Input{x});
  return ControlSequence(u, tail);
}

}  // namespace

TEST(Rollout, GeometricDecay) {
  const auto sys = scalar_linear(0.5, 1.0);
  const auto tr = rollout(sys, State{1.0}, ControlSequence::zeros(Input{0.0}), 3);
  ASSERT_EQ(tr.states.size(), 4u);
  EXPECT_EQ(tr.states[1][0], 0.5);
  EXPECT_EQ(tr.states[2][0], 0.25);
  EXPECT_EQ(tr.states[3][0], 0.125);
  EXPECT_TRUE(tr.replays(sys));
}

TEST(Rollout, ZeroSteps) {
  const auto tr = rollout(double_integrator(), State{1.0, 2.0},
                          ControlSequence::zeros(Input{0.0}), 0);
  ASSERT_EQ(tr.states.size(), 1u);
  EXPECT_EQ(tr.states[0], (State{1.0, 2.0}));
  EXPECT_EQ(tr.length(), 0u);
}

TEST(Rollout, TwoStepReplay) {
  const auto sys = scalar_linear(0.5, 1.0);
  const auto tr = rollout(sys, State{0.0}, inputs({1, 0}), 2);
  EXPECT_EQ(tr.states[1][0], 1.0);
  EXPECT_EQ(tr.states[2][0], 0.5);
}

TEST(Rollout, ShortInputIsMalformed) {
  const auto sys = scalar_linear();
  try {
    rollout(sys, State{1.0}, inputs({1, 0}), 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::certificate_malformed);
  }
  std::vector<Input> two{Input{1.0}, Input{0.0}};
  EXPECT_THROW(rollout(sys, State{1.0}, std::span<const Input>(two), 3), Error);
}

TEST(Rollout, NonFiniteStateCarriesStep) {
  const auto sys = scalar_linear(1e200, 1.0);
  try {
    rollout(sys, State{1e200}, ControlSequence::zeros(Input{0.0}), 5);
    FAIL();
  } catch (const SimulationError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::simulation);
    EXPECT_EQ(e.step(), 0u);
  }
}

TEST(ControlSeq, TailRules) {
  const auto rep = inputs({1, 2}, TailRule::repeat_last);
  EXPECT_EQ(rep.at(5)[0], 2.0);
  const auto zero = inputs({1, 2}, TailRule::zero_input);
  EXPECT_EQ(zero.at(5)[0], 0.0);
  const auto none = inputs({1, 2});
  EXPECT_TRUE(none.covers(1));
  EXPECT_FALSE(none.covers(2));
  EXPECT_EQ(none.defined_length(), 2u);
  EXPECT_THROW(none.at(2), Error);
}

TEST(TotalCost, HandSumOfSquares) {
  const auto sys = scalar_linear();
  EXPECT_DOUBLE_EQ(total_cost(sys, squares(), State{1.0},
                              ControlSequence::zeros(Input{0.0}), 2),
                   1.25);
}

TEST(TotalCost, EmptySum) {
  EXPECT_EQ(total_cost(scalar_nonlinear(), squares(), State{3.0},
                       ControlSequence::zeros(Input{0.0}), 0),
            0.0);
}

TEST(TotalCost, InfiniteProxyGeometricSeries) {
  const auto res = total_cost_infinite(scalar_linear(), squares(), State{1.0},
                                       ControlSequence::zeros(Input{0.0}));
  EXPECT_TRUE(res.converged);
  EXPECT_NEAR(res.value, 4.0 / 3.0, 1e-10);
}

TEST(TotalCost, InfiniteProxyReportsDivergence) {
  const auto sys = scalar_linear(1.0, 1.0);
  InfiniteHorizon h;
  h.max_steps = 100;
  const auto res = total_cost_infinite(sys, squares(), State{1.0},
                                       ControlSequence::zeros(Input{0.0}), h);
  EXPECT_FALSE(res.converged);
  EXPECT_EQ(res.steps, 100u);
  EXPECT_DOUBLE_EQ(res.value, 100.0);
}

TEST(StageCostProps, LowerBoundedByQ) {
  const auto sys = double_integrator();
  StageCost ell{KInfFn::linear(2), KInfFn::identity(),
                [](const State& x, const Input& u) { return std::abs(x[0] * u[0]); }};
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0, 3);
  for (int i = 0; i < 200; ++i) {
    const State x{n(rng), n(rng)};
    const Input u{n(rng)};
    EXPECT_GE(ell(sys, x, u), ell.lower_bound()(sys.sigma(x)));
  }
}

TEST(Properties, MonotoneInHorizonAndPrefixAdditive) {
  const auto sys = scalar_nonlinear();
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0, 1);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Input> u;
    for (int k = 0; k < 40; ++k) u.push_back(Input{n(rng)});
    const ControlSequence seq(u, TailRule::none);
    const State x0{3.0 * n(rng)};
    double prev = 0.0;
    for (std::size_t N = 0; N <= 40; ++N) {
      const double J = total_cost(sys, squares(), x0, seq, N);
      EXPECT_GE(J, prev);
      prev = J;
    }
    for (std::size_t N : {0u, 7u, 20u}) {
      const std::size_t M = 40 - N;
      const auto tr = rollout(sys, x0, seq, N);
      const ControlSequence shifted(std::vector<Input>(u.begin() + N, u.end()),
                                    TailRule::none);
      const double lhs = total_cost(sys, squares(), x0, seq, N + M);
      const double rhs = total_cost(sys, squares(), x0, seq, N) +
                         total_cost(sys, squares(), tr.states.back(), shifted, M);
      EXPECT_NEAR(lhs, rhs, 1e-12 * std::max(1.0, lhs));
    }
  }
}

TEST(Builtins, DoubleIntegratorDynamics) {
  const auto sys = double_integrator();
  EXPECT_EQ(sys.transition(State{1, 2}, Input{3}), (State{3, 5}));
  EXPECT_DOUBLE_EQ(sys.sigma(State{3, 4}), 5.0);
}

TEST(Builtins, ScalarNonlinearDynamics) {
  const auto sys = scalar_nonlinear();
  EXPECT_DOUBLE_EQ(sys.transition(State{1}, Input{0.5})[0], 1.0);
}
