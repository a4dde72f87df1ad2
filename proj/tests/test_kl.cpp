#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "stagecraft/kl.hpp"

using namespace stagecraft;

namespace {

KLFn sampled_quarter() {
  std::vector<double> r, t;
  for (int i = 1; i <= 20; ++i) r.push_back(0.5 * i);
  for (int j = 0; j <= 20; ++j) t.push_back(j);
  std::vector<std::vector<double>> v(r.size(), std::vector<double>(t.size()));
  for (std::size_t i = 0; i < r.size(); ++i) {
    for (std::size_t j = 0; j < t.size(); ++j) v[i][j] = r[i] * std::pow(0.25, t[j]);
  }
  return KLFn::sampled(r, t, v);
}

}  // namespace

TEST(Separable, Evaluates) {
  const auto b = KLFn::separable(KInfFn::power(2), 0.5, KInfFn::linear(2));
  EXPECT_DOUBLE_EQ(b(3.0, 0.0), 36.0);
  EXPECT_DOUBLE_EQ(b(3.0, 1.0), 9.0);
}

TEST(Separable, ThetaOutsideUnitIntervalRejected) {
  EXPECT_THROW(KLFn::separable(KInfFn::identity(), 1.0, KInfFn::identity()), Error);
  EXPECT_THROW(KLFn::separable(KInfFn::identity(), 0.0, KInfFn::identity()), Error);
}

TEST(Sampled, ExactAtKnotsAndBilinearBetween) {
  const auto b = KLFn::sampled({1, 2}, {0, 1}, {{1, 0.5}, {2, 1}});
  EXPECT_EQ(b(2.0, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(b(1.5, 0.5), 1.125);
  EXPECT_DOUBLE_EQ(b(0.5, 0.0), 0.5);
  EXPECT_DOUBLE_EQ(b(4.0, 0.0), 4.0);  // proportional beyond the last r
}

TEST(Sampled, TailDecaysGeometrically) {
  const auto b = KLFn::sampled({1, 2}, {0, 1}, {{1, 0.5}, {2, 0.8}});
  EXPECT_DOUBLE_EQ(b.as_sampled()->tail_ratio(), 0.5);
  EXPECT_DOUBLE_EQ(b(1.0, 3.0), 0.5 * 0.25);
  EXPECT_LT(b(2.0, 50.0), 1e-12);
}

TEST(Sampled, RejectsNonMonotoneData) {
  EXPECT_THROW(KLFn::sampled({1, 2}, {0, 1}, {{1, 0.5}, {0.9, 0.4}}), Error);
  EXPECT_THROW(KLFn::sampled({1, 2}, {0, 1}, {{1, 1}, {2, 1}}), Error);
  EXPECT_THROW(KLFn::sampled({1, 2}, {1, 2}, {{1, 0.5}, {2, 1}}), Error);
}

TEST(Checks, SeparableIsKL) {
  const auto b = KLFn::separable(KInfFn::identity(), 0.5, KInfFn::identity());
  const ValidationGrid g;
  EXPECT_TRUE(check_kl(b, g.r, integer_grid(g.t_max), 1e-6).ok());
}

TEST(Decompose, SeparableSameThetaUnchanged) {
  const auto id = KInfFn::identity();
  const auto d = kl_decompose(KLFn::separable(id, 0.5, id), 0.5);
  EXPECT_EQ(d.gamma1.node(), id.node());
  EXPECT_EQ(d.gamma2.node(), id.node());
}

TEST(Decompose, SeparableLinearInnerReturned) {
  const auto l2 = KInfFn::linear(2);
  const auto id = KInfFn::identity();
  const auto d = kl_decompose(KLFn::separable(id, 0.5, l2), 0.5);
  EXPECT_EQ(d.gamma1.node(), l2.node());
  EXPECT_EQ(d.gamma2.node(), id.node());
}

TEST(Decompose, SampledQuarterDominated) {
  const auto beta = sampled_quarter();
  ValidationGrid g;
  g.r = log_grid(1e-3, 10.0, 40);
  g.t_max = 20;
  const auto d = kl_decompose(beta, 0.5, g);
  EXPECT_GE(decomposition_margin(beta, d, g), -1e-9);
  // the identity pair also works, confirming the data itself
  const KLDecomposition trivial{KInfFn::identity(), KInfFn::identity(), 0.5};
  EXPECT_GE(decomposition_margin(beta, trivial, g), 0.0);
}

TEST(Decompose, SeparableDifferentThetaUsesEnvelope) {
  const auto beta =
      KLFn::separable(KInfFn::power(2), 0.3, KInfFn::linear(3));
  const ValidationGrid g;
  const auto d = kl_decompose(beta, 0.7, g);
  EXPECT_GE(decomposition_margin(beta, d, g), -1e-9);
}

TEST(Decompose, RandomSeparableDominated) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> th(0.1, 0.9), p(0.5, 2.0);
  const ValidationGrid g;
  for (int i = 0; i < 10; ++i) {
    const auto beta = KLFn::separable(KInfFn::power(p(rng)), th(rng),
                                      KInfFn::linear(p(rng)));
    const auto d = kl_decompose(beta, 0.5, g);
    EXPECT_GE(decomposition_margin(beta, d, g), -1e-9);
  }
}

TEST(Algebra, ScaleKeepsSeparable) {
  const auto b = scale(3.0, KLFn::separable(KInfFn::identity(), 0.5, KInfFn::identity()));
  ASSERT_NE(b.as_separable(), nullptr);
  EXPECT_DOUBLE_EQ(b(2.0, 1.0), 3.0);
}

TEST(Algebra, SumIsWeighted) {
  const auto a = KLFn::separable(KInfFn::identity(), 0.5, KInfFn::identity());
  const auto b = a + a;
  ASSERT_NE(b.as_weighted(), nullptr);
  EXPECT_DOUBLE_EQ(b(2.0, 1.0), 2.0);
}
