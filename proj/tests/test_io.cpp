#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "stagecraft/stagecraft.hpp"
#include "tree_gen.hpp"

using namespace stagecraft;

TEST(TreeJson, SchemaShape) {
  const auto j = to_json(compose(KInfFn::power(2), KInfFn::linear(3)));
  EXPECT_EQ(j.at("op"), "compose");
  EXPECT_EQ(j.at("outer").at("op"), "power");
  EXPECT_EQ(j.at("outer").at("p"), 2.0);
  EXPECT_EQ(j.at("inner").at("c"), 3.0);
}

TEST(TreeJson, RandomTreesRoundTrip) {
  std::mt19937_64 rng(11);
  const auto grid = log_grid(1e-4, 1e4, 64);
  for (int i = 0; i < 200; ++i) {
    const auto f = testing_support::random_tree(rng, 5);
    const auto text = to_json(f).dump();
    const auto g = kinf_from_json(json::parse(text));
    for (double r : grid) EXPECT_NEAR(g(r), f(r), 1e-12 * std::max(1.0, std::abs(f(r))));
  }
}

TEST(TreeJson, NonnegKeepsFlags) {
  const auto z = nonneg_from_json(to_json(NonnegFn::zero()));
  EXPECT_FALSE(z.is_kinf());
  EXPECT_EQ(z(5.0), 0.0);
  const auto t = NonnegFn::table({1, 2}, {1, 1}, true);
  const auto u = nonneg_from_json(to_json(t));
  EXPECT_TRUE(u.positive_definite());
  EXPECT_DOUBLE_EQ(u(1.5), 1.0);
}

TEST(TreeJson, MalformedRejected) {
  EXPECT_THROW(kinf_from_json(json{{"op", "cube"}}), Error);
  EXPECT_THROW(kinf_from_json(json{{"op", "power"}}), Error);
  EXPECT_THROW(kinf_from_json(json{{"op", "linear"}, {"c", -1.0}}), Error);
  EXPECT_THROW(kinf_from_json(json{{"op", "zero"}}), Error);
  EXPECT_THROW(kinf_from_json(json{{"op", "table"}, {"x", {1, 2}}, {"y", {2, 1}}}), Error);
}

TEST(KLJson, RoundTripEachKind) {
  const auto sep = KLFn::separable(KInfFn::power(2), 0.3, KInfFn::linear(2));
  const auto smp = KLFn::sampled({1, 2}, {0, 1, 2}, {{1, 0.5, 0.2}, {2, 1, 0.5}});
  const auto wtd = KLFn::weighted({{2.0, sep}, {0.5, smp}});
  for (const auto& b : {sep, smp, wtd}) {
    const auto c = kl_from_json(json::parse(to_json(b).dump()));
    for (double r : {0.0, 0.3, 1.5, 7.0}) {
      for (double t : {0.0, 0.5, 1.0, 4.0}) {
        EXPECT_NEAR(c(r, t), b(r, t), 1e-12 * std::max(1.0, b(r, t)));
      }
    }
  }
  EXPECT_THROW(kl_from_json(json{{"kind", "other"}}), Error);
}

TEST(Csv, NumberFormat) {
  EXPECT_EQ(csv_number(0.1), "0.10000000000000001");
  EXPECT_EQ(csv_number(2.0), "2");
  EXPECT_EQ(csv_number(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(std::stod(csv_number(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(Csv, FieldQuoting) {
  EXPECT_EQ(csv_field("plain"), "plain");
  EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
}

TEST(Csv, ReportColumns) {
  const auto bc = builtin_scalar_linear();
  const std::vector<State> xs{State{1.0}};
  const auto rep = verify(bc.cert, bc.sys, xs, 2);
  std::ostringstream os;
  write_csv(os, rep);
  const std::string s = os.str();
  EXPECT_EQ(s.substr(0, s.find("\r\n")), "sample,inequality,n,lhs,rhs,margin");
  EXPECT_NE(s.find("0,state,1,0.5,0.5,0\r\n"), std::string::npos);
}

TEST(Csv, TrajectoryColumns) {
  const auto sys = scalar_linear();
  const StageCost ell{KInfFn::identity(), NonnegFn::zero(), {}};
  const auto tr = rollout(sys, State{1.0}, ControlSequence::zeros(Input{0.0}), 2);
  std::ostringstream os;
  write_csv(os, sys, ell, tr);
  EXPECT_EQ(os.str(),
            "n,sigma,rho,stage_cost,cumulative_cost\r\n0,1,0,1,1\r\n1,0.5,0,0.5,1.5\r\n");
}

TEST(Csv, ValueTable) {
  const auto fs = finite_chain(3);
  const auto vt = value_iterate(fs, StageCost{KInfFn::identity(), NonnegFn::zero(), {}});
  std::ostringstream os;
  write_csv(os, fs, vt);
  EXPECT_EQ(os.str(), "state,sigma,V,policy\r\n0,0,0,0\r\n1,1,1,1\r\n2,2,3,1\r\n");
}

TEST(ResultJson, SynthesisFields) {
  const auto bc = builtin_scalar_linear();
  const auto res = synthesize(uvc_to_ubgec(bc.cert));
  const auto j = to_json(res);
  EXPECT_DOUBLE_EQ(kinf_from_json(j.at("alpha_bar"))(2.0), res.alpha_bar(2.0));
  EXPECT_EQ(j.at("provenance").at("theta"), 0.5);
  EXPECT_FALSE(j.at("stage_cost").at("interaction").get<bool>());
}

TEST(FiniteJson, RoundTripAndValidation) {
  const auto fs = finite_grid(5);
  const auto back = finite_from_json(to_json(fs));
  EXPECT_EQ(back.next, fs.next);
  auto bad = to_json(fs);
  bad["sigma"] = {1, 1, 1, 1, 1};
  EXPECT_THROW(finite_from_json(bad), Error);
}

TEST(Config, BuiltinAndSamples) {
  const auto cfg = load_experiment(json::parse(R"({
    "system": {"builtin": "scalar_linear", "a": 2.0, "b": 1.0},
    "samples": {"count": 5, "lo": 0.1, "hi": 10}
  })"));
  EXPECT_EQ(cfg.sys.transition(State{1.0}, Input{0.0})[0], 2.0);
  const auto xs = experiment_samples(cfg);
  ASSERT_EQ(xs.size(), 5u);
  EXPECT_NEAR(std::abs(xs.back()[0]), 10.0, 1e-12);
}

TEST(Config, SeedOverrideChangesDirections) {
  const auto j = json::parse(R"({"system": {"builtin": "double_integrator"}})");
  const auto a = experiment_samples(load_experiment(j, 1));
  const auto b = experiment_samples(load_experiment(j, 2));
  const auto c = experiment_samples(load_experiment(j, 1));
  EXPECT_NE(a, b);
  EXPECT_EQ(a, c);
}

TEST(Config, FiniteSystemsAndOracle) {
  const auto cfg = load_experiment(json::parse(R"({"system": {"finite": "chain", "n": 4}})"));
  EXPECT_EQ(experiment_samples(cfg).size(), 4u);
  const auto run = run_oracle(cfg);
  EXPECT_DOUBLE_EQ(run.vt.V[3], 4.0 + 3.0 + 2.0);
}

TEST(Config, ErrorsAreConfigKind) {
  auto kind = [](const char* text) {
    try {
      const auto cfg = load_experiment(json::parse(text));
      experiment_certificate(cfg);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::budget;
  };
  EXPECT_EQ(kind(R"({})"), ErrorKind::config);
  EXPECT_EQ(kind(R"({"system": {"builtin": "pendulum"}})"), ErrorKind::config);
  EXPECT_EQ(kind(R"({"system": {"finite": "ring"}})"), ErrorKind::config);
  EXPECT_EQ(kind(R"({"system": {"builtin": "scalar_linear"},
                     "certificate": {"type": "magic"}})"),
            ErrorKind::config);
}

TEST(Config, ConverseSection) {
  const auto cfg = load_experiment(json::parse(R"({
    "system": {"builtin": "scalar_linear"}, "horizon": 50,
    "converse": {"depth": 8, "schedule": "geometric", "R_grid": {"lo": 0.1, "hi": 10, "n": 3}}
  })"));
  const auto cc = converse_config(cfg);
  EXPECT_EQ(cc.depth, 8u);
  EXPECT_EQ(cc.schedule, EpsSchedule::geometric);
  EXPECT_EQ(cc.horizon, 50u);
  EXPECT_EQ(cc.R_grid.size(), 3u);
}
