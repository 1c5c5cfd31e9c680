#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fairgame/environments.hpp"
#include "fairgame/markov_game.hpp"
#include "fairgame/verify.hpp"

using namespace fairgame;

namespace {

TabularMarkovGame single_state(std::vector<std::size_t> actions, std::vector<double> rewards, double gamma) {
  std::size_t joint = 1;
  for (auto a : actions) joint *= a;
  return TabularMarkovGame(std::move(actions), 1, std::vector<double>(joint, 1.0), std::move(rewards), {1.0}, gamma);
}

SoftmaxPolicyProfile with_logits(std::vector<Eigen::MatrixXd> m) { return SoftmaxPolicyProfile(std::move(m)); }

}  // namespace

TEST(TabularMarkovGame, Validation) {
  EXPECT_THROW(TabularMarkovGame({2}, 1, {1.0, 0.9}, {1, 1}, {1.0}, 0.9), DomainError);  // row sum
  EXPECT_THROW(TabularMarkovGame({2}, 1, {1.0, 1.0}, {1, 0}, {1.0}, 0.9), DomainError);  // reward not > 0
  EXPECT_THROW(TabularMarkovGame({2}, 1, {1.0, 1.0}, {1, 1}, {1.0}, 1.0), DomainError);  // gamma
  EXPECT_THROW(TabularMarkovGame({2}, 1, {1.0, 1.0}, {1, 1}, {0.5}, 0.9), DomainError);  // rho0
  EXPECT_THROW(TabularMarkovGame({2}, 1, {1.0}, {1, 1}, {1.0}, 0.9), ShapeError);
}

TEST(TabularMarkovGame, JointEncoding) {
  const auto g = single_state({2, 3}, std::vector<double>(12, 1.0), 0.5);
  EXPECT_EQ(g.num_joint_actions(), 6u);
  EXPECT_EQ(g.decode_joint(4), (std::vector<std::size_t>{1, 1}));
  const std::vector<std::size_t> a{1, 2};
  EXPECT_EQ(g.encode_joint(a), 5u);
}

TEST(SoftmaxPolicy, RowsSumToOne) {
  std::mt19937_64 rng(1);
  const auto g = random_small_game(rng, 0.9);
  const auto p = random_policies(g, rng, 5.0);
  for (std::size_t i = 0; i < g.num_agents(); ++i) {
    for (std::size_t s = 0; s < g.num_states(); ++s) EXPECT_NEAR(p.probabilities(i, s).sum(), 1.0, 1e-12);
  }
}

TEST(SoftmaxPolicy, SaturatedLogitsStayFinite) {
  Eigen::MatrixXd m(1, 2);
  m << 0.0, 1e4;
  const auto p = with_logits({m});
  EXPECT_EQ(p.probability(0, 0, 1), 1.0);
  EXPECT_GE(p.probability(0, 0, 0), 0.0);
}

TEST(JointPolicyProb, Examples) {
  const auto uniform = SoftmaxPolicyProfile::uniform(1, std::vector<std::size_t>{2, 2});
  for (std::size_t a = 0; a < 2; ++a) {
    for (std::size_t b = 0; b < 2; ++b) {
      const std::vector<std::size_t> joint{a, b};
      EXPECT_DOUBLE_EQ(joint_policy_prob(uniform, 0, joint), 0.25);
    }
  }
  Eigen::MatrixXd skew(1, 2);
  skew << 0.0, std::log(3.0);
  const auto single = with_logits({skew});
  EXPECT_NEAR(joint_policy_prob(single, 0, std::vector<std::size_t>{1}), 0.75, 1e-15);
  const auto pair = with_logits({skew, Eigen::MatrixXd::Zero(1, 2)});
  EXPECT_NEAR(joint_policy_prob(pair, 0, std::vector<std::size_t>{0, 0}), 0.125, 1e-15);
  EXPECT_NEAR(joint_policy_prob(pair, 0, std::vector<std::size_t>{1, 1}), 0.375, 1e-15);
}

TEST(Bellman, ZeroInputGivesExpectedReward) {
  std::mt19937_64 rng(2);
  const auto g = random_small_game(rng, 0.8);
  const auto p = random_policies(g, rng);
  const auto avg = policy_averages(g, p);
  std::vector<Eigen::VectorXd> zero(g.num_agents(), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.num_states())));
  const auto out = bellman_apply(g, p, zero);
  for (std::size_t i = 0; i < g.num_agents(); ++i) EXPECT_LT((out[i] - avg.reward[i]).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Bellman, GeometricFixedPoint) {
  const auto g = single_state({1}, {1.0}, 0.9);
  const auto p = SoftmaxPolicyProfile::uniform(g);
  const auto out = bellman_apply(g, p, {Eigen::VectorXd::Constant(1, 10.0)});
  EXPECT_NEAR(out[0][0], 10.0, 1e-14);
}

TEST(Bellman, ShapeMismatchThrows) {
  const auto g = single_state({1}, {1.0}, 0.9);
  const auto p = SoftmaxPolicyProfile::uniform(g);
  EXPECT_THROW(bellman_apply(g, p, {Eigen::VectorXd::Zero(2)}), ShapeError);
}

TEST(SolveValues, SingleState) {
  const auto v = solve_values(single_state({1}, {1.0}, 0.9), SoftmaxPolicyProfile::uniform(1, std::vector<std::size_t>{1}));
  EXPECT_NEAR(v.value(0, 0), 10.0, 1e-12);
}

TEST(SolveValues, TwoAbsorbingStates) {
  // Self-loops with rewards 1 and 2, gamma 0.5.
  TabularMarkovGame g({1}, 2, {1.0, 0.0, 0.0, 1.0}, {1.0, 2.0}, {0.5, 0.5}, 0.5);
  const auto v = solve_values(g, SoftmaxPolicyProfile::uniform(g));
  EXPECT_NEAR(v.value(0, 0), 2.0, 1e-12);
  EXPECT_NEAR(v.value(0, 1), 4.0, 1e-12);
}

TEST(SolveValues, BundleInvariants) {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 20; ++k) {
    const auto g = random_small_game(rng, 0.9);
    const auto p = random_policies(g, rng);
    const auto v = solve_values(g, p);
    for (std::size_t i = 0; i < g.num_agents(); ++i) {
      for (std::size_t s = 0; s < g.num_states(); ++s) {
        const Eigen::VectorXd pi = joint_action_distribution(g, p, s);
        double q = 0.0;
        double adv = 0.0;
        for (std::size_t a = 0; a < g.num_joint_actions(); ++a) {
          q += pi[static_cast<Eigen::Index>(a)] * v.action_values[i](static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a));
          adv += pi[static_cast<Eigen::Index>(a)] * v.advantage(i, s, a);
        }
        EXPECT_NEAR(q, v.value(i, s), 1e-9);
        EXPECT_NEAR(adv, 0.0, 1e-9);
        EXPECT_GT(v.value(i, s), 0.0);
        EXPECT_LE(v.value(i, s), g.max_reward() / (1.0 - g.discount()) * (1 + 1e-12));
      }
    }
  }
}

TEST(SolveValues, MatchesMonteCarloReturns) {
  const auto g = random_markov_game(2, 4, {2, 2}, 0.5, 31);
  std::mt19937_64 rng(32);
  const auto p = random_policies(g, rng);
  const auto v = solve_values(g, p);
  const std::size_t horizon = default_truncation_horizon(g, 1e-8);
  const std::size_t samples = 1000000;
  std::vector<double> sum(2, 0.0), sum_sq(2, 0.0);
  std::mt19937_64 sim(33);
  for (std::size_t k = 0; k < samples; ++k) {
    std::size_t s = detail::sample_index(std::span<const double>(g.initial_dist()), sim);
    std::vector<double> ret(2, 0.0);
    double discount = 1.0;
    for (std::size_t t = 0; t < horizon; ++t) {
      std::vector<std::size_t> a(2);
      for (std::size_t i = 0; i < 2; ++i) a[i] = detail::sample_index(p.probabilities(i, s), sim);
      const auto joint = g.encode_joint(a);
      for (std::size_t i = 0; i < 2; ++i) ret[i] += discount * g.reward(i, s, joint);
      discount *= g.discount();
      s = detail::sample_index(g.transition_row(s, joint), sim);
    }
    for (std::size_t i = 0; i < 2; ++i) {
      sum[i] += ret[i];
      sum_sq[i] += ret[i] * ret[i];
    }
  }
  for (std::size_t i = 0; i < 2; ++i) {
    double expected = 0.0;
    for (std::size_t s = 0; s < 4; ++s) expected += g.initial_dist()[s] * v.value(i, s);
    const double mean = sum[i] / samples;
    const double se = std::sqrt((sum_sq[i] / samples - mean * mean) / samples);
    EXPECT_LT(std::abs(mean - expected), 3.0 * se);
  }
}

TEST(Bellman, IterationApproachesSolve) {
  std::mt19937_64 rng(4);
  const auto g = random_small_game(rng, 0.8);
  const auto p = random_policies(g, rng);
  const auto exact = solve_values(g, p);
  std::vector<Eigen::VectorXd> v(g.num_agents(), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.num_states())));
  const double bound0 = g.max_reward() / (1.0 - g.discount());
  double gk = 1.0;
  for (int k = 1; k <= 60; ++k) {
    v = bellman_apply(g, p, v);
    gk *= g.discount();
    for (std::size_t i = 0; i < g.num_agents(); ++i) {
      EXPECT_LE((v[i] - exact.state_values[i]).cwiseAbs().maxCoeff(), gk * bound0 + 1e-12);
    }
  }
}

TEST(FairObjective, Examples) {
  // Two agents, constant reward 1, gamma 0.9: V = 10 for both.
  const auto g = single_state({2, 2}, std::vector<double>(8, 1.0), 0.9);
  const auto p = SoftmaxPolicyProfile::uniform(g);
  const auto j1 = fair_objective(g, p, AltruismWeights(1.0));
  EXPECT_NEAR(j1.per_agent[0], 2.0 * std::log(10.0), 1e-12);
  EXPECT_NEAR(j1.per_agent[0], 4.60517, 1e-5);
  EXPECT_EQ(j1.per_agent[0], j1.per_agent[1]);
  EXPECT_NEAR(j1.proportional_fair_value[0], 2.0 * std::log(10.0), 1e-12);
  const auto j0 = fair_objective(g, p, AltruismWeights(0.0));
  EXPECT_NEAR(j0.per_agent[0], std::log(10.0), 1e-12);
}

TEST(FairObjective, AlphaZeroIgnoresOthers) {
  std::mt19937_64 rng(5);
  const auto g = random_markov_game(2, 3, {2, 2}, 0.8, 6);
  const auto p = random_policies(g, rng);
  const auto v = solve_values(g, p);
  const auto j = fair_objective(g, v, AltruismWeights(0.0));
  double expected = 0.0;
  for (std::size_t s = 0; s < 3; ++s) expected += g.initial_dist()[s] * std::log(v.value(1, s));
  EXPECT_NEAR(j.per_agent[1], expected, 1e-12);
}

TEST(AltruismWeights, Coefficients) {
  const AltruismWeights w(0.3);
  EXPECT_EQ(w.coefficient(1, 1), 1.0);
  EXPECT_EQ(w.coefficient(0, 2), 0.3);
  EXPECT_THROW(AltruismWeights(1.5), DomainError);
}

TEST(ExactGradient, MatchesFiniteDifferences) {
  std::mt19937_64 rng(7);
  for (int k = 0; k < 50; ++k) {
    const auto g = random_small_game(rng, 0.85);
    const auto p = random_policies(g, rng);
    const AltruismWeights w(std::uniform_real_distribution<double>(0, 1)(rng));
    const auto exact = exact_fair_gradient(g, p, w);
    for (std::size_t i = 0; i < g.num_agents(); ++i) {
      double worst = 0.0;
      EXPECT_TRUE(gradients_agree(exact.per_agent[i], finite_difference_gradient(g, p, w, i, i), 1e-4, 1e-8, &worst))
          << "relative error " << worst;
    }
  }
}

TEST(ExactGradient, ConstantRewardGivesZero) {
  const auto g = random_markov_game(2, 3, {2, 3}, 0.9, 8);
  std::vector<double> rewards(g.rewards().size(), 0.5);
  TabularMarkovGame flat(g.action_counts(), g.num_states(), g.transitions(), rewards, g.initial_dist(), g.discount());
  std::mt19937_64 rng(9);
  const auto grad = exact_fair_gradient(flat, random_policies(flat, rng), AltruismWeights(0.7));
  for (const auto& m : grad.per_agent) EXPECT_LT(m.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ExactGradient, FullAltruismSymmetric) {
  std::mt19937_64 rng(10);
  const auto g = random_small_game(rng, 0.9);
  const auto p = random_policies(g, rng);
  const AltruismWeights w(1.0);
  const auto base = objective_gradient(g, p, w, 0);
  for (std::size_t k = 1; k < g.num_agents(); ++k) {
    const auto other = objective_gradient(g, p, w, k);
    for (std::size_t i = 0; i < g.num_agents(); ++i) EXPECT_TRUE((base.per_agent[i].array() == other.per_agent[i].array()).all());
  }
}

TEST(ExactGradient, OperatorContracts) {
  std::mt19937_64 rng(11);
  const auto g = random_small_game(rng, 0.75);
  const auto p = random_policies(g, rng);
  const auto avg = policy_averages(g, p);
  const auto v = solve_values(g, p);
  const auto src = gradient_source(g, p, v, avg, 0, 0);
  std::normal_distribution<double> n(0, 1);
  for (int k = 0; k < 20; ++k) {
    Eigen::MatrixXd a(src.rows(), src.cols()), b(src.rows(), src.cols());
    for (Eigen::Index c = 0; c < a.size(); ++c) {
      a.data()[c] = n(rng);
      b.data()[c] = n(rng);
    }
    const double before = (a - b).cwiseAbs().maxCoeff();
    const double after = (gradient_operator_apply(g, avg, src, a) - gradient_operator_apply(g, avg, src, b)).cwiseAbs().maxCoeff();
    EXPECT_LE(after, g.discount() * before + 1e-12);
  }
  // The solve is the operator's fixed point.
  const auto fixed = value_gradient(g, p, v, 0, 0);
  EXPECT_LT((gradient_operator_apply(g, avg, src, fixed) - fixed).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(FairAdvantage, Examples) {
  ValueBundle v;
  v.state_values = {Eigen::VectorXd::Constant(1, 10.0), Eigen::VectorXd::Constant(1, 4.0)};
  v.action_values = {Eigen::MatrixXd::Constant(1, 1, 11.0), Eigen::MatrixXd::Constant(1, 1, 2.0)};
  v.advantages = {Eigen::MatrixXd::Constant(1, 1, 1.0), Eigen::MatrixXd::Constant(1, 1, -2.0)};
  EXPECT_NEAR(fair_advantage(v, AltruismWeights(1.0), 0, 0, 0, 0), -0.4, 1e-15);
  EXPECT_NEAR(fair_advantage(v, AltruismWeights(0.0), 0, 0, 0, 0), 0.1, 1e-15);
  v.advantages = {Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Zero(1, 1)};
  EXPECT_EQ(fair_advantage(v, AltruismWeights(0.5), 1, 0, 0, 0), 0.0);
}

TEST(FairAdvantage, FloorCounted) {
  ValueBundle v;
  v.state_values = {Eigen::VectorXd::Constant(1, -1.0)};
  v.action_values = {Eigen::MatrixXd::Constant(1, 1, 0.0)};
  v.advantages = {Eigen::MatrixXd::Constant(1, 1, 1.0)};
  std::size_t hits = 0;
  EXPECT_NEAR(fair_advantage(v, AltruismWeights(0.0), 0, 0, 0, 0, 1e-3, &hits), 1000.0, 1e-9);
  EXPECT_EQ(hits, 1u);
}

TEST(MonteCarloGradient, GammaZeroSingleStep) {
  // gamma = 0: one step, estimator is E[score * sum_j c r_j / V_j].
  const auto g = random_markov_game(2, 2, {2, 2}, 0.0, 12);
  std::mt19937_64 rng(13);
  const auto p = random_policies(g, rng);
  EXPECT_EQ(default_truncation_horizon(g), 1u);
  const auto mc = mc_fair_gradient(g, p, AltruismWeights(0.5), 100000, 1, 14);
  const auto exact = exact_fair_gradient(g, p, AltruismWeights(0.5));
  for (std::size_t i = 0; i < 2; ++i) {
    for (Eigen::Index c = 0; c < exact.per_agent[i].size(); ++c) {
      EXPECT_LT(std::abs(mc.estimate.per_agent[i].data()[c] - exact.per_agent[i].data()[c]),
                3.0 * mc.standard_error.per_agent[i].data()[c] + 1e-12);
    }
  }
}

TEST(MonteCarloGradient, ConsistentWithExact) {
  const auto g = random_markov_game(2, 3, {2, 2}, 0.6, 25);
  std::mt19937_64 rng(26);
  const auto p = random_policies(g, rng);
  const AltruismWeights w(0.4);
  const auto exact = exact_fair_gradient(g, p, w);
  const auto mc = mc_fair_gradient(g, p, w, 100000, default_truncation_horizon(g, 1e-8), 27);
  for (std::size_t i = 0; i < 2; ++i) {
    for (Eigen::Index c = 0; c < exact.per_agent[i].size(); ++c) {
      EXPECT_LT(std::abs(mc.estimate.per_agent[i].data()[c] - exact.per_agent[i].data()[c]),
                3.0 * mc.standard_error.per_agent[i].data()[c] + 1e-9);
    }
  }
}

TEST(MonteCarloGradient, Reproducible) {
  const auto g = random_markov_game(2, 2, {2, 2}, 0.6, 15);
  const auto p = SoftmaxPolicyProfile::uniform(g);
  const auto a = mc_fair_gradient(g, p, AltruismWeights(0.2), 2000, 20, 16);
  const auto b = mc_fair_gradient(g, p, AltruismWeights(0.2), 2000, 20, 16);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_TRUE((a.estimate.per_agent[i].array() == b.estimate.per_agent[i].array()).all());
}

TEST(MonteCarloGradient, ZeroRolloutsThrows) {
  const auto g = random_markov_game(1, 1, {2}, 0.5, 17);
  EXPECT_THROW(mc_fair_gradient(g, SoftmaxPolicyProfile::uniform(g), AltruismWeights(0.0), 0, 5, 1), DomainError);
}

TEST(MonteCarloGradient, SaturatedPolicyHasNoVariance) {
  const auto g = random_markov_game(1, 1, {2}, 0.5, 18);
  Eigen::MatrixXd m(1, 2);
  m << 60.0, 0.0;
  const auto mc = mc_fair_gradient(g, with_logits({m}), AltruismWeights(0.0), 1000, 10, 19);
  EXPECT_LT(mc.estimate.per_agent[0].cwiseAbs().maxCoeff(), 1e-20);
  EXPECT_LT(mc.standard_error.per_agent[0].cwiseAbs().maxCoeff(), 1e-20);
}

TEST(BaselineZero, ExactIsZeroTensor) {
  const auto g = random_markov_game(2, 3, {2, 3}, 0.9, 20);
  std::mt19937_64 rng(21);
  const auto check = baseline_zero_check(g, random_policies(g, rng), [](std::size_t s) { return 1.0 + s; }, 20000, 22);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_TRUE((check.exact.per_agent[i].array() == 0.0).all());
    for (Eigen::Index c = 0; c < check.mc_mean.per_agent[i].size(); ++c) {
      EXPECT_LT(std::abs(check.mc_mean.per_agent[i].data()[c]), 3.0 * check.mc_standard_error.per_agent[i].data()[c]);
    }
  }
}

TEST(BaselineZero, ZeroBaselineIsIdenticallyZero) {
  const auto g = random_markov_game(2, 2, {2, 2}, 0.9, 23);
  const auto check = baseline_zero_check(g, SoftmaxPolicyProfile::uniform(g), [](std::size_t) { return 0.0; }, 1000, 24);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_TRUE((check.mc_mean.per_agent[i].array() == 0.0).all());
    EXPECT_TRUE((check.mc_standard_error.per_agent[i].array() == 0.0).all());
  }
}
