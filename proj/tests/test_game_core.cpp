#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fairgame/game_core.hpp"
#include "fairgame/verify.hpp"

using namespace fairgame;

namespace {

constexpr std::size_t CC = 0, CD = 1, DC = 2, DD = 3;

const DilemmaPayoffs kPD{5, 3, 1, 2};
const DilemmaPayoffs kStag{3, 4, 1, 2};
const DilemmaPayoffs kChicken{7, 5, 2, 1};

}  // namespace

TEST(NormalFormGame, RejectsWrongTensorSize) {
  EXPECT_THROW(NormalFormGame({2, 2}, std::vector<double>(7, 1.0)), ShapeError);
}

TEST(NormalFormGame, RejectsNonFinitePayoffs) {
  EXPECT_THROW(NormalFormGame({1}, {std::nan("")}), DomainError);
  EXPECT_THROW(NormalFormGame({1}, {INFINITY}), DomainError);
}

TEST(NormalFormGame, EncodeDecodeRoundTrip) {
  NormalFormGame g({2, 3, 2}, std::vector<double>(12 * 3, 1.0));
  for (std::size_t k = 0; k < g.num_profiles(); ++k) {
    const auto s = g.decode(k);
    EXPECT_EQ(g.encode(s), k);
  }
  EXPECT_EQ(g.decode(1), (std::vector<std::size_t>{0, 0, 1}));  // last player least significant
}

TEST(Classify, CanonicalExamples) {
  EXPECT_EQ(classify_social_dilemma(kPD).kind, DilemmaKind::PrisonersDilemma);
  EXPECT_EQ(classify_social_dilemma(kStag).kind, DilemmaKind::StagHunt);
  EXPECT_EQ(classify_social_dilemma(kChicken).kind, DilemmaKind::Chicken);
  const auto flat = classify_social_dilemma({1, 1, 1, 1});
  EXPECT_EQ(flat.kind, DilemmaKind::NotADilemma);
  EXPECT_FALSE(flat.reward_over_punishment);
}

TEST(Classify, ReportsEachInequality) {
  const auto c = classify_social_dilemma({10, 3, 1, 2});  // 2R < T+S
  EXPECT_TRUE(c.reward_over_punishment);
  EXPECT_TRUE(c.reward_over_sucker);
  EXPECT_FALSE(c.cooperation_over_exploit);
  EXPECT_TRUE(c.greed_or_fear);
  EXPECT_FALSE(c.is_dilemma());
}

TEST(Classify, NonPositivePayoffThrows) {
  EXPECT_THROW(classify_social_dilemma({5, 3, 0, 2}), DomainError);
  EXPECT_THROW(classify_social_dilemma({5, -3, 1, 2}), DomainError);
}

TEST(AltruisticExtension, AllEqualToE) {
  NormalFormGame g({2, 2}, std::vector<double>(8, std::exp(1.0)));
  const auto t = altruistic_extension(g, 0.5);
  for (double v : t.payoffs()) EXPECT_NEAR(v, 1.5, 1e-15);
}

TEST(AltruisticExtension, AlphaZeroIsLog) {
  const auto g = make_dilemma_game(kPD);
  const auto t = altruistic_extension(g, 0.0);
  for (std::size_t k = 0; k < g.payoffs().size(); ++k) EXPECT_EQ(t.payoffs()[k], std::log(g.payoffs()[k]));
}

TEST(AltruisticExtension, PdFullAltruismAtCC) {
  const auto t = altruistic_extension(make_dilemma_game(kPD), 1.0);
  EXPECT_NEAR(t.payoff(CC, 0), 2.0 * std::log(3.0), 1e-12);
  EXPECT_NEAR(t.payoff(CC, 0), 2.1972, 1e-4);
}

TEST(AltruisticExtension, MatchesExpandedForm) {
  // u_i = log p_i + alpha * sum_{j != i} log p_j
  const auto g = make_dilemma_game(kChicken);
  const auto t = altruistic_extension(g, 0.3);
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_NEAR(t.payoff(k, 0), std::log(g.payoff(k, 0)) + 0.3 * std::log(g.payoff(k, 1)), 1e-12);
  }
}

TEST(AltruisticExtension, DomainErrors) {
  const auto g = make_dilemma_game(kPD);
  EXPECT_THROW(altruistic_extension(g, -0.1), DomainError);
  EXPECT_THROW(altruistic_extension(g, 1.1), DomainError);
  EXPECT_THROW(altruistic_extension(NormalFormGame({1}, {0.0}), 0.5), DomainError);
}

TEST(ShiftPayoffs, MakesStrictlyPositive) {
  NormalFormGame g({2}, {-3.0, 1.0});
  const auto s = shift_payoffs(g, 0.5);
  EXPECT_DOUBLE_EQ(s.payoffs()[0], 0.5);
  EXPECT_DOUBLE_EQ(s.payoffs()[1], 4.5);
  EXPECT_EQ(find_pure_nash(g), find_pure_nash(s));
}

TEST(PureNash, PrisonersDilemma) { EXPECT_EQ(find_pure_nash(make_dilemma_game(kPD)), (std::vector<std::size_t>{DD})); }

TEST(PureNash, StagHuntHasTwo) {
  EXPECT_EQ(find_pure_nash(make_dilemma_game(kStag)), (std::vector<std::size_t>{CC, DD}));
}

TEST(PureNash, SingletonGame) { EXPECT_EQ(find_pure_nash(NormalFormGame({1}, {2.0})), (std::vector<std::size_t>{0})); }

TEST(PureNash, WeakInequality) {
  // Player indifferent everywhere: every profile is an equilibrium.
  NormalFormGame g({2, 2}, std::vector<double>(8, 1.0));
  EXPECT_EQ(find_pure_nash(g).size(), 4u);
}

TEST(SocialOptima, Examples) {
  EXPECT_EQ(social_optima(make_dilemma_game({5, 4, 1, 2})), (std::vector<std::size_t>{CC}));
  EXPECT_EQ(social_optima(make_dilemma_game(kChicken)), (std::vector<std::size_t>{CC}));
  EXPECT_EQ(social_optima(NormalFormGame({2, 2}, std::vector<double>(8, 1.0))).size(), 4u);
  // 2R = T + S: three profiles tie.
  EXPECT_EQ(social_optima(make_dilemma_game(kPD)), (std::vector<std::size_t>{CC, CD, DC}));
}

TEST(AltruismLevel, ClosedFormSpotValues) {
  EXPECT_NEAR(altruism_level_closed_form(kPD), std::log(5.0 / 3.0) / std::log(3.0), 1e-15);
  EXPECT_NEAR(altruism_level_closed_form(kPD), 0.46497, 5e-6);
  EXPECT_EQ(altruism_level_closed_form(kStag), 0.0);
  EXPECT_NEAR(altruism_level_closed_form(kChicken), std::log(7.0 / 5.0) / std::log(5.0 / 2.0), 1e-15);
  EXPECT_NEAR(altruism_level_closed_form(kChicken), 0.36721, 5e-6);
}

TEST(AltruismLevel, ClosedFormRejectsNonDilemma) {
  EXPECT_THROW(altruism_level_closed_form({1, 1, 1, 1}), DomainError);
}

TEST(AltruismLevel, BruteForceSpotValues) {
  EXPECT_NEAR(*altruism_level_bruteforce(make_dilemma_game(kPD), 1e-6), altruism_level_closed_form(kPD), 1e-6);
  EXPECT_EQ(*altruism_level_bruteforce(make_dilemma_game(kStag), 1e-6), 0.0);
  EXPECT_NEAR(*altruism_level_bruteforce(make_dilemma_game(kChicken), 1e-6), altruism_level_closed_form(kChicken), 1e-6);
}

TEST(AltruismLevel, BruteForceReportsNotOneAltruistic) {
  // CC has the best sum but the worst product, so full altruism still leaves it.
  NormalFormGame g({2, 2}, {10, 1, 5, 5, 5, 5, 5, 5});
  EXPECT_FALSE(altruism_level_bruteforce(g, 1e-6).has_value());
}

TEST(AltruismLevel, BruteForceGridOnLargerGame) {
  // 3-strategy symmetric game: the grid path must agree with the 2x2 embedding.
  const auto d = kPD;
  std::vector<double> p;
  const double row[3][3] = {{d.R, d.S, d.S}, {d.T, d.P, d.P}, {d.T, d.P, d.P}};
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      p.push_back(row[a][b]);
      p.push_back(row[b][a]);
    }
  }
  const auto v = altruism_level_bruteforce(NormalFormGame({3, 3}, p), 1e-4);
  ASSERT_TRUE(v.has_value());
  EXPECT_NEAR(*v, altruism_level_closed_form(d), 1e-4);
}

TEST(Consistency, Examples) {
  EXPECT_TRUE(check_consistency_ts_r2(kPD));
  EXPECT_TRUE(check_consistency_ts_r2({2, 2, 2, 1}));
  EXPECT_FALSE(check_consistency_ts_r2({10, 3, 1, 2}));
}

TEST(ProportionalFairness, Examples) {
  const std::vector<Allocation> feasible{{{1, 3}}, {{2, 2}}, {{3, 1}}};
  EXPECT_TRUE(check_proportionally_fair({{2, 2}}, feasible));
  EXPECT_FALSE(check_proportionally_fair({{1, 3}}, feasible));
  const std::vector<Allocation> single{{{4, 1}}};
  EXPECT_TRUE(check_proportionally_fair({{4, 1}}, single));
  EXPECT_THROW(check_proportionally_fair({{0, 1}}, single), DomainError);
}

TEST(ProportionalFairness, Optimum) {
  const std::vector<Allocation> feasible{{{1, 3}}, {{2, 2}}, {{3, 1}}};
  EXPECT_EQ(pf_optimum(feasible).utilities, (std::vector<double>{2, 2}));
  const std::vector<Allocation> tie{{{1, 4}}, {{4, 1}}};
  EXPECT_EQ(pf_optimum_index(tie), 0u);
  EXPECT_THROW(pf_optimum_index(std::vector<Allocation>{}), DomainError);
}

// Properties

TEST(Property, ThresholdAroundAltruismLevel) {
  std::mt19937_64 rng(202);
  int tested = 0;
  while (tested < 200) {
    const auto d = random_dilemma(rng, true);
    const double a = altruism_level_closed_form(d);
    if (a < 1e-3 || a > 1.0 - 1e-3) continue;
    const auto g = make_dilemma_game(d);
    const auto above = find_pure_nash(altruistic_extension(g, a + 1e-4));
    const auto below = find_pure_nash(altruistic_extension(g, a - 1e-4));
    EXPECT_TRUE(std::binary_search(above.begin(), above.end(), CC));
    EXPECT_FALSE(std::binary_search(below.begin(), below.end(), CC));
    ++tested;
  }
}

TEST(Property, ClosedFormInUnitInterval) {
  std::mt19937_64 rng(203);
  for (int k = 0; k < 1000; ++k) {
    const double a = altruism_level_closed_form(random_dilemma(rng, false));
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);
  }
}

TEST(Property, ProportionalFairMatchesLogArgmaxOnSimplexGrid) {
  // On a discretized simplex containing the continuous optimum, the
  // variation test and the log-sum argmax single out the same point.
  std::mt19937_64 rng(204);
  std::uniform_real_distribution<double> w(0.5, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double a = w(rng);
    const double b = w(rng);
    // u = (a x, b (1 - x)); optimum at x = 1/2 for any weights.
    std::vector<Allocation> feasible;
    for (int k = 1; k < 20; ++k) {
      const double x = k / 20.0;
      feasible.push_back({{a * x, b * (1.0 - x)}});
    }
    const auto best = pf_optimum_index(feasible);
    EXPECT_EQ(best, 9u);
    for (std::size_t k = 0; k < feasible.size(); ++k) {
      EXPECT_EQ(check_proportionally_fair(feasible[k], feasible), k == best);
    }
  }
}
