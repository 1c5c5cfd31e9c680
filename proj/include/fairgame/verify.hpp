#pragma once

// Seeded property suites behind `fairgame verify <suite>`.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "fairgame/environments.hpp"
#include "fairgame/game_core.hpp"
#include "fairgame/markov_game.hpp"
#include "fairgame/metrics.hpp"

namespace fairgame {

struct SuiteReport {
  std::string name;
  std::size_t checks = 0;
  std::vector<std::string> violations{};

  bool passed() const { return violations.empty(); }
  void check(bool ok, const std::string& what) {
    ++checks;
    if (!ok) violations.push_back(what);
  }
};

/// Random payoffs satisfying the social-dilemma inequalities. With
/// `require_greed`, T > R is enforced as well.
inline DilemmaPayoffs random_dilemma(std::mt19937_64& rng, bool require_greed) {
  std::uniform_real_distribution<double> u(0.1, 10.0);
  for (;;) {
    DilemmaPayoffs d{u(rng), u(rng), u(rng), u(rng)};
    if (!classify_social_dilemma(d).is_dilemma()) continue;
    if (require_greed && !(d.T > d.R)) continue;
    return d;
  }
}

/// Logits drawn i.i.d. from N(0, scale^2).
inline SoftmaxPolicyProfile random_policies(const TabularMarkovGame& game, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<Eigen::MatrixXd> logits;
  for (auto a : game.action_counts()) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(game.num_states()), static_cast<Eigen::Index>(a));
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = normal(rng);
    logits.push_back(std::move(m));
  }
  return SoftmaxPolicyProfile(std::move(logits));
}

/// Random game with 2-3 agents, 2-5 states and 2-3 actions per agent.
inline TabularMarkovGame random_small_game(std::mt19937_64& rng, double gamma) {
  std::uniform_int_distribution<std::size_t> agents(2, 3);
  std::uniform_int_distribution<std::size_t> states(2, 5);
  std::uniform_int_distribution<std::size_t> actions(2, 3);
  const std::size_t n = agents(rng);
  const std::size_t s = states(rng);
  std::vector<std::size_t> counts;
  for (std::size_t i = 0; i < n; ++i) counts.push_back(actions(rng));
  return random_markov_game(n, s, counts, gamma, rng());
}

/// Central differences of J_objective with respect to agent `owner`'s logits.
inline Eigen::MatrixXd finite_difference_gradient(const TabularMarkovGame& game, const SoftmaxPolicyProfile& policies,
                                                  const AltruismWeights& weights, std::size_t objective,
                                                  std::size_t owner, double h = 1e-5) {
  Eigen::MatrixXd out(policies.logits(owner).rows(), policies.logits(owner).cols());
  SoftmaxPolicyProfile probe = policies;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
      const double base = policies.logits(owner)(r, c);
      probe.logits(owner)(r, c) = base + h;
      const double up = fair_objective(game, probe, weights).per_agent[objective];
      probe.logits(owner)(r, c) = base - h;
      const double down = fair_objective(game, probe, weights).per_agent[objective];
      probe.logits(owner)(r, c) = base;
      out(r, c) = (up - down) / (2.0 * h);
    }
  }
  return out;
}

/// Relative error per coordinate; coordinates below `floor` in magnitude are
/// compared absolutely against `floor`.
inline bool gradients_agree(const Eigen::MatrixXd& exact, const Eigen::MatrixXd& approx, double rel_tol,
                            double floor = 1e-8, double* worst = nullptr) {
  bool ok = true;
  double w = 0.0;
  for (Eigen::Index k = 0; k < exact.size(); ++k) {
    const double e = exact.data()[k];
    const double a = approx.data()[k];
    const double diff = std::abs(e - a);
    if (std::abs(e) < floor) {
      if (diff > floor) ok = false;
      continue;
    }
    const double rel = diff / std::abs(e);
    w = std::max(w, rel);
    if (rel > rel_tol) ok = false;
  }
  if (worst != nullptr) *worst = w;
  return ok;
}

inline SuiteReport verify_gradients(std::size_t games = 50, std::uint64_t seed = 7) {
  SuiteReport rep{"gradients"};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> gamma_dist(0.5, 0.95);
  std::uniform_real_distribution<double> alpha_dist(0.0, 1.0);
  for (std::size_t g = 0; g < games; ++g) {
    const auto game = random_small_game(rng, gamma_dist(rng));
    const auto policies = random_policies(game, rng);
    const AltruismWeights w(alpha_dist(rng));
    const auto exact = exact_fair_gradient(game, policies, w);
    for (std::size_t i = 0; i < game.num_agents(); ++i) {
      double worst = 0.0;
      const auto fd = finite_difference_gradient(game, policies, w, i, i);
      rep.check(gradients_agree(exact.per_agent[i], fd, 1e-4, 1e-8, &worst),
                "game " + std::to_string(g) + " agent " + std::to_string(i) + ": relative error " +
                    std::to_string(worst));
    }
  }
  return rep;
}

inline SuiteReport verify_bellman(std::size_t games = 50, std::uint64_t seed = 11) {
  SuiteReport rep{"bellman"};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> gamma_dist(0.5, 0.95);
  std::uniform_real_distribution<double> value_dist(-10.0, 10.0);
  for (std::size_t g = 0; g < games; ++g) {
    const auto game = random_small_game(rng, gamma_dist(rng));
    const auto policies = random_policies(game, rng);
    const auto values = solve_values(game, policies);
    const auto applied = bellman_apply(game, policies, values.state_values);
    double residual = 0.0;
    for (std::size_t i = 0; i < game.num_agents(); ++i) {
      residual = std::max(residual, (applied[i] - values.state_values[i]).cwiseAbs().maxCoeff());
    }
    rep.check(residual <= 1e-9, "game " + std::to_string(g) + ": fixed-point residual " + std::to_string(residual));

    double worst_ratio = 0.0;
    for (int pair = 0; pair < 100; ++pair) {
      std::vector<Eigen::VectorXd> v1;
      std::vector<Eigen::VectorXd> v2;
      for (std::size_t i = 0; i < game.num_agents(); ++i) {
        Eigen::VectorXd a(static_cast<Eigen::Index>(game.num_states()));
        Eigen::VectorXd b(static_cast<Eigen::Index>(game.num_states()));
        for (Eigen::Index s = 0; s < a.size(); ++s) {
          a[s] = value_dist(rng);
          b[s] = value_dist(rng);
        }
        v1.push_back(a);
        v2.push_back(b);
      }
      const auto t1 = bellman_apply(game, policies, v1);
      const auto t2 = bellman_apply(game, policies, v2);
      for (std::size_t i = 0; i < game.num_agents(); ++i) {
        const double before = (v1[i] - v2[i]).cwiseAbs().maxCoeff();
        const double after = (t1[i] - t2[i]).cwiseAbs().maxCoeff();
        if (before > 0.0) worst_ratio = std::max(worst_ratio, after / before);
      }
    }
    rep.check(worst_ratio <= game.discount() + 1e-12,
              "game " + std::to_string(g) + ": contraction factor " + std::to_string(worst_ratio) + " > gamma");
    for (std::size_t i = 0; i < game.num_agents(); ++i) {
      const double bound = game.max_reward() / (1.0 - game.discount());
      rep.check(values.state_values[i].minCoeff() > 0.0 && values.state_values[i].maxCoeff() <= bound * (1 + 1e-12),
                "game " + std::to_string(g) + ": value bounds violated");
    }
  }
  return rep;
}

inline SuiteReport verify_baseline(std::size_t triples = 10, std::size_t samples = 100000, std::uint64_t seed = 13) {
  SuiteReport rep{"baseline"};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> f_dist(-5.0, 5.0);
  for (std::size_t k = 0; k < triples; ++k) {
    const auto game = random_markov_game(2, 2, {2, 2}, 0.9, rng());
    const auto policies = random_policies(game, rng);
    std::vector<double> f(game.num_states());
    for (auto& v : f) v = f_dist(rng);
    const auto check = baseline_zero_check(game, policies, [&](std::size_t s) { return f[s]; }, samples, rng());
    for (std::size_t i = 0; i < game.num_agents(); ++i) {
      rep.check((check.exact.per_agent[i].array() == 0.0).all(),
                "triple " + std::to_string(k) + ": analytic baseline term is not exactly zero");
      const auto& m = check.mc_mean.per_agent[i];
      const auto& se = check.mc_standard_error.per_agent[i];
      for (Eigen::Index c = 0; c < m.size(); ++c) {
        rep.check(std::abs(m.data()[c]) < 3.0 * se.data()[c] || (m.data()[c] == 0.0 && se.data()[c] == 0.0),
                  "triple " + std::to_string(k) + ": |mean| >= 3 SE");
      }
    }
  }
  return rep;
}

inline SuiteReport verify_altruism(std::size_t instances = 200, std::uint64_t seed = 17) {
  SuiteReport rep{"altruism"};
  std::mt19937_64 rng(seed);
  for (std::size_t k = 0; k < instances; ++k) {
    const auto d = random_dilemma(rng, true);
    const double closed = altruism_level_closed_form(d);
    const auto brute = altruism_level_bruteforce(make_dilemma_game(d), 1e-6);
    rep.check(brute.has_value() && std::abs(*brute - closed) <= 2e-6,
              "instance " + std::to_string(k) + ": closed form " + std::to_string(closed) + " vs brute force " +
                  (brute ? std::to_string(*brute) : std::string("none")));
    rep.check(check_consistency_ts_r2(d), "instance " + std::to_string(k) + ": TS > R^2");
  }
  return rep;
}

inline SuiteReport verify_consistency(std::size_t instances = 10000, std::uint64_t seed = 19) {
  SuiteReport rep{"consistency"};
  std::mt19937_64 rng(seed);
  for (std::size_t k = 0; k < instances; ++k) {
    const auto d = random_dilemma(rng, false);
    rep.check(check_consistency_ts_r2(d), "instance " + std::to_string(k) + ": TS > R^2");
  }
  return rep;
}

inline SuiteReport verify_gini(std::size_t vectors = 10000, std::uint64_t seed = 23) {
  SuiteReport rep{"gini"};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> size_dist(1, 10);
  std::uniform_real_distribution<double> value_dist(0.0, 10.0);
  std::uniform_real_distribution<double> scale_dist(0.01, 100.0);
  rep.check(gini(std::vector<double>{1, 1, 1, 1}).value == 0.0, "(1,1,1,1) should have Gini 0");
  rep.check(std::abs(gini(std::vector<double>{1, 0, 0, 0, 0, 0, 0}).value - 6.0 / 7.0) < 1e-15,
            "7-agent one-hot should have Gini 6/7");
  for (std::size_t k = 0; k < vectors; ++k) {
    const std::size_t n = size_dist(rng);
    std::vector<double> c(n);
    for (auto& v : c) v = value_dist(rng);
    const double g = gini(c).value;
    const double bound = static_cast<double>(n - 1) / static_cast<double>(n);
    rep.check(g >= 0.0 && g <= bound + 1e-12, "vector " + std::to_string(k) + ": Gini out of bounds");

    const double scale = scale_dist(rng);
    std::vector<double> scaled(c);
    for (auto& v : scaled) v *= scale;
    rep.check(std::abs(gini(scaled).value - g) <= 1e-12, "vector " + std::to_string(k) + ": not scale invariant");

    std::vector<double> shuffled(c);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    rep.check(std::abs(gini(shuffled).value - g) <= 1e-12, "vector " + std::to_string(k) + ": not permutation invariant");

    if (n >= 2) {
      const auto [lo, hi] = std::minmax_element(c.begin(), c.end());
      if (*hi > *lo) {
        std::vector<double> moved(c);
        const auto lo_idx = static_cast<std::size_t>(lo - c.begin());
        const auto hi_idx = static_cast<std::size_t>(hi - c.begin());
        const double delta = std::uniform_real_distribution<double>(0.0, 0.5)(rng) * (*hi - *lo);
        moved[hi_idx] -= delta;
        moved[lo_idx] += delta;
        rep.check(gini(moved).value <= g + 1e-12, "vector " + std::to_string(k) + ": Pigou-Dalton transfer raised Gini");
      }
    }
  }
  for (std::size_t n = 1; n <= 10; ++n) {
    std::vector<double> one_hot(n, 0.0);
    one_hot[0] = 1.0;
    const double bound = static_cast<double>(n - 1) / static_cast<double>(n);
    rep.check(std::abs(gini(one_hot).value - bound) <= 1e-15, "one-hot of size " + std::to_string(n) + " misses bound");
  }
  return rep;
}

inline const std::vector<std::string>& verify_suite_names() {
  static const std::vector<std::string> names{"altruism", "consistency", "bellman", "gradients", "baseline", "gini"};
  return names;
}

inline SuiteReport run_verify_suite(const std::string& name) {
  if (name == "altruism") return verify_altruism();
  if (name == "consistency") return verify_consistency();
  if (name == "bellman") return verify_bellman();
  if (name == "gradients") return verify_gradients();
  if (name == "baseline") return verify_baseline();
  if (name == "gini") return verify_gini();
  throw DomainError("unknown verify suite '" + name + "'");
}

}  // namespace fairgame
