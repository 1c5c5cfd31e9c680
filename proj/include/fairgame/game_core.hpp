#pragma once

// Normal-form games, social-dilemma analysis and the log-rescaled altruistic
// transform.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fairgame/error.hpp"

namespace fairgame {

/// Finite n-player game with a dense payoff tensor.
///
/// Payoffs are stored row-major over joint pure strategies (player 0 is the
/// most significant digit) with the player index innermost, i.e. the payoff of
/// player `i` at joint profile `k` lives at `k * num_players + i`.
class NormalFormGame {
 public:
  NormalFormGame(std::vector<std::size_t> strategy_counts, std::vector<double> payoffs)
      : strategy_counts_(std::move(strategy_counts)), payoffs_(std::move(payoffs)) {
    if (strategy_counts_.empty()) throw ShapeError("normal-form game needs at least one player");
    num_profiles_ = 1;
    for (auto c : strategy_counts_) {
      if (c == 0) throw ShapeError("every player needs at least one strategy");
      num_profiles_ *= c;
    }
    if (payoffs_.size() != num_profiles_ * strategy_counts_.size()) {
      throw ShapeError("payoff tensor has " + std::to_string(payoffs_.size()) + " entries, expected " +
                       std::to_string(num_profiles_ * strategy_counts_.size()));
    }
    for (double p : payoffs_) {
      if (!std::isfinite(p)) throw DomainError("payoffs must be finite");
    }
  }

  std::size_t num_players() const { return strategy_counts_.size(); }
  std::size_t num_profiles() const { return num_profiles_; }
  const std::vector<std::size_t>& strategy_counts() const { return strategy_counts_; }
  const std::vector<double>& payoffs() const { return payoffs_; }

  double payoff(std::size_t profile, std::size_t player) const {
    return payoffs_[profile * num_players() + player];
  }

  std::vector<std::size_t> decode(std::size_t profile) const {
    std::vector<std::size_t> out(num_players());
    for (std::size_t p = num_players(); p-- > 0;) {
      out[p] = profile % strategy_counts_[p];
      profile /= strategy_counts_[p];
    }
    return out;
  }

  std::size_t encode(std::span<const std::size_t> strategies) const {
    if (strategies.size() != num_players()) throw ShapeError("profile length mismatch");
    std::size_t k = 0;
    for (std::size_t p = 0; p < num_players(); ++p) {
      if (strategies[p] >= strategy_counts_[p]) throw ShapeError("strategy index out of range");
      k = k * strategy_counts_[p] + strategies[p];
    }
    return k;
  }

  bool strictly_positive() const {
    return std::all_of(payoffs_.begin(), payoffs_.end(), [](double p) { return p > 0.0; });
  }

 private:
  std::vector<std::size_t> strategy_counts_;
  std::vector<double> payoffs_;
  std::size_t num_profiles_ = 0;
};

/// Temptation, reward, sucker and punishment payoffs of a symmetric 2x2 game.
struct DilemmaPayoffs {
  double T = 0.0;
  double R = 0.0;
  double S = 0.0;
  double P = 0.0;
};

enum class DilemmaKind { PrisonersDilemma, StagHunt, Chicken, NotADilemma };

inline const char* to_string(DilemmaKind k) {
  switch (k) {
    case DilemmaKind::PrisonersDilemma: return "PrisonersDilemma";
    case DilemmaKind::StagHunt: return "StagHunt";
    case DilemmaKind::Chicken: return "Chicken";
    case DilemmaKind::NotADilemma: return "NotADilemma";
  }
  return "NotADilemma";
}

struct DilemmaClass {
  DilemmaKind kind = DilemmaKind::NotADilemma;
  bool reward_over_punishment = false;  // R > P
  bool reward_over_sucker = false;      // R > S
  bool cooperation_over_exploit = false;  // 2R >= T + S (boundary admitted)
  bool greed_or_fear = false;           // T > R or P > S

  bool is_dilemma() const { return kind != DilemmaKind::NotADilemma; }
};

inline void require_positive(const DilemmaPayoffs& d) {
  if (!(d.T > 0.0 && d.R > 0.0 && d.S > 0.0 && d.P > 0.0)) {
    throw DomainError("dilemma payoffs must be strictly positive (T, R, S, P > 0)");
  }
}

inline DilemmaClass classify_social_dilemma(const DilemmaPayoffs& d) {
  require_positive(d);
  DilemmaClass c;
  c.reward_over_punishment = d.R > d.P;
  c.reward_over_sucker = d.R > d.S;
  c.cooperation_over_exploit = 2.0 * d.R >= d.T + d.S;
  c.greed_or_fear = d.T > d.R || d.P > d.S;
  if (!(c.reward_over_punishment && c.reward_over_sucker && c.cooperation_over_exploit && c.greed_or_fear)) {
    return c;
  }
  if (d.T > d.R && d.R > d.P && d.P > d.S) {
    c.kind = DilemmaKind::PrisonersDilemma;
  } else if (d.R >= d.T && d.R > d.P && d.P > d.S) {
    c.kind = DilemmaKind::StagHunt;
  } else if (d.T > d.R && d.R > d.S && d.S >= d.P) {
    c.kind = DilemmaKind::Chicken;
  }
  return c;
}

/// Strategy 0 is C, strategy 1 is D; player 0 picks the row.
inline NormalFormGame make_dilemma_game(const DilemmaPayoffs& d) {
  return NormalFormGame({2, 2}, {d.R, d.R, d.S, d.T, d.T, d.S, d.P, d.P});
}

/// Recovers (T, R, S, P) from a symmetric 2x2 game laid out as make_dilemma_game.
inline std::optional<DilemmaPayoffs> extract_symmetric_dilemma(const NormalFormGame& g) {
  if (g.num_players() != 2 || g.strategy_counts()[0] != 2 || g.strategy_counts()[1] != 2) return std::nullopt;
  const auto& p = g.payoffs();
  bool symmetric = p[0] == p[1] && p[6] == p[7] && p[2] == p[5] && p[3] == p[4];
  if (!symmetric) return std::nullopt;
  return DilemmaPayoffs{p[4], p[0], p[2], p[6]};
}

/// Subtracts the minimum raw payoff and adds `epsilon`, making every payoff
/// at least `epsilon`.
inline NormalFormGame shift_payoffs(const NormalFormGame& g, double epsilon) {
  if (!(epsilon > 0.0)) throw DomainError("shift epsilon must be > 0");
  const double m = *std::min_element(g.payoffs().begin(), g.payoffs().end());
  std::vector<double> out(g.payoffs());
  for (double& v : out) v = v - m + epsilon;
  return NormalFormGame(g.strategy_counts(), std::move(out));
}

/// u_i(s) = (1 - alpha) log p_i(s) + alpha * sum_j log p_j(s).
inline NormalFormGame altruistic_extension(const NormalFormGame& g, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in [0, 1]");
  if (!g.strictly_positive()) throw DomainError("altruistic extension requires strictly positive payoffs");
  const std::size_t n = g.num_players();
  std::vector<double> out(g.payoffs().size());
  std::vector<double> logs(n);
  for (std::size_t k = 0; k < g.num_profiles(); ++k) {
    double welfare = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      logs[i] = std::log(g.payoff(k, i));
      welfare += logs[i];
    }
    for (std::size_t i = 0; i < n; ++i) out[k * n + i] = (1.0 - alpha) * logs[i] + alpha * welfare;
  }
  return NormalFormGame(g.strategy_counts(), std::move(out));
}

/// True when no player has a strictly profitable unilateral deviation from `profile`.
inline bool is_pure_nash(const NormalFormGame& g, std::size_t profile) {
  auto strategies = g.decode(profile);
  for (std::size_t i = 0; i < g.num_players(); ++i) {
    const double current = g.payoff(profile, i);
    const std::size_t own = strategies[i];
    for (std::size_t alt = 0; alt < g.strategy_counts()[i]; ++alt) {
      if (alt == own) continue;
      strategies[i] = alt;
      const bool better = g.payoff(g.encode(strategies), i) > current;
      strategies[i] = own;
      if (better) return false;
    }
  }
  return true;
}

/// All weak pure Nash equilibria, as ascending joint indices.
inline std::vector<std::size_t> find_pure_nash(const NormalFormGame& g) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < g.num_profiles(); ++k) {
    if (is_pure_nash(g, k)) out.push_back(k);
  }
  return out;
}

/// Joint profiles maximizing the utilitarian sum of payoffs.
inline std::vector<std::size_t> social_optima(const NormalFormGame& g) {
  std::vector<double> welfare(g.num_profiles(), 0.0);
  for (std::size_t k = 0; k < g.num_profiles(); ++k) {
    for (std::size_t i = 0; i < g.num_players(); ++i) welfare[k] += g.payoff(k, i);
  }
  const double best = *std::max_element(welfare.begin(), welfare.end());
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < welfare.size(); ++k) {
    if (welfare[k] == best) out.push_back(k);
  }
  return out;
}

inline bool check_consistency_ts_r2(const DilemmaPayoffs& d) { return d.T * d.S <= d.R * d.R; }

/// Closed-form altruism level of a 2x2 social dilemma.
inline double altruism_level_closed_form(const DilemmaPayoffs& d) {
  const auto cls = classify_social_dilemma(d);
  if (!cls.is_dilemma()) throw DomainError("payoffs do not define a social dilemma");
  if (!check_consistency_ts_r2(d)) throw ConsistencyError("T*S > R^2: altruism level would exceed 1");
  if (d.T <= d.R) return 0.0;
  return (std::log(d.T) - std::log(d.R)) / (std::log(d.R) - std::log(d.S));
}

/// Numerical altruism level: the smallest alpha in [0, 1] (to within
/// `grid_resolution`) for which a pure Nash equilibrium of the extension is a
/// social optimum of `g`. Returns nullopt when the game is not 1-altruistic.
///
/// 2x2 games use bisection on the (monotone) predicate; larger games scan a
/// uniform grid of step `grid_resolution`.
inline std::optional<double> altruism_level_bruteforce(const NormalFormGame& g, double grid_resolution) {
  if (!(grid_resolution > 0.0)) throw DomainError("grid resolution must be > 0");
  if (!g.strictly_positive()) throw DomainError("altruism level requires strictly positive payoffs");
  const auto optima = social_optima(g);
  auto holds = [&](double alpha) {
    const auto nash = find_pure_nash(altruistic_extension(g, alpha));
    return std::any_of(nash.begin(), nash.end(), [&](std::size_t k) {
      return std::binary_search(optima.begin(), optima.end(), k);
    });
  };

  const bool two_by_two = g.num_players() == 2 && g.strategy_counts()[0] == 2 && g.strategy_counts()[1] == 2;
  if (two_by_two) {
    if (holds(0.0)) return 0.0;
    if (!holds(1.0)) return std::nullopt;
    double lo = 0.0;
    double hi = 1.0;
    while (hi - lo > grid_resolution) {
      const double mid = 0.5 * (lo + hi);
      (holds(mid) ? hi : lo) = mid;
    }
    return hi;
  }

  const auto steps = static_cast<std::size_t>(std::ceil(1.0 / grid_resolution));
  for (std::size_t k = 0; k <= steps; ++k) {
    const double alpha = std::min(1.0, static_cast<double>(k) * grid_resolution);
    if (holds(alpha)) return alpha;
  }
  return std::nullopt;
}

/// Per-agent utilities of one feasible outcome.
struct Allocation {
  std::vector<double> utilities;
};

namespace detail {
inline void require_positive(const Allocation& a) {
  if (a.utilities.empty()) throw DomainError("allocation has no agents");
  for (double u : a.utilities) {
    if (!(u > 0.0)) throw DomainError("allocation utilities must be strictly positive");
  }
}
}  // namespace detail

/// True iff no feasible allocation has a positive sum of proportional
/// variations relative to `candidate` (up to `tolerance`).
inline bool check_proportionally_fair(const Allocation& candidate, std::span<const Allocation> feasible,
                                      double tolerance = 1e-12) {
  detail::require_positive(candidate);
  for (const auto& x : feasible) {
    detail::require_positive(x);
    if (x.utilities.size() != candidate.utilities.size()) throw ShapeError("allocation size mismatch");
    double variation = 0.0;
    for (std::size_t i = 0; i < x.utilities.size(); ++i) {
      variation += (x.utilities[i] - candidate.utilities[i]) / candidate.utilities[i];
    }
    if (variation > tolerance) return false;
  }
  return true;
}

/// Index of the allocation maximizing sum_i log u_i. Near-ties (within
/// 1e-12 relative) go to the lowest index.
inline std::size_t pf_optimum_index(std::span<const Allocation> feasible) {
  if (feasible.empty()) throw DomainError("feasible set is empty");
  std::size_t best = 0;
  double best_value = 0.0;
  for (std::size_t k = 0; k < feasible.size(); ++k) {
    detail::require_positive(feasible[k]);
    double v = 0.0;
    for (double u : feasible[k].utilities) v += std::log(u);
    if (k == 0 || v > best_value + 1e-12 * std::max(1.0, std::abs(best_value))) {
      best = k;
      best_value = v;
    }
  }
  return best;
}

inline Allocation pf_optimum(std::span<const Allocation> feasible) { return feasible[pf_optimum_index(feasible)]; }

}  // namespace fairgame
