#pragma once

// Tabular Markov games with softmax policies: exact evaluation, the
// proportional-fair objective and its exact policy gradient, plus Monte Carlo
// estimators used to cross-check them.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "fairgame/error.hpp"

namespace fairgame {

/// Finite Markov game. Joint actions are mixed-radix indices with agent 0 as
/// the most significant digit.
///
/// transitions: flat [(s * J + a) * S + s']
/// rewards:     flat [(i * S + s) * J + a]
class TabularMarkovGame {
 public:
  TabularMarkovGame(std::vector<std::size_t> action_counts, std::size_t num_states, std::vector<double> transitions,
                    std::vector<double> rewards, std::vector<double> initial_dist, double discount)
      : action_counts_(std::move(action_counts)),
        num_states_(num_states),
        transitions_(std::move(transitions)),
        rewards_(std::move(rewards)),
        initial_dist_(std::move(initial_dist)),
        discount_(discount) {
    if (action_counts_.empty()) throw ShapeError("Markov game needs at least one agent");
    if (num_states_ == 0) throw ShapeError("Markov game needs at least one state");
    num_joint_ = 1;
    for (auto c : action_counts_) {
      if (c == 0) throw ShapeError("every agent needs at least one action");
      num_joint_ *= c;
    }
    if (transitions_.size() != num_states_ * num_joint_ * num_states_) throw ShapeError("transition table size mismatch");
    if (rewards_.size() != num_agents() * num_states_ * num_joint_) throw ShapeError("reward table size mismatch");
    if (initial_dist_.size() != num_states_) throw ShapeError("initial distribution size mismatch");
    if (!(discount_ >= 0.0 && discount_ < 1.0)) throw DomainError("discount must lie in [0, 1)");

    for (std::size_t row = 0; row < num_states_ * num_joint_; ++row) {
      double total = 0.0;
      for (std::size_t s2 = 0; s2 < num_states_; ++s2) {
        const double p = transitions_[row * num_states_ + s2];
        if (!(p >= 0.0)) throw DomainError("transition probabilities must be nonnegative");
        total += p;
      }
      if (std::abs(total - 1.0) > 1e-12) throw DomainError("transition row does not sum to 1");
    }
    double total = 0.0;
    for (double p : initial_dist_) {
      if (!(p >= 0.0)) throw DomainError("initial distribution must be nonnegative");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-12) throw DomainError("initial distribution does not sum to 1");
    for (double r : rewards_) {
      if (!(r > 0.0) || !std::isfinite(r)) throw DomainError("rewards must be strictly positive and finite");
      max_reward_ = std::max(max_reward_, r);
    }
  }

  std::size_t num_agents() const { return action_counts_.size(); }
  std::size_t num_states() const { return num_states_; }
  std::size_t num_joint_actions() const { return num_joint_; }
  const std::vector<std::size_t>& action_counts() const { return action_counts_; }
  double discount() const { return discount_; }
  double max_reward() const { return max_reward_; }
  const std::vector<double>& initial_dist() const { return initial_dist_; }
  const std::vector<double>& transitions() const { return transitions_; }
  const std::vector<double>& rewards() const { return rewards_; }

  std::span<const double> transition_row(std::size_t s, std::size_t joint) const {
    return {transitions_.data() + (s * num_joint_ + joint) * num_states_, num_states_};
  }
  double transition(std::size_t s, std::size_t joint, std::size_t next) const {
    return transitions_[(s * num_joint_ + joint) * num_states_ + next];
  }
  double reward(std::size_t agent, std::size_t s, std::size_t joint) const {
    return rewards_[(agent * num_states_ + s) * num_joint_ + joint];
  }

  std::vector<std::size_t> decode_joint(std::size_t joint) const {
    std::vector<std::size_t> out(num_agents());
    for (std::size_t i = num_agents(); i-- > 0;) {
      out[i] = joint % action_counts_[i];
      joint /= action_counts_[i];
    }
    return out;
  }

  std::size_t encode_joint(std::span<const std::size_t> actions) const {
    if (actions.size() != num_agents()) throw ShapeError("joint action length mismatch");
    std::size_t k = 0;
    for (std::size_t i = 0; i < num_agents(); ++i) {
      if (actions[i] >= action_counts_[i]) throw ShapeError("action index out of range");
      k = k * action_counts_[i] + actions[i];
    }
    return k;
  }

 private:
  std::vector<std::size_t> action_counts_;
  std::size_t num_states_;
  std::vector<double> transitions_;
  std::vector<double> rewards_;
  std::vector<double> initial_dist_;
  double discount_;
  std::size_t num_joint_ = 1;
  double max_reward_ = 0.0;
};

/// Independent tabular softmax policies: one logit per (row, action) per
/// agent. Rows are states in the oracle layer and encoded observations when
/// learning from an environment.
class SoftmaxPolicyProfile {
 public:
  SoftmaxPolicyProfile() = default;
  explicit SoftmaxPolicyProfile(std::vector<Eigen::MatrixXd> logits) : logits_(std::move(logits)) {
    for (const auto& m : logits_) {
      if (m.rows() == 0 || m.cols() == 0) throw ShapeError("logit table must be non-empty");
      if (!m.allFinite()) throw DomainError("logits must be finite");
    }
  }

  static SoftmaxPolicyProfile uniform(std::size_t num_rows, std::span<const std::size_t> action_counts) {
    std::vector<Eigen::MatrixXd> logits;
    for (auto a : action_counts) logits.emplace_back(Eigen::MatrixXd::Zero(num_rows, a));
    return SoftmaxPolicyProfile(std::move(logits));
  }
  static SoftmaxPolicyProfile uniform(const TabularMarkovGame& game) {
    return uniform(game.num_states(), game.action_counts());
  }

  std::size_t num_agents() const { return logits_.size(); }
  const Eigen::MatrixXd& logits(std::size_t agent) const { return logits_.at(agent); }
  Eigen::MatrixXd& logits(std::size_t agent) { return logits_.at(agent); }
  const std::vector<Eigen::MatrixXd>& all_logits() const { return logits_; }

  /// pi_i(. | row).
  Eigen::VectorXd probabilities(std::size_t agent, std::size_t row) const {
    const auto& m = logits_.at(agent);
    if (row >= static_cast<std::size_t>(m.rows())) throw ShapeError("policy row out of range");
    Eigen::VectorXd z = m.row(static_cast<Eigen::Index>(row)).transpose();
    z.array() -= z.maxCoeff();
    z = z.array().exp();
    return z / z.sum();
  }

  double probability(std::size_t agent, std::size_t row, std::size_t action) const {
    auto p = probabilities(agent, row);
    if (action >= static_cast<std::size_t>(p.size())) throw ShapeError("action index out of range");
    return p[static_cast<Eigen::Index>(action)];
  }

  /// Shape check against a game (rows = states, columns = per-agent action counts).
  void require_compatible(const TabularMarkovGame& game) const {
    if (num_agents() != game.num_agents()) throw ShapeError("policy profile has wrong agent count");
    for (std::size_t i = 0; i < num_agents(); ++i) {
      if (static_cast<std::size_t>(logits_[i].rows()) != game.num_states() ||
          static_cast<std::size_t>(logits_[i].cols()) != game.action_counts()[i]) {
        throw ShapeError("logit table " + std::to_string(i) + " does not match game shape");
      }
    }
  }

 private:
  std::vector<Eigen::MatrixXd> logits_;
};

/// prod_i pi_i(a_i | row).
inline double joint_policy_prob(const SoftmaxPolicyProfile& policies, std::size_t row,
                                std::span<const std::size_t> actions) {
  if (actions.size() != policies.num_agents()) throw ShapeError("joint action length mismatch");
  double p = 1.0;
  for (std::size_t i = 0; i < actions.size(); ++i) p *= policies.probability(i, row, actions[i]);
  return p;
}

/// Distribution over joint actions at `state`.
inline Eigen::VectorXd joint_action_distribution(const TabularMarkovGame& game, const SoftmaxPolicyProfile& policies,
                                                 std::size_t state) {
  const std::size_t n = game.num_agents();
  std::vector<Eigen::VectorXd> marginals;
  marginals.reserve(n);
  for (std::size_t i = 0; i < n; ++i) marginals.push_back(policies.probabilities(i, state));
  Eigen::VectorXd out(static_cast<Eigen::Index>(game.num_joint_actions()));
  for (std::size_t a = 0; a < game.num_joint_actions(); ++a) {
    std::size_t rest = a;
    double p = 1.0;
    for (std::size_t i = n; i-- > 0;) {
      p *= marginals[i][static_cast<Eigen::Index>(rest % game.action_counts()[i])];
      rest /= game.action_counts()[i];
    }
    out[static_cast<Eigen::Index>(a)] = p;
  }
  return out;
}

/// Policy-averaged transition matrix and per-agent expected rewards.
struct PolicyAverages {
  std::vector<Eigen::VectorXd> joint_probs;  // per state
  Eigen::MatrixXd transition;                // P_pi(s, s')
  std::vector<Eigen::VectorXd> reward;       // per agent: r_{i,pi}(s)
};

inline PolicyAverages policy_averages(const TabularMarkovGame& game, const SoftmaxPolicyProfile& policies) {
  policies.require_compatible(game);
  const auto S = static_cast<Eigen::Index>(game.num_states());
  PolicyAverages out;
  out.transition = Eigen::MatrixXd::Zero(S, S);
  out.reward.assign(game.num_agents(), Eigen::VectorXd::Zero(S));
  for (std::size_t s = 0; s < game.num_states(); ++s) {
    out.joint_probs.push_back(joint_action_distribution(game, policies, s));
    const auto& pj = out.joint_probs.back();
    for (std::size_t a = 0; a < game.num_joint_actions(); ++a) {
      const double w = pj[static_cast<Eigen::Index>(a)];
      auto row = game.transition_row(s, a);
      for (std::size_t s2 = 0; s2 < game.num_states(); ++s2) {
        out.transition(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s2)) += w * row[s2];
      }
      for (std::size_t i = 0; i < game.num_agents(); ++i) {
        out.reward[i][static_cast<Eigen::Index>(s)] += w * game.reward(i, s, a);
      }
    }
  }
  return out;
}

/// (T_i V_i)(s) = sum_a pi(a|s) [r_i(s,a) + gamma sum_s' P(s'|s,a) V_i(s')] for every agent.
inline std::vector<Eigen::VectorXd> bellman_apply(const TabularMarkovGame& game, const SoftmaxPolicyProfile& policies,
                                                  const std::vector<Eigen::VectorXd>& values) {
  if (values.size() != game.num_agents()) throw ShapeError("one value vector per agent expected");
  for (const auto& v : values) {
    if (static_cast<std::size_t>(v.size()) != game.num_states()) throw ShapeError("value vector length mismatch");
  }
  const auto avg = policy_averages(game, policies);
  std::vector<Eigen::VectorXd> out;
  out.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    out.push_back(avg.reward[i] + game.discount() * (avg.transition * values[i]));
  }
  return out;
}

/// Exact state values, joint-action values and advantages for every agent.
struct ValueBundle {
  std::vector<Eigen::VectorXd> state_values;   // [agent](state)
  std::vector<Eigen::MatrixXd> action_values;  // [agent](state, joint)
  std::vector<Eigen::MatrixXd> advantages;     // [agent](state, joint)

  double value(std::size_t agent, std::size_t state) const {
    return state_values.at(agent)[static_cast<Eigen::Index>(state)];
  }
  double advantage(std::size_t agent, std::size_t state, std::size_t joint) const {
    return advantages.at(agent)(static_cast<Eigen::Index>(state), static_cast<Eigen::Index>(joint));
  }
};

namespace detail {

inline Eigen::PartialPivLU<Eigen::MatrixXd> evaluation_lu(const TabularMarkovGame& game,
                                                          const PolicyAverages& avg) {
  const auto S = static_cast<Eigen::Index>(game.num_states());
  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(S, S) - game.discount() * avg.transition;
  return Eigen::PartialPivLU<Eigen::MatrixXd>(system);
}

inline Eigen::MatrixXd action_values_from(const TabularMarkovGame& game, std::size_t agent,
                                          const Eigen::VectorXd& v) {
  Eigen::MatrixXd q(static_cast<Eigen::Index>(game.num_states()), static_cast<Eigen::Index>(game.num_joint_actions()));
  for (std::size_t s = 0; s < game.num_states(); ++s) {
    for (std::size_t a = 0; a < game.num_joint_actions(); ++a) {
      auto row = game.transition_row(s, a);
      double next = 0.0;
      for (std::size_t s2 = 0; s2 < game.num_states(); ++s2) next += row[s2] * v[static_cast<Eigen::Index>(s2)];
      q(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) = game.reward(agent, s, a) + game.discount() * next;
    }
  }
  return q;
}

}  // namespace detail

/// Solves (I - gamma P_pi) V_i = r_{i,pi} by LU with partial pivoting.
inline ValueBundle solve_values(const TabularMarkovGame& game, const SoftmaxPolicyProfile& policies) {
  const auto avg = policy_averages(game, policies);
  const auto lu = detail::evaluation_lu(game, avg);
  ValueBundle out;
  for (std::size_t i = 0; i < game.num_agents(); ++i) {
    Eigen::VectorXd v = lu.solve(avg.reward[i]);
    Eigen::MatrixXd q = detail::action_values_from(game, i, v);
    Eigen::MatrixXd adv = q.colwise() - v;
    out.state_values.push_back(std::move(v));
    out.action_values.push_back(std::move(q));
    out.advantages.push_back(std::move(adv));
  }
  return out;
}

/// Altruism coefficients c_i(j) = 1 if i == j, alpha otherwise.
struct AltruismWeights {
  double alpha = 0.0;

  explicit AltruismWeights(double a) : alpha(a) {
    if (!(a >= 0.0 && a <= 1.0)) throw DomainError("alpha must lie in [0, 1]");
  }
  double coefficient(std::size_t i, std::size_t j) const { return i == j ? 1.0 : alpha; }
};

struct FairObjective {
  std::vector<double> per_agent;              // J_i
  std::vector<double> proportional_fair_value;  // sum_j log V_j(s), per state
};

/// J_i = sum_s0 rho0(s0) sum_j c_i(j) log V_j(s0), from exact values.
inline FairObjective fair_objective(const TabularMarkovGame& game, const ValueBundle& values,
                                    const AltruismWeights& weights) {
  const std::size_t n = game.num_agents();
  FairObjective out;
  out.proportional_fair_value.assign(game.num_states(), 0.0);
  for (std::size_t s = 0; s < game.num_states(); ++s) {
    for (std::size_t j = 0; j < n; ++j) {
      const double v = values.value(j, s);
      if (!(v > 0.0)) throw ContractViolation("state value must be positive for the log objective");
      out.proportional_fair_value[s] += std::log(v);
    }
  }
  out.per_agent.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (std::size_t s = 0; s < game.num_states(); ++s) {
      const double rho = game.initial_dist()[s];
      if (rho == 0.0) continue;
      double inner = 0.0;
      for (std::size_t j = 0; j < n; ++j) inner += weights.coefficient(i, j) * std::log(values.value(j, s));
      total += rho * inner;
    }
    out.per_agent[i] = total;
  }
  return out;
}

inline FairObjective fair_objective(const TabularMarkovGame& game, const SoftmaxPolicyProfile& policies,
                                    const AltruismWeights& weights) {
  return fair_objective(game, solve_values(game, policies), weights);
}

/// Per-agent tensors shaped like the logit tables.
struct FairGradient {
  std::vector<Eigen::MatrixXd> per_agent;
};

inline FairGradient zero_gradient_like(const SoftmaxPolicyProfile& policies) {
  FairGradient g;
  for (const auto& m : policies.all_logits()) g.per_agent.push_back(Eigen::MatrixXd::Zero(m.rows(), m.cols()));
  return g;
}

/// Immediate term of the gradient fixed point for parameter owner `owner` and
/// value index `value_agent`: G(s, (s,b)) = sum_a pi(a|s) [1{a_owner = b} -
/// pi_owner(b|s)] Q_value_agent(s, a). Columns are flattened as s * A_owner + b.
inline Eigen::MatrixXd gradient_source(const TabularMarkovGame& game, const SoftmaxPolicyProfile& policies,
                                       const ValueBundle& values, const PolicyAverages& avg, std::size_t owner,
                                       std::size_t value_agent) {
  const std::size_t S = game.num_states();
  const std::size_t A = game.action_counts().at(owner);
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(S * A));
  std::size_t stride = 1;
  for (std::size_t k = owner + 1; k < game.num_agents(); ++k) stride *= game.action_counts()[k];
  for (std::size_t s = 0; s < S; ++s) {
    const Eigen::VectorXd pi = policies.probabilities(owner, s);
    const auto& pj = avg.joint_probs[s];
    for (std::size_t a = 0; a < game.num_joint_actions(); ++a) {
      const std::size_t own = (a / stride) % A;
      const double wq = pj[static_cast<Eigen::Index>(a)] *
                        values.action_values[value_agent](static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a));
      for (std::size_t b = 0; b < A; ++b) {
        const double score = (b == own ? 1.0 : 0.0) - pi[static_cast<Eigen::Index>(b)];
        G(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s * A + b)) += wq * score;
      }
    }
  }
  return G;
}

/// One application of the gradient fixed-point map g -> G + gamma P_pi g.
inline Eigen::MatrixXd gradient_operator_apply(const TabularMarkovGame& game, const PolicyAverages& avg,
                                               const Eigen::MatrixXd& source, const Eigen::MatrixXd& g) {
  return source + game.discount() * (avg.transition * g);
}

/// d V_{value_agent}(s) / d theta_owner as a (S x S*A_owner) matrix: the unique
/// fixed point of gradient_operator_apply.
inline Eigen::MatrixXd value_gradient(const TabularMarkovGame& game, const SoftmaxPolicyProfile& policies,
                                      const ValueBundle& values, std::size_t owner, std::size_t value_agent) {
  const auto avg = policy_averages(game, policies);
  const auto lu = detail::evaluation_lu(game, avg);
  return lu.solve(gradient_source(game, policies, values, avg, owner, value_agent));
}

/// Gradient of J_objective with respect to every agent's logits.
inline FairGradient objective_gradient(const TabularMarkovGame& game, const SoftmaxPolicyProfile& policies,
                                       const AltruismWeights& weights, std::size_t objective) {
  const std::size_t n = game.num_agents();
  if (objective >= n) throw ShapeError("objective index out of range");
  const auto values = solve_values(game, policies);
  const auto avg = policy_averages(game, policies);
  const auto lu = detail::evaluation_lu(game, avg);
  FairGradient out = zero_gradient_like(policies);
  for (std::size_t owner = 0; owner < n; ++owner) {
    const std::size_t A = game.action_counts()[owner];
    Eigen::RowVectorXd flat = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(game.num_states() * A));
    for (std::size_t j = 0; j < n; ++j) {
      const Eigen::MatrixXd g = lu.solve(gradient_source(game, policies, values, avg, owner, j));
      const double c = weights.coefficient(objective, j);
      for (std::size_t s0 = 0; s0 < game.num_states(); ++s0) {
        const double rho = game.initial_dist()[s0];
        if (rho == 0.0) continue;
        flat += (c * rho / values.value(j, s0)) * g.row(static_cast<Eigen::Index>(s0));
      }
    }
    for (std::size_t s = 0; s < game.num_states(); ++s) {
      for (std::size_t b = 0; b < A; ++b) {
        out.per_agent[owner](static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(b)) =
            flat[static_cast<Eigen::Index>(s * A + b)];
      }
    }
  }
  return out;
}

/// grad_{theta_i} J_i for every agent i.
inline FairGradient exact_fair_gradient(const TabularMarkovGame& game, const SoftmaxPolicyProfile& policies,
                                        const AltruismWeights& weights) {
  FairGradient out;
  for (std::size_t i = 0; i < game.num_agents(); ++i) {
    out.per_agent.push_back(std::move(objective_gradient(game, policies, weights, i).per_agent[i]));
  }
  return out;
}

/// Fair advantage sum_j c_i(j) A_j(s, a) / V_j(s0). Initial-state values at
/// or below `v_floor` are replaced by the floor and counted in `floor_hits`.
inline double fair_advantage(const ValueBundle& values, const AltruismWeights& weights, std::size_t agent,
                             std::size_t state, std::size_t joint_action, std::size_t initial_state,
                             double v_floor = 1e-3, std::size_t* floor_hits = nullptr) {
  double out = 0.0;
  for (std::size_t j = 0; j < values.state_values.size(); ++j) {
    double v0 = values.value(j, initial_state);
    if (v0 <= v_floor) {
      v0 = v_floor;
      if (floor_hits != nullptr) ++*floor_hits;
    }
    out += weights.coefficient(agent, j) * values.advantage(j, state, joint_action) / v0;
  }
  return out;
}

/// Rollout length whose discounted tail is below `tolerance`.
inline std::size_t default_truncation_horizon(const TabularMarkovGame& game, double tolerance = 1e-6) {
  const double gamma = game.discount();
  if (gamma == 0.0) return 1;
  const double h = std::log(tolerance * (1.0 - gamma) / game.max_reward()) / std::log(gamma);
  return static_cast<std::size_t>(std::max(1.0, std::ceil(h)));
}

struct MonteCarloGradient {
  FairGradient estimate;
  FairGradient standard_error;
  std::size_t rollouts = 0;
  std::size_t horizon = 0;
};

namespace detail {

/// Inverse-CDF draw from an explicit probability vector.
template <typename Vec, typename Rng>
std::size_t sample_index(const Vec& probs, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  double acc = 0.0;
  const auto n = static_cast<std::size_t>(probs.size());
  for (std::size_t k = 0; k + 1 < n; ++k) {
    acc += probs[static_cast<Eigen::Index>(k)];
    if (u < acc) return k;
  }
  return n - 1;
}

inline std::size_t sample_index(std::span<const double> probs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < probs.size(); ++k) {
    acc += probs[k];
    if (u < acc) return k;
  }
  return probs.size() - 1;
}

/// Runs `work(chunk)` for chunk in [0, chunks) across hardware threads. Each
/// chunk owns its generator, so results do not depend on the thread count.
inline void parallel_chunks(std::size_t chunks, const std::function<void(std::size_t)>& work) {
  const std::size_t threads = std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(), chunks));
  if (threads == 1) {
    for (std::size_t c = 0; c < chunks; ++c) work(c);
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t c = t; c < chunks; c += threads) work(c);
    });
  }
  for (auto& th : pool) th.join();
}

/// Coordinate-wise running sums for mean / standard-error estimates.
struct MomentAccumulator {
  Eigen::VectorXd sum;
  Eigen::VectorXd sum_sq;
  std::size_t count = 0;

  explicit MomentAccumulator(Eigen::Index dim) : sum(Eigen::VectorXd::Zero(dim)), sum_sq(Eigen::VectorXd::Zero(dim)) {}
  void add(const Eigen::VectorXd& x) {
    sum += x;
    sum_sq += x.cwiseAbs2();
    ++count;
  }
  void merge(const MomentAccumulator& other) {
    sum += other.sum;
    sum_sq += other.sum_sq;
    count += other.count;
  }
  Eigen::VectorXd mean() const { return sum / static_cast<double>(count); }
  Eigen::VectorXd standard_error() const {
    const double n = static_cast<double>(count);
    Eigen::VectorXd m = mean();
    Eigen::VectorXd var = (sum_sq / n - m.cwiseAbs2()).cwiseMax(0.0) * (n / std::max(1.0, n - 1.0));
    return (var / n).cwiseSqrt();
  }
};

inline std::vector<std::size_t> parameter_offsets(const SoftmaxPolicyProfile& policies) {
  std::vector<std::size_t> off{0};
  for (const auto& m : policies.all_logits()) off.push_back(off.back() + static_cast<std::size_t>(m.size()));
  return off;
}

inline FairGradient unflatten(const SoftmaxPolicyProfile& policies, const Eigen::VectorXd& flat) {
  FairGradient g = zero_gradient_like(policies);
  std::size_t k = 0;
  for (auto& m : g.per_agent) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = flat[static_cast<Eigen::Index>(k++)];
    }
  }
  return g;
}

}  // namespace detail

/// Monte Carlo estimate of grad_{theta_i} J_i from truncated rollouts:
/// E[sum_t gamma^t grad log pi_i(a_i,t | s_t) sum_j c_i(j) Q_j(s_t, a_t) / V_j(s0)],
/// with exact Q and V as the critic. Reproducible for a fixed seed.
inline MonteCarloGradient mc_fair_gradient(const TabularMarkovGame& game, const SoftmaxPolicyProfile& policies,
                                           const AltruismWeights& weights, std::size_t num_rollouts,
                                           std::size_t horizon, std::uint64_t seed) {
  if (num_rollouts == 0) throw DomainError("Monte Carlo gradient needs at least one rollout");
  if (horizon == 0) throw DomainError("rollout horizon must be positive");
  policies.require_compatible(game);
  const auto values = solve_values(game, policies);
  const auto avg = policy_averages(game, policies);
  const std::size_t n = game.num_agents();
  const auto offsets = detail::parameter_offsets(policies);
  const auto dim = static_cast<Eigen::Index>(offsets.back());

  std::vector<std::vector<Eigen::VectorXd>> probs(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t s = 0; s < game.num_states(); ++s) probs[i].push_back(policies.probabilities(i, s));
  }

  constexpr std::size_t kChunks = 64;
  std::vector<detail::MomentAccumulator> partial(kChunks, detail::MomentAccumulator(dim));
  detail::parallel_chunks(kChunks, [&](std::size_t chunk) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(chunk)};
    std::mt19937_64 rng(seq);
    Eigen::VectorXd sample(dim);
    std::vector<std::size_t> actions(n);
    std::vector<double> inv_v0(n);
    for (std::size_t r = chunk; r < num_rollouts; r += kChunks) {
      sample.setZero();
      std::size_t s = detail::sample_index(std::span<const double>(game.initial_dist()), rng);
      const std::size_t s0 = s;
      for (std::size_t j = 0; j < n; ++j) inv_v0[j] = 1.0 / values.value(j, s0);
      double discount = 1.0;
      for (std::size_t t = 0; t < horizon; ++t) {
        for (std::size_t i = 0; i < n; ++i) actions[i] = detail::sample_index(probs[i][s], rng);
        const std::size_t joint = game.encode_joint(actions);
        for (std::size_t i = 0; i < n; ++i) {
          double weight = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            weight += weights.coefficient(i, j) *
                      values.action_values[j](static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(joint)) *
                      inv_v0[j];
          }
          const std::size_t A = game.action_counts()[i];
          const auto& pi = probs[i][s];
          for (std::size_t b = 0; b < A; ++b) {
            const double score = (b == actions[i] ? 1.0 : 0.0) - pi[static_cast<Eigen::Index>(b)];
            // Row-major flattening of the (state x action) logit table.
            sample[static_cast<Eigen::Index>(offsets[i] + s * A + b)] += discount * weight * score;
          }
        }
        s = detail::sample_index(game.transition_row(s, joint), rng);
        discount *= game.discount();
      }
      partial[chunk].add(sample);
    }
  });

  detail::MomentAccumulator total(dim);
  for (const auto& p : partial) total.merge(p);
  MonteCarloGradient out;
  out.estimate = detail::unflatten(policies, total.mean());
  out.standard_error = detail::unflatten(policies, total.standard_error());
  out.rollouts = num_rollouts;
  out.horizon = horizon;
  return out;
}

struct BaselineCheck {
  FairGradient exact;           // analytic E[grad log pi_i * f(s)] per state
  FairGradient mc_mean;         // sample mean
  FairGradient mc_standard_error;
};

/// Checks that a state-dependent baseline contributes nothing in expectation:
/// E_{a ~ pi(.|s)}[grad_{theta_i} log pi_i(a_i|s) f(s)] = 0 for every state.
inline BaselineCheck baseline_zero_check(const TabularMarkovGame& game, const SoftmaxPolicyProfile& policies,
                                         const std::function<double(std::size_t)>& baseline, std::size_t num_samples,
                                         std::uint64_t seed) {
  if (num_samples == 0) throw DomainError("baseline check needs at least one sample");
  policies.require_compatible(game);
  BaselineCheck out;
  out.exact = zero_gradient_like(policies);
  out.mc_mean = zero_gradient_like(policies);
  out.mc_standard_error = zero_gradient_like(policies);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < game.num_agents(); ++i) {
    const auto A = static_cast<Eigen::Index>(game.action_counts()[i]);
    for (std::size_t s = 0; s < game.num_states(); ++s) {
      const double f = baseline(s);
      const Eigen::VectorXd pi = policies.probabilities(i, s);
      // E[onehot(a)] = pi and E[pi] = pi, hence the score has zero mean.
      const Eigen::VectorXd expected_onehot = pi;
      const Eigen::VectorXd expected_subtrahend = pi;
      out.exact.per_agent[i].row(static_cast<Eigen::Index>(s)) = (f * (expected_onehot - expected_subtrahend)).transpose();

      detail::MomentAccumulator acc(A);
      Eigen::VectorXd x(A);
      for (std::size_t k = 0; k < num_samples; ++k) {
        const std::size_t a = detail::sample_index(pi, rng);
        x = -pi;
        x[static_cast<Eigen::Index>(a)] += 1.0;
        acc.add(f * x);
      }
      out.mc_mean.per_agent[i].row(static_cast<Eigen::Index>(s)) = acc.mean().transpose();
      out.mc_standard_error.per_agent[i].row(static_cast<Eigen::Index>(s)) = acc.standard_error().transpose();
    }
  }
  return out;
}

}  // namespace fairgame
