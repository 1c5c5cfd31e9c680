#pragma once

// Fair MAA2C and Fair MAPPO with tabular softmax actors and tabular critics.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fairgame/environments.hpp"
#include "fairgame/error.hpp"
#include "fairgame/markov_game.hpp"
#include "fairgame/metrics.hpp"

namespace fairgame {

enum class Algorithm { FairMAA2C, FairMAPPO };
enum class Objective { ProportionalFair, UtilitarianWelfare };

inline const char* to_string(Algorithm a) { return a == Algorithm::FairMAA2C ? "FairMAA2C" : "FairMAPPO"; }
inline const char* to_string(Objective o) {
  return o == Objective::ProportionalFair ? "ProportionalFair" : "UtilitarianWelfare";
}

struct TrainConfig {
  Algorithm algorithm = Algorithm::FairMAA2C;
  Objective objective = Objective::ProportionalFair;
  double alpha = 0.0;
  double learning_rate = 0.01;         // actor
  double critic_learning_rate = 0.01;
  double final_learning_rate = 1e-5;   // linear decay target for both
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double entropy_coef = 0.01;
  double ppo_clip = 0.2;
  std::size_t ppo_epochs = 4;
  std::size_t num_envs = 10;
  std::size_t episode_length = 100;
  std::size_t total_steps = 300000;
  std::uint64_t seed = 0;
  double v_floor = 1e-3;
  double critic_init = 1.0;
  // Passes fitting the critic to the first batch's lambda-returns before any
  // actor step. Without it the 1/V(s0) factor divides by critic_init.
  std::size_t critic_warmup = 50;
  bool normalize_advantages = false;

  /// Every violated constraint, by field name. Empty when valid.
  std::vector<std::string> validate() const {
    std::vector<std::string> errors;
    if (!(alpha >= 0.0 && alpha <= 1.0)) errors.emplace_back("alpha: must lie in [0, 1]");
    if (!(learning_rate > 0.0)) errors.emplace_back("learning_rate: must be > 0");
    if (!(critic_learning_rate > 0.0)) errors.emplace_back("critic_learning_rate: must be > 0");
    if (!(final_learning_rate > 0.0)) errors.emplace_back("final_learning_rate: must be > 0");
    if (!(gamma >= 0.0 && gamma < 1.0)) errors.emplace_back("gamma: must lie in [0, 1)");
    if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) errors.emplace_back("gae_lambda: must lie in [0, 1]");
    if (!(entropy_coef >= 0.0)) errors.emplace_back("entropy_coef: must be >= 0");
    if (!(ppo_clip > 0.0 && ppo_clip < 1.0)) errors.emplace_back("ppo_clip: must lie in (0, 1)");
    if (ppo_epochs == 0) errors.emplace_back("ppo_epochs: must be >= 1");
    if (num_envs == 0) errors.emplace_back("num_envs: must be >= 1");
    if (episode_length == 0) errors.emplace_back("episode_length: must be >= 1");
    if (!(v_floor > 0.0)) errors.emplace_back("v_floor: must be > 0");
    if (!std::isfinite(critic_init)) errors.emplace_back("critic_init: must be finite");
    return errors;
  }
};

/// Per-agent tabular state-value estimates indexed by encoded observation.
struct CriticTable {
  std::vector<std::vector<double>> values;

  CriticTable() = default;
  CriticTable(std::size_t num_agents, std::size_t num_rows, double init)
      : values(num_agents, std::vector<double>(num_rows, init)) {}

  double operator()(std::size_t agent, std::size_t row) const { return values.at(agent).at(row); }
  double& operator()(std::size_t agent, std::size_t row) { return values.at(agent).at(row); }
  std::size_t num_agents() const { return values.size(); }
};

/// One episode of experience. observations has one more entry than actions:
/// observations[t + 1] is the successor of step t.
struct Episode {
  std::vector<std::vector<std::size_t>> observations;  // [t][agent]
  std::vector<std::vector<std::size_t>> actions;       // [t][agent]
  std::vector<std::vector<double>> rewards;            // [t][agent]
  std::vector<char> terminal;                          // [t]; truncation is not terminal
  std::vector<double> consumption;                     // per agent, whole episode

  std::size_t length() const { return actions.size(); }
  const std::vector<std::size_t>& initial_observations() const { return observations.front(); }
};

struct RolloutBuffer {
  std::vector<Episode> episodes;
  std::uint64_t policy_version = 0;

  std::size_t num_samples() const {
    std::size_t n = 0;
    for (const auto& e : episodes) n += e.length();
    return n;
  }
};

/// Actor and critic tables plus the version counter enforcing on-policy updates.
struct LearnerState {
  SoftmaxPolicyProfile policies;
  CriticTable critics;
  std::uint64_t version = 0;

  static LearnerState initial(const Environment& env, double critic_init) {
    LearnerState s;
    s.policies = SoftmaxPolicyProfile::uniform(env.num_observations(), env.action_counts());
    s.critics = CriticTable(env.num_agents(), env.num_observations(), critic_init);
    return s;
  }
};

/// Per-episode, per-agent arrays [agent][t].
struct EpisodeAdvantages {
  std::vector<std::vector<double>> advantages;
  std::vector<std::vector<double>> returns;
};

/// GAE(lambda) per agent; truncated episodes bootstrap from V(s_T).
inline std::vector<EpisodeAdvantages> compute_gae(const RolloutBuffer& buffer, const CriticTable& critic, double gamma,
                                                  double lambda) {
  if (buffer.episodes.empty()) throw DomainError("cannot estimate advantages from an empty buffer");
  std::vector<EpisodeAdvantages> out;
  out.reserve(buffer.episodes.size());
  for (const auto& ep : buffer.episodes) {
    const std::size_t T = ep.length();
    const std::size_t n = critic.num_agents();
    EpisodeAdvantages adv;
    adv.advantages.assign(n, std::vector<double>(T, 0.0));
    adv.returns.assign(n, std::vector<double>(T, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      double running = 0.0;
      for (std::size_t t = T; t-- > 0;) {
        const double v = critic(i, ep.observations[t][i]);
        const double next = ep.terminal[t] != 0 ? 0.0 : critic(i, ep.observations[t + 1][i]);
        const double delta = ep.rewards[t][i] + gamma * next - v;
        running = delta + gamma * lambda * (ep.terminal[t] != 0 ? 0.0 : running);
        adv.advantages[i][t] = running;
        adv.returns[i][t] = running + v;
      }
    }
    out.push_back(std::move(adv));
  }
  return out;
}

struct FairAdvantages {
  std::vector<std::vector<std::vector<double>>> values;  // [episode][agent][t]
  std::vector<std::size_t> floor_hits;                   // per value agent j
};

/// A^F_{i,t} = sum_j c_i(j) A_{j,t} / max(V_j(s0), v_floor) for the
/// proportional-fair objective; sum_j c_i(j) A_{j,t} for the utilitarian one.
/// The initial-state values are constants of the update.
inline FairAdvantages combine_fair_advantages(const RolloutBuffer& buffer, const std::vector<EpisodeAdvantages>& adv,
                                              const CriticTable& critic, const AltruismWeights& weights,
                                              double v_floor, Objective objective = Objective::ProportionalFair) {
  if (adv.size() != buffer.episodes.size()) throw ShapeError("one advantage set per episode expected");
  const std::size_t n = critic.num_agents();
  FairAdvantages out;
  out.floor_hits.assign(n, 0);
  for (std::size_t e = 0; e < adv.size(); ++e) {
    const auto& ep = buffer.episodes[e];
    const std::size_t T = ep.length();
    std::vector<double> inv_v0(n, 1.0);
    if (objective == Objective::ProportionalFair) {
      for (std::size_t j = 0; j < n; ++j) {
        double v0 = critic(j, ep.initial_observations()[j]);
        if (v0 <= v_floor) {
          v0 = v_floor;
          ++out.floor_hits[j];
        }
        inv_v0[j] = 1.0 / v0;
      }
    }
    std::vector<std::vector<double>> fair(n, std::vector<double>(T, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t t = 0; t < T; ++t) {
        double a = 0.0;
        for (std::size_t j = 0; j < n; ++j) a += weights.coefficient(i, j) * adv[e].advantages[j][t] * inv_v0[j];
        fair[i][t] = a;
      }
    }
    out.values.push_back(std::move(fair));
  }
  return out;
}

/// Shifts and scales each agent's advantages to zero mean and unit variance
/// over the whole batch.
inline void normalize_advantages(FairAdvantages& fair) {
  if (fair.values.empty()) return;
  const std::size_t n = fair.values.front().size();
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    double sum_sq = 0.0;
    std::size_t count = 0;
    for (const auto& ep : fair.values) {
      for (double a : ep[i]) {
        sum += a;
        sum_sq += a * a;
        ++count;
      }
    }
    if (count == 0) continue;
    const double mean = sum / static_cast<double>(count);
    const double sd = std::sqrt(std::max(0.0, sum_sq / static_cast<double>(count) - mean * mean));
    for (auto& ep : fair.values) {
      for (double& a : ep[i]) a = (a - mean) / (sd + 1e-8);
    }
  }
}

struct UpdateDiagnostics {
  std::vector<double> actor_loss;
  std::vector<double> critic_loss;
  std::vector<double> entropy;
  std::vector<std::size_t> floor_hits;
};

struct LearningRates {
  double actor = 0.0;
  double critic = 0.0;
};

namespace detail {

inline double entropy_of(const Eigen::VectorXd& pi) {
  double h = 0.0;
  for (Eigen::Index k = 0; k < pi.size(); ++k) {
    if (pi[k] > 0.0) h -= pi[k] * std::log(pi[k]);
  }
  return h;
}

/// d H(softmax(z)) / dz_k = -pi_k (log pi_k + H).
inline Eigen::VectorXd entropy_gradient(const Eigen::VectorXd& pi) {
  const double h = entropy_of(pi);
  Eigen::VectorXd g(pi.size());
  for (Eigen::Index k = 0; k < pi.size(); ++k) g[k] = pi[k] > 0.0 ? -pi[k] * (std::log(pi[k]) + h) : 0.0;
  return g;
}


inline void check_on_policy(const LearnerState& state, const RolloutBuffer& buffer) {
  if (buffer.policy_version != state.version) {
    throw ContractViolation("rollout buffer was collected with policy version " + std::to_string(buffer.policy_version) +
                            " but the learner is at version " + std::to_string(state.version));
  }
  if (buffer.episodes.empty()) throw DomainError("cannot update from an empty buffer");
}

/// Regresses each visited critic row toward the mean of its returns with
/// step 2 * lr. Returns the pre-update mean squared error per agent.
inline std::vector<double> critic_step(CriticTable& critics, const RolloutBuffer& buffer,
                                       const std::vector<EpisodeAdvantages>& adv, double lr) {
  const std::size_t n = critics.num_agents();
  std::vector<double> losses(n, 0.0);
  const double count = static_cast<double>(buffer.num_samples());
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> rows;
    std::vector<double> residual_sum(critics.values[i].size(), 0.0);
    std::vector<std::size_t> visits(critics.values[i].size(), 0);
    for (std::size_t e = 0; e < buffer.episodes.size(); ++e) {
      const auto& ep = buffer.episodes[e];
      for (std::size_t t = 0; t < ep.length(); ++t) {
        const std::size_t o = ep.observations[t][i];
        const double r = critics(i, o) - adv[e].returns[i][t];
        losses[i] += r * r;
        if (visits[o]++ == 0) rows.push_back(o);
        residual_sum[o] += r;
      }
    }
    losses[i] /= count;
    for (auto o : rows) critics(i, o) -= lr * 2.0 * residual_sum[o] / static_cast<double>(visits[o]);
  }
  return losses;
}

}  // namespace detail

/// Batch-mean gradient of E_t[A_t log pi_i(a_i,t | o_i,t)] + beta E_t[H(pi_i(.|o_i,t))]
/// for one agent, as a dense table shaped like its logits.
inline Eigen::MatrixXd actor_gradient(const SoftmaxPolicyProfile& policies, const RolloutBuffer& buffer,
                                      const std::vector<std::vector<double>>& agent_advantages, std::size_t agent,
                                      double entropy_coef = 0.0) {
  const auto& logits = policies.logits(agent);
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(logits.rows(), logits.cols());
  const double inv_count = 1.0 / static_cast<double>(buffer.num_samples());
  for (std::size_t e = 0; e < buffer.episodes.size(); ++e) {
    const auto& ep = buffer.episodes[e];
    for (std::size_t t = 0; t < ep.length(); ++t) {
      const std::size_t o = ep.observations[t][agent];
      const Eigen::VectorXd pi = policies.probabilities(agent, o);
      Eigen::VectorXd g = -pi;
      g[static_cast<Eigen::Index>(ep.actions[t][agent])] += 1.0;
      g *= agent_advantages[e][t];
      if (entropy_coef > 0.0) g += entropy_coef * detail::entropy_gradient(pi);
      grad.row(static_cast<Eigen::Index>(o)) += inv_count * g.transpose();
    }
  }
  return grad;
}

namespace detail {

inline std::vector<std::vector<double>> agent_slice(const FairAdvantages& fair, std::size_t agent) {
  std::vector<std::vector<double>> out;
  for (const auto& ep : fair.values) out.push_back(ep[agent]);
  return out;
}

inline FairAdvantages prepare_advantages(const LearnerState& state, const RolloutBuffer& buffer,
                                         const TrainConfig& cfg, std::vector<EpisodeAdvantages>& adv) {
  adv = compute_gae(buffer, state.critics, cfg.gamma, cfg.gae_lambda);
  auto fair = combine_fair_advantages(buffer, adv, state.critics, AltruismWeights(cfg.alpha), cfg.v_floor,
                                      cfg.objective);
  if (cfg.normalize_advantages) normalize_advantages(fair);
  return fair;
}

}  // namespace detail

/// One Fair MAA2C step: gradient ascent on E_t[A^F log pi] per actor and one
/// descent step on the squared return error per critic.
inline UpdateDiagnostics a2c_update(LearnerState& state, const RolloutBuffer& buffer, const TrainConfig& cfg,
                                    const LearningRates& rates) {
  detail::check_on_policy(state, buffer);
  std::vector<EpisodeAdvantages> adv;
  const auto fair = detail::prepare_advantages(state, buffer, cfg, adv);
  const std::size_t n = state.critics.num_agents();
  const double count = static_cast<double>(buffer.num_samples());

  UpdateDiagnostics diag;
  diag.floor_hits = fair.floor_hits;
  for (std::size_t i = 0; i < n; ++i) {
    double loss = 0.0;
    double entropy = 0.0;
    for (std::size_t e = 0; e < buffer.episodes.size(); ++e) {
      const auto& ep = buffer.episodes[e];
      for (std::size_t t = 0; t < ep.length(); ++t) {
        const Eigen::VectorXd pi = state.policies.probabilities(i, ep.observations[t][i]);
        loss -= fair.values[e][i][t] * std::log(pi[static_cast<Eigen::Index>(ep.actions[t][i])]);
        entropy += detail::entropy_of(pi);
      }
    }
    diag.actor_loss.push_back(loss / count);
    diag.entropy.push_back(entropy / count);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto grad = actor_gradient(state.policies, buffer, detail::agent_slice(fair, i), i, cfg.entropy_coef);
    state.policies.logits(i) += rates.actor * grad;
  }
  diag.critic_loss = detail::critic_step(state.critics, buffer, adv, rates.critic);
  ++state.version;
  return diag;
}

/// Clipped-surrogate gradient for one agent given the behaviour-policy
/// probabilities of the taken actions ([episode][t]).
inline Eigen::MatrixXd ppo_actor_gradient(const SoftmaxPolicyProfile& policies, const RolloutBuffer& buffer,
                                          const std::vector<std::vector<double>>& agent_advantages,
                                          const std::vector<std::vector<double>>& old_probs, std::size_t agent,
                                          double clip, double entropy_coef, double* surrogate = nullptr) {
  const auto& logits = policies.logits(agent);
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(logits.rows(), logits.cols());
  const double inv_count = 1.0 / static_cast<double>(buffer.num_samples());
  double objective = 0.0;
  for (std::size_t e = 0; e < buffer.episodes.size(); ++e) {
    const auto& ep = buffer.episodes[e];
    for (std::size_t t = 0; t < ep.length(); ++t) {
      const std::size_t o = ep.observations[t][agent];
      const auto a = static_cast<Eigen::Index>(ep.actions[t][agent]);
      const Eigen::VectorXd pi = policies.probabilities(agent, o);
      const double ratio = pi[a] / old_probs[e][t];
      const double adv = agent_advantages[e][t];
      const double unclipped = ratio * adv;
      const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip) * adv;
      objective += std::min(unclipped, clipped);
      Eigen::VectorXd g = Eigen::VectorXd::Zero(pi.size());
      // The min takes the unclipped branch unless the ratio left the trust
      // region in the direction favoured by the advantage.
      const bool clipped_active = (adv > 0.0 && ratio > 1.0 + clip) || (adv < 0.0 && ratio < 1.0 - clip);
      if (!clipped_active) {
        g = -pi;
        g[a] += 1.0;
        g *= unclipped;
      }
      if (entropy_coef > 0.0) g += entropy_coef * detail::entropy_gradient(pi);
      grad.row(static_cast<Eigen::Index>(o)) += inv_count * g.transpose();
    }
  }
  if (surrogate != nullptr) *surrogate = objective * inv_count;
  return grad;
}

/// Fair MAPPO: ppo_epochs passes of the clipped surrogate with entropy bonus
/// per actor, and plain squared-error regression per critic each epoch.
inline UpdateDiagnostics ppo_update(LearnerState& state, const RolloutBuffer& buffer, const TrainConfig& cfg,
                                    const LearningRates& rates) {
  detail::check_on_policy(state, buffer);
  std::vector<EpisodeAdvantages> adv;
  const auto fair = detail::prepare_advantages(state, buffer, cfg, adv);
  const std::size_t n = state.critics.num_agents();
  const double count = static_cast<double>(buffer.num_samples());

  // Behaviour probabilities, frozen before the epochs.
  std::vector<std::vector<std::vector<double>>> old_probs(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& ep : buffer.episodes) {
      std::vector<double> p(ep.length());
      for (std::size_t t = 0; t < ep.length(); ++t) {
        p[t] = state.policies.probability(i, ep.observations[t][i], ep.actions[t][i]);
        if (!(p[t] > 0.0)) throw ContractViolation("behaviour probability underflowed to zero");
      }
      old_probs[i].push_back(std::move(p));
    }
  }

  UpdateDiagnostics diag;
  diag.floor_hits = fair.floor_hits;
  diag.actor_loss.assign(n, 0.0);
  diag.entropy.assign(n, 0.0);
  diag.critic_loss.assign(n, 0.0);
  for (std::size_t epoch = 0; epoch < cfg.ppo_epochs; ++epoch) {
    for (std::size_t i = 0; i < n; ++i) {
      double surrogate = 0.0;
      const auto grad = ppo_actor_gradient(state.policies, buffer, detail::agent_slice(fair, i), old_probs[i], i,
                                           cfg.ppo_clip, cfg.entropy_coef, &surrogate);
      if (epoch == 0) {
        diag.actor_loss[i] = -surrogate;
        double entropy = 0.0;
        for (const auto& ep : buffer.episodes) {
          for (std::size_t t = 0; t < ep.length(); ++t) {
            entropy += detail::entropy_of(state.policies.probabilities(i, ep.observations[t][i]));
          }
        }
        diag.entropy[i] = entropy / count;
      }
      state.policies.logits(i) += rates.actor * grad;
    }
    const auto losses = detail::critic_step(state.critics, buffer, adv, rates.critic);
    if (epoch == 0) diag.critic_loss = losses;
  }
  ++state.version;
  return diag;
}

/// One row of the training log (one agent of one episode).
struct LogRow {
  std::size_t step = 0;
  std::size_t episode = 0;
  std::size_t agent = 0;
  double episode_return = 0.0;
  double apples = 0.0;
  double gini = 0.0;
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double entropy = 0.0;
  std::size_t floor_hits = 0;
};

struct TrainResult {
  LearnerState state;
  std::vector<LogRow> log;
  std::size_t steps = 0;
  std::size_t episodes = 0;
};

using EnvFactory = std::function<std::unique_ptr<Environment>()>;

/// splitmix64 finalizer, used to derive independent per-episode seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Rolls out one episode with the current (frozen) policies.
inline Episode collect_episode(Environment& env, const SoftmaxPolicyProfile& policies, std::uint64_t episode_seed,
                               std::size_t max_length) {
  std::mt19937_64 rng(mix_seed(episode_seed, 1));
  Episode ep;
  const std::size_t n = env.num_agents();
  ep.observations.push_back(env.reset(mix_seed(episode_seed, 0)));
  ep.consumption.assign(n, 0.0);
  std::vector<std::size_t> actions(n);
  for (std::size_t t = 0; t < max_length; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      actions[i] = detail::sample_index(policies.probabilities(i, ep.observations.back()[i]), rng);
    }
    EnvStep step = env.step(actions);
    for (std::size_t i = 0; i < n; ++i) {
      if (!(step.rewards[i] > 0.0)) throw ContractViolation("environment produced a non-positive reward");
      ep.consumption[i] += env.tracks_consumption() ? step.consumption[i] : step.rewards[i];
    }
    ep.actions.push_back(actions);
    ep.rewards.push_back(std::move(step.rewards));
    ep.observations.push_back(std::move(step.observations));
    ep.terminal.push_back(0);
    if (step.done) break;
  }
  return ep;
}

/// Alternates on-policy collection over `num_envs` environments and updates
/// until `total_steps` environment steps have been consumed. Deterministic for
/// a fixed config.
inline TrainResult train(const EnvFactory& env_factory, const TrainConfig& cfg) {
  const auto errors = cfg.validate();
  if (!errors.empty()) {
    std::string msg = "invalid training config:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw DomainError(msg);
  }
  std::vector<std::unique_ptr<Environment>> envs;
  for (std::size_t k = 0; k < cfg.num_envs; ++k) envs.push_back(env_factory());
  const std::size_t n = envs.front()->num_agents();

  TrainResult result;
  result.state = LearnerState::initial(*envs.front(), cfg.critic_init);
  const std::size_t length = std::min(cfg.episode_length, envs.front()->episode_length());

  while (result.steps < cfg.total_steps) {
    const double progress = static_cast<double>(result.steps) / static_cast<double>(cfg.total_steps);
    const LearningRates rates{cfg.learning_rate + (cfg.final_learning_rate - cfg.learning_rate) * progress,
                              cfg.critic_learning_rate + (cfg.final_learning_rate - cfg.critic_learning_rate) * progress};
    const std::size_t remaining = cfg.total_steps - result.steps;
    const std::size_t batch = std::min(cfg.num_envs, (remaining + length - 1) / length);

    RolloutBuffer buffer;
    buffer.policy_version = result.state.version;
    for (std::size_t k = 0; k < batch; ++k) {
      const std::uint64_t episode_seed = mix_seed(cfg.seed, result.episodes + k);
      buffer.episodes.push_back(collect_episode(*envs[k], result.state.policies, episode_seed, length));
    }

    if (result.state.version == 0) {
      for (std::size_t pass = 0; pass < cfg.critic_warmup; ++pass) {
        detail::critic_step(result.state.critics, buffer, compute_gae(buffer, result.state.critics, cfg.gamma, cfg.gae_lambda),
                            0.5);
      }
    }
    const auto diag = cfg.algorithm == Algorithm::FairMAA2C ? a2c_update(result.state, buffer, cfg, rates)
                                                            : ppo_update(result.state, buffer, cfg, rates);
    for (const auto& ep : buffer.episodes) {
      result.steps += ep.length();
      const double g = gini(ep.consumption).value;
      for (std::size_t i = 0; i < n; ++i) {
        LogRow row;
        row.step = result.steps;
        row.episode = result.episodes;
        row.agent = i;
        for (const auto& r : ep.rewards) row.episode_return += r[i];
        row.apples = ep.consumption[i];
        row.gini = g;
        row.actor_loss = diag.actor_loss[i];
        row.critic_loss = diag.critic_loss[i];
        row.entropy = diag.entropy[i];
        row.floor_hits = diag.floor_hits[i];
        result.log.push_back(row);
      }
      ++result.episodes;
    }
  }
  return result;
}

}  // namespace fairgame
