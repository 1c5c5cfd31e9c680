#pragma once

// Desk-scale social-dilemma environments behind a common episodic interface.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fairgame/error.hpp"
#include "fairgame/game_core.hpp"
#include "fairgame/markov_game.hpp"

namespace fairgame {

struct EnvStep {
  std::vector<std::size_t> observations;  // per agent
  std::vector<double> rewards;            // per agent, strictly positive
  bool done = false;
  /// Per-agent consumption this step (apples); empty when the environment
  /// has no notion of harvested resources.
  std::vector<double> consumption;
  std::map<std::string, double> info;
};

/// Episodic multi-agent environment with tabular (encoded) observations.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::size_t num_agents() const = 0;
  /// Size of each agent's observation alphabet.
  virtual std::size_t num_observations() const = 0;
  virtual std::size_t num_actions(std::size_t agent) const = 0;
  virtual std::size_t episode_length() const = 0;
  /// True when consumption (apples) is tracked separately from rewards.
  virtual bool tracks_consumption() const { return false; }

  /// Starts a new episode and returns the initial per-agent observations.
  virtual std::vector<std::size_t> reset(std::uint64_t seed) = 0;
  virtual EnvStep step(std::span<const std::size_t> actions) = 0;

  std::vector<std::size_t> action_counts() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < num_agents(); ++i) out.push_back(num_actions(i));
    return out;
  }
};

/// Runs a TabularMarkovGame as a truncated episodic environment. Every agent
/// observes the full state.
class MarkovGameEnv : public Environment {
 public:
  MarkovGameEnv(TabularMarkovGame game, std::size_t episode_length)
      : game_(std::move(game)), episode_length_(episode_length) {
    if (episode_length_ == 0) throw DomainError("episode length must be positive");
  }

  std::size_t num_agents() const override { return game_.num_agents(); }
  std::size_t num_observations() const override { return game_.num_states(); }
  std::size_t num_actions(std::size_t agent) const override { return game_.action_counts().at(agent); }
  std::size_t episode_length() const override { return episode_length_; }
  const TabularMarkovGame& game() const { return game_; }
  std::size_t state() const { return state_; }

  std::vector<std::size_t> reset(std::uint64_t seed) override {
    rng_.seed(seed);
    t_ = 0;
    state_ = detail::sample_index(std::span<const double>(game_.initial_dist()), rng_);
    return std::vector<std::size_t>(num_agents(), state_);
  }

  EnvStep step(std::span<const std::size_t> actions) override {
    const std::size_t joint = game_.encode_joint(actions);
    EnvStep out;
    for (std::size_t i = 0; i < num_agents(); ++i) out.rewards.push_back(game_.reward(i, state_, joint));
    state_ = detail::sample_index(game_.transition_row(state_, joint), rng_);
    ++t_;
    out.observations.assign(num_agents(), state_);
    out.done = t_ >= episode_length_;
    return out;
  }

 private:
  TabularMarkovGame game_;
  std::size_t episode_length_;
  std::size_t state_ = 0;
  std::size_t t_ = 0;
  std::mt19937_64 rng_;
};

/// Two-agent repeated 2x2 dilemma (actions 0 = C, 1 = D) with a single state.
class RepeatedMatrixEnv : public Environment {
 public:
  RepeatedMatrixEnv(DilemmaPayoffs payoffs, std::size_t episode_length)
      : payoffs_(payoffs), game_(make_dilemma_game(payoffs)), episode_length_(episode_length) {
    require_positive(payoffs_);
    if (episode_length_ == 0) throw DomainError("episode length must be positive");
  }

  std::size_t num_agents() const override { return 2; }
  std::size_t num_observations() const override { return 1; }
  std::size_t num_actions(std::size_t) const override { return 2; }
  std::size_t episode_length() const override { return episode_length_; }
  const DilemmaPayoffs& payoffs() const { return payoffs_; }

  std::vector<std::size_t> reset(std::uint64_t) override {
    t_ = 0;
    return {0, 0};
  }

  EnvStep step(std::span<const std::size_t> actions) override {
    if (actions.size() != 2) throw ShapeError("repeated matrix game expects two actions");
    const std::size_t joint = game_.encode(actions);
    EnvStep out;
    out.rewards = {game_.payoff(joint, 0), game_.payoff(joint, 1)};
    out.observations = {0, 0};
    ++t_;
    out.done = t_ >= episode_length_;
    return out;
  }

  /// Single-state Markov game with the stage payoffs as rewards.
  TabularMarkovGame to_markov_game(double gamma) const {
    std::vector<double> rewards(2 * 4);
    for (std::size_t i = 0; i < 2; ++i) {
      for (std::size_t a = 0; a < 4; ++a) rewards[i * 4 + a] = game_.payoff(a, i);
    }
    return TabularMarkovGame({2, 2}, 1, std::vector<double>(4, 1.0), std::move(rewards), {1.0}, gamma);
  }

 private:
  DilemmaPayoffs payoffs_;
  NormalFormGame game_;
  std::size_t episode_length_;
  std::size_t t_ = 0;
};

struct MiniCleanupConfig {
  std::size_t width = 8;
  std::size_t height = 8;
  std::size_t num_agents = 3;
  std::size_t river_rows = 2;
  double regen_rate = 0.05;
  double pollution_increment = 0.01;
  double clean_amount = 0.015;
  double pollution_threshold = 0.55;
  double initial_pollution = 0.5;
  std::size_t episode_length = 100;
  double apple_reward = 1.0;
  double base_reward = 0.01;

  void validate() const {
    if (width == 0 || height == 0) throw DomainError("grid dimensions must be positive");
    if (river_rows >= height) throw DomainError("river must leave at least one orchard row");
    if (num_agents == 0) throw DomainError("mini-cleanup needs at least one agent");
    if (num_agents > width * height) throw DomainError("more agents than free cells");
    if (!(regen_rate >= 0.0 && regen_rate <= 1.0)) throw DomainError("regen_rate must lie in [0, 1]");
    if (!(pollution_threshold > 0.0 && pollution_threshold <= 1.0)) throw DomainError("pollution_threshold must lie in (0, 1]");
    if (!(initial_pollution >= 0.0 && initial_pollution <= 1.0)) throw DomainError("initial_pollution must lie in [0, 1]");
    if (pollution_increment < 0.0 || clean_amount < 0.0) throw DomainError("pollution rates must be nonnegative");
    if (episode_length == 0) throw DomainError("episode length must be positive");
    if (!(base_reward > 0.0)) throw DomainError("base_reward must be > 0 to keep rewards positive");
    if (apple_reward < 0.0) throw DomainError("apple_reward must be nonnegative");
  }
};

/// Small CleanUp analog: agents harvest apples in the orchard while a global
/// pollution level, reduced only by cleaning in the river, gates regrowth.
///
/// Step order: moves (clamped to the grid, cells may be shared), harvest in
/// agent-index order, cleaning, pollution increment and clamp, apple spawns.
class MiniCleanupEnv : public Environment {
 public:
  enum Action : std::size_t { kUp = 0, kDown, kLeft, kRight, kClean, kNoop, kNumActions };

  static constexpr std::size_t kPollutionBuckets = 4;
  static constexpr std::size_t kBitmapStates = 512;  // 3x3 apple window

  explicit MiniCleanupEnv(MiniCleanupConfig config) : cfg_(config) {
    cfg_.validate();
    apples_.assign(cfg_.width * cfg_.height, 0);
  }

  std::size_t num_agents() const override { return cfg_.num_agents; }
  std::size_t num_observations() const override {
    return cfg_.width * cfg_.height * kPollutionBuckets * kBitmapStates;
  }
  std::size_t num_actions(std::size_t) const override { return kNumActions; }
  std::size_t episode_length() const override { return cfg_.episode_length; }
  bool tracks_consumption() const override { return true; }

  const MiniCleanupConfig& config() const { return cfg_; }
  double pollution() const { return pollution_; }
  const std::vector<std::size_t>& positions() const { return positions_; }
  /// Cell indices (row * width + col) currently holding an apple.
  std::vector<std::size_t> apple_cells() const {
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < apples_.size(); ++c) {
      if (apples_[c] != 0) out.push_back(c);
    }
    return out;
  }
  std::size_t apples_spawned() const { return spawned_; }
  std::size_t apples_harvested() const { return harvested_; }
  bool is_river(std::size_t cell) const { return cell / cfg_.width < cfg_.river_rows; }

  std::vector<std::size_t> reset(std::uint64_t seed) override {
    rng_.seed(seed);
    t_ = 0;
    spawned_ = 0;
    harvested_ = 0;
    pollution_ = cfg_.initial_pollution;
    std::fill(apples_.begin(), apples_.end(), 0);
    std::vector<std::size_t> cells(cfg_.width * cfg_.height);
    for (std::size_t c = 0; c < cells.size(); ++c) cells[c] = c;
    // Partial Fisher-Yates for distinct random start cells.
    for (std::size_t i = 0; i < cfg_.num_agents; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, cells.size() - 1);
      std::swap(cells[i], cells[pick(rng_)]);
    }
    positions_.assign(cells.begin(), cells.begin() + static_cast<std::ptrdiff_t>(cfg_.num_agents));
    return observe();
  }

  EnvStep step(std::span<const std::size_t> actions) override {
    if (actions.size() != cfg_.num_agents) throw ShapeError("one action per agent expected");
    EnvStep out;
    out.rewards.assign(cfg_.num_agents, cfg_.base_reward);
    out.consumption.assign(cfg_.num_agents, 0.0);

    for (std::size_t i = 0; i < cfg_.num_agents; ++i) {
      if (actions[i] >= kNumActions) throw ShapeError("action index out of range");
      positions_[i] = moved(positions_[i], actions[i]);
    }
    for (std::size_t i = 0; i < cfg_.num_agents; ++i) {
      auto& cell = apples_[positions_[i]];
      if (cell != 0) {
        cell = 0;
        ++harvested_;
        out.rewards[i] += cfg_.apple_reward;
        out.consumption[i] += 1.0;
      }
    }
    std::size_t cleaners = 0;
    for (std::size_t i = 0; i < cfg_.num_agents; ++i) {
      if (actions[i] == kClean && is_river(positions_[i])) ++cleaners;
    }
    pollution_ += cfg_.pollution_increment - cfg_.clean_amount * static_cast<double>(cleaners);
    pollution_ = std::clamp(pollution_, 0.0, 1.0);

    if (pollution_ < cfg_.pollution_threshold && cfg_.regen_rate > 0.0) {
      std::vector<char> occupied(apples_.size(), 0);
      for (auto p : positions_) occupied[p] = 1;
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      for (std::size_t c = cfg_.river_rows * cfg_.width; c < apples_.size(); ++c) {
        if (apples_[c] != 0 || occupied[c] != 0) continue;
        if (unit(rng_) < cfg_.regen_rate) {
          apples_[c] = 1;
          ++spawned_;
        }
      }
    }

    ++t_;
    out.done = t_ >= cfg_.episode_length;
    out.observations = observe();
    out.info["pollution"] = pollution_;
    out.info["cleaners"] = static_cast<double>(cleaners);
    return out;
  }

  /// (cell, pollution bucket, 3x3 apple bitmap) packed into one index.
  std::size_t encode_observation(std::size_t agent) const {
    const std::size_t pos = positions_.at(agent);
    const auto bucket = std::min<std::size_t>(kPollutionBuckets - 1,
                                              static_cast<std::size_t>(pollution_ * kPollutionBuckets));
    const auto row = static_cast<long>(pos / cfg_.width);
    const auto col = static_cast<long>(pos % cfg_.width);
    std::size_t bitmap = 0;
    std::size_t bit = 0;
    for (long dr = -1; dr <= 1; ++dr) {
      for (long dc = -1; dc <= 1; ++dc, ++bit) {
        const long r = row + dr;
        const long c = col + dc;
        if (r < 0 || c < 0 || r >= static_cast<long>(cfg_.height) || c >= static_cast<long>(cfg_.width)) continue;
        if (apples_[static_cast<std::size_t>(r) * cfg_.width + static_cast<std::size_t>(c)] != 0) bitmap |= (1u << bit);
      }
    }
    return (pos * kPollutionBuckets + bucket) * kBitmapStates + bitmap;
  }

 private:
  std::size_t moved(std::size_t pos, std::size_t action) const {
    std::size_t row = pos / cfg_.width;
    std::size_t col = pos % cfg_.width;
    switch (action) {
      case kUp: row = row == 0 ? 0 : row - 1; break;
      case kDown: row = std::min(row + 1, cfg_.height - 1); break;
      case kLeft: col = col == 0 ? 0 : col - 1; break;
      case kRight: col = std::min(col + 1, cfg_.width - 1); break;
      default: break;
    }
    return row * cfg_.width + col;
  }

  std::vector<std::size_t> observe() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < cfg_.num_agents; ++i) out.push_back(encode_observation(i));
    return out;
  }

  MiniCleanupConfig cfg_;
  std::vector<std::size_t> positions_;
  std::vector<char> apples_;
  double pollution_ = 0.5;
  std::size_t t_ = 0;
  std::size_t spawned_ = 0;
  std::size_t harvested_ = 0;
  std::mt19937_64 rng_;
};

/// Random property-test instance: Dirichlet(1) transition rows and rewards
/// uniform in (0.1, 1.0]. Deterministic for a given seed.
inline TabularMarkovGame random_markov_game(std::size_t num_agents, std::size_t num_states,
                                            std::vector<std::size_t> action_counts, double gamma,
                                            std::uint64_t seed) {
  if (num_agents == 0 || num_states == 0) throw DomainError("sizes must be at least 1");
  if (action_counts.size() != num_agents) throw ShapeError("one action count per agent expected");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t joint = 1;
  for (auto c : action_counts) joint *= c;

  auto simplex = [&](std::size_t dim) {
    std::vector<double> v(dim);
    if (dim == 1) {
      v[0] = 1.0;
      return v;
    }
    double total = 0.0;
    for (auto& x : v) {
      x = -std::log(1.0 - unit(rng));
      total += x;
    }
    for (auto& x : v) x /= total;
    return v;
  };

  std::vector<double> transitions;
  transitions.reserve(num_states * joint * num_states);
  for (std::size_t row = 0; row < num_states * joint; ++row) {
    auto v = simplex(num_states);
    transitions.insert(transitions.end(), v.begin(), v.end());
  }
  std::vector<double> rewards(num_agents * num_states * joint);
  // 1 - U lies in (0, 1], so rewards land in (0.1, 1.0].
  for (auto& r : rewards) r = 0.1 + 0.9 * (1.0 - unit(rng));
  auto rho0 = simplex(num_states);
  return TabularMarkovGame(std::move(action_counts), num_states, std::move(transitions), std::move(rewards),
                           std::move(rho0), gamma);
}

}  // namespace fairgame
