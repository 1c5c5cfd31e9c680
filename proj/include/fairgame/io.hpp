#pragma once

// JSON documents: normal-form games, Markov games, policy snapshots,
// environment specs and experiment configs.

#include <json.hpp>

#include <cstddef>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fairgame/environments.hpp"
#include "fairgame/error.hpp"
#include "fairgame/fair_learning.hpp"
#include "fairgame/game_core.hpp"
#include "fairgame/markov_game.hpp"

namespace fairgame {

using nlohmann::json;

/// A config/game file failed validation; carries every problem found.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<std::string> problems)
      : std::runtime_error(join(problems)), problems_(std::move(problems)) {}
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& p) {
    std::string out;
    for (const auto& s : p) out += (out.empty() ? "" : "; ") + s;
    return out;
  }
  std::vector<std::string> problems_;
};

/// Parses JSON text, reporting syntax errors as "source:line:column: message".
inline json parse_json_text(const std::string& text, const std::string& source = "<input>") {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1;
    std::size_t column = 1;
    const std::size_t upto = std::min(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t k = 0; k < upto; ++k) {
      if (text[k] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw SchemaError(source + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + e.what());
  }
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw SchemaError("cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline json load_json_file(const std::string& path) { return parse_json_text(read_text_file(path), path); }

namespace detail {

template <typename T>
T get_field(const json& j, const char* name, const std::string& where) {
  if (!j.contains(name)) throw SchemaError(where + ": missing field '" + name + "'");
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw SchemaError(where + ": field '" + name + "' has the wrong type");
  }
}

}  // namespace detail

/// A parsed game file; `dilemma` is set for T/R/S/P documents and for
/// symmetric 2x2 games.
struct GameDocument {
  NormalFormGame game;
  std::optional<DilemmaPayoffs> dilemma;
};

inline GameDocument game_from_json(const json& j) {
  if (!j.is_object()) throw SchemaError("game file must be a JSON object");
  if (j.contains("T")) {
    DilemmaPayoffs d{detail::get_field<double>(j, "T", "game"), detail::get_field<double>(j, "R", "game"),
                     detail::get_field<double>(j, "S", "game"), detail::get_field<double>(j, "P", "game")};
    return {make_dilemma_game(d), d};
  }
  const auto players = detail::get_field<std::size_t>(j, "players", "game");
  auto strategies = detail::get_field<std::vector<std::size_t>>(j, "strategies", "game");
  auto payoffs = detail::get_field<std::vector<double>>(j, "payoffs", "game");
  if (strategies.size() != players) throw SchemaError("game: 'strategies' must list one count per player");
  NormalFormGame g(std::move(strategies), std::move(payoffs));
  auto dilemma = extract_symmetric_dilemma(g);
  return {std::move(g), dilemma};
}

inline json game_to_json(const NormalFormGame& g) {
  return json{{"players", g.num_players()}, {"strategies", g.strategy_counts()}, {"payoffs", g.payoffs()}};
}

namespace detail {

inline std::string join_indices(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) out += (k ? "," : "") + std::to_string(v[k]);
  return out;
}

}  // namespace detail

/// {"agents", "states", "actions", "gamma", "rho0", "transitions": {"s,a0,a1": [...]},
///  "rewards": {"i,s,a0,a1": r}}
inline TabularMarkovGame markov_game_from_json(const json& j) {
  const auto agents = detail::get_field<std::size_t>(j, "agents", "markov game");
  const auto states = detail::get_field<std::size_t>(j, "states", "markov game");
  auto actions = detail::get_field<std::vector<std::size_t>>(j, "actions", "markov game");
  const auto gamma = detail::get_field<double>(j, "gamma", "markov game");
  auto rho0 = detail::get_field<std::vector<double>>(j, "rho0", "markov game");
  if (actions.size() != agents) throw SchemaError("markov game: 'actions' must list one count per agent");
  std::size_t joint = 1;
  for (auto a : actions) joint *= a;

  std::vector<double> transitions(states * joint * states, 0.0);
  std::vector<double> rewards(agents * states * joint, 0.0);
  const auto& tj = j.at("transitions");
  const auto& rj = j.at("rewards");
  for (std::size_t s = 0; s < states; ++s) {
    for (std::size_t a = 0; a < joint; ++a) {
      std::vector<std::size_t> key{s};
      std::size_t rest = a;
      std::vector<std::size_t> digits(agents);
      for (std::size_t i = agents; i-- > 0;) {
        digits[i] = rest % actions[i];
        rest /= actions[i];
      }
      key.insert(key.end(), digits.begin(), digits.end());
      const auto name = detail::join_indices(key);
      if (!tj.contains(name)) throw SchemaError("markov game: missing transition row '" + name + "'");
      const auto row = tj.at(name).get<std::vector<double>>();
      if (row.size() != states) throw SchemaError("markov game: transition row '" + name + "' has wrong length");
      std::copy(row.begin(), row.end(), transitions.begin() + static_cast<std::ptrdiff_t>((s * joint + a) * states));
      for (std::size_t i = 0; i < agents; ++i) {
        const auto rname = std::to_string(i) + "," + name;
        if (!rj.contains(rname)) throw SchemaError("markov game: missing reward '" + rname + "'");
        rewards[(i * states + s) * joint + a] = rj.at(rname).get<double>();
      }
    }
  }
  return TabularMarkovGame(std::move(actions), states, std::move(transitions), std::move(rewards), std::move(rho0),
                           gamma);
}

inline json markov_game_to_json(const TabularMarkovGame& g) {
  json tj = json::object();
  json rj = json::object();
  for (std::size_t s = 0; s < g.num_states(); ++s) {
    for (std::size_t a = 0; a < g.num_joint_actions(); ++a) {
      std::vector<std::size_t> key{s};
      const auto digits = g.decode_joint(a);
      key.insert(key.end(), digits.begin(), digits.end());
      const auto name = detail::join_indices(key);
      auto row = g.transition_row(s, a);
      tj[name] = std::vector<double>(row.begin(), row.end());
      for (std::size_t i = 0; i < g.num_agents(); ++i) rj[std::to_string(i) + "," + name] = g.reward(i, s, a);
    }
  }
  return json{{"agents", g.num_agents()}, {"states", g.num_states()}, {"actions", g.action_counts()},
              {"gamma", g.discount()},    {"rho0", g.initial_dist()},  {"transitions", tj},
              {"rewards", rj}};
}

/// JSON array of per-agent logit matrices (arrays of rows).
inline json policies_to_json(const SoftmaxPolicyProfile& p) {
  json out = json::array();
  for (const auto& m : p.all_logits()) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(m.cols()));
      for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
      rows.push_back(row);
    }
    out.push_back(std::move(rows));
  }
  return out;
}

inline SoftmaxPolicyProfile policies_from_json(const json& j) {
  if (!j.is_array()) throw SchemaError("policy file must be a JSON array of logit matrices");
  std::vector<Eigen::MatrixXd> logits;
  for (const auto& agent : j) {
    const auto rows = agent.get<std::vector<std::vector<double>>>();
    if (rows.empty() || rows.front().empty()) throw SchemaError("policy file: empty logit matrix");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != rows.front().size()) throw SchemaError("policy file: ragged logit matrix");
      for (std::size_t c = 0; c < rows[r].size(); ++c) {
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
      }
    }
    logits.push_back(std::move(m));
  }
  return SoftmaxPolicyProfile(std::move(logits));
}

/// Which environment to build and with what parameters.
struct EnvSpec {
  enum class Kind { Matrix, Cleanup, Markov };
  Kind kind = Kind::Matrix;
  DilemmaPayoffs payoffs{5, 3, 1, 2};
  MiniCleanupConfig cleanup;
  std::optional<TabularMarkovGame> markov;
  std::size_t episode_length = 100;

  /// Factory producing fresh instances with the given episode length.
  EnvFactory factory() const {
    switch (kind) {
      case Kind::Matrix:
        return [p = payoffs, len = episode_length] { return std::make_unique<RepeatedMatrixEnv>(p, len); };
      case Kind::Cleanup: {
        auto cfg = cleanup;
        cfg.episode_length = episode_length;
        return [cfg] { return std::make_unique<MiniCleanupEnv>(cfg); };
      }
      case Kind::Markov:
        return [g = *markov, len = episode_length] { return std::make_unique<MarkovGameEnv>(g, len); };
    }
    throw SchemaError("unknown environment kind");
  }
};

inline const char* to_string(EnvSpec::Kind k) {
  switch (k) {
    case EnvSpec::Kind::Matrix: return "matrix";
    case EnvSpec::Kind::Cleanup: return "cleanup";
    case EnvSpec::Kind::Markov: return "markov";
  }
  return "matrix";
}

inline json env_spec_to_json(const EnvSpec& e) {
  json j{{"type", to_string(e.kind)}, {"episode_length", e.episode_length}};
  switch (e.kind) {
    case EnvSpec::Kind::Matrix:
      j["T"] = e.payoffs.T;
      j["R"] = e.payoffs.R;
      j["S"] = e.payoffs.S;
      j["P"] = e.payoffs.P;
      break;
    case EnvSpec::Kind::Cleanup: {
      const auto& c = e.cleanup;
      j["width"] = c.width;
      j["height"] = c.height;
      j["num_agents"] = c.num_agents;
      j["river_rows"] = c.river_rows;
      j["regen_rate"] = c.regen_rate;
      j["pollution_increment"] = c.pollution_increment;
      j["clean_amount"] = c.clean_amount;
      j["pollution_threshold"] = c.pollution_threshold;
      j["initial_pollution"] = c.initial_pollution;
      j["apple_reward"] = c.apple_reward;
      j["base_reward"] = c.base_reward;
      break;
    }
    case EnvSpec::Kind::Markov:
      j["game"] = markov_game_to_json(*e.markov);
      break;
  }
  return j;
}

namespace detail {

/// Reads an optional field into `out`, recording a named problem on type errors.
template <typename T>
void read_opt(const json& j, const char* name, T& out, std::vector<std::string>& problems, const std::string& scope) {
  if (!j.contains(name)) return;
  try {
    out = j.at(name).get<T>();
  } catch (const json::exception&) {
    problems.push_back(scope + name + ": wrong type");
  }
}

}  // namespace detail

/// Parses {"type": "matrix"|"cleanup"|"markov", ...}. Shorthands
/// "matrix:T,R,S,P" and "cleanup" are accepted as strings.
inline EnvSpec env_spec_from_json(const json& j, std::vector<std::string>& problems) {
  EnvSpec e;
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "cleanup") {
      e.kind = EnvSpec::Kind::Cleanup;
      return e;
    }
    if (s.rfind("matrix:", 0) == 0) {
      std::vector<double> v;
      std::istringstream ss(s.substr(7));
      std::string cell;
      while (std::getline(ss, cell, ',')) {
        try {
          v.push_back(std::stod(cell));
        } catch (const std::exception&) {
          problems.push_back("env: bad number '" + cell + "'");
        }
      }
      if (v.size() != 4) {
        problems.push_back("env: matrix shorthand needs T,R,S,P");
      } else {
        e.payoffs = {v[0], v[1], v[2], v[3]};
      }
      return e;
    }
    problems.push_back("env: unknown shorthand '" + s + "'");
    return e;
  }
  if (!j.is_object()) {
    problems.push_back("env: must be an object or shorthand string");
    return e;
  }
  const auto type = j.value("type", std::string("matrix"));
  detail::read_opt(j, "episode_length", e.episode_length, problems, "env.");
  if (e.episode_length == 0) problems.emplace_back("env.episode_length: must be >= 1");
  if (type == "matrix") {
    e.kind = EnvSpec::Kind::Matrix;
    detail::read_opt(j, "T", e.payoffs.T, problems, "env.");
    detail::read_opt(j, "R", e.payoffs.R, problems, "env.");
    detail::read_opt(j, "S", e.payoffs.S, problems, "env.");
    detail::read_opt(j, "P", e.payoffs.P, problems, "env.");
    if (!(e.payoffs.T > 0 && e.payoffs.R > 0 && e.payoffs.S > 0 && e.payoffs.P > 0)) {
      problems.emplace_back("env: payoffs must be strictly positive (T, R, S, P > 0)");
    }
  } else if (type == "cleanup") {
    e.kind = EnvSpec::Kind::Cleanup;
    auto& c = e.cleanup;
    detail::read_opt(j, "width", c.width, problems, "env.");
    detail::read_opt(j, "height", c.height, problems, "env.");
    detail::read_opt(j, "num_agents", c.num_agents, problems, "env.");
    detail::read_opt(j, "river_rows", c.river_rows, problems, "env.");
    detail::read_opt(j, "regen_rate", c.regen_rate, problems, "env.");
    detail::read_opt(j, "pollution_increment", c.pollution_increment, problems, "env.");
    detail::read_opt(j, "clean_amount", c.clean_amount, problems, "env.");
    detail::read_opt(j, "pollution_threshold", c.pollution_threshold, problems, "env.");
    detail::read_opt(j, "initial_pollution", c.initial_pollution, problems, "env.");
    detail::read_opt(j, "apple_reward", c.apple_reward, problems, "env.");
    detail::read_opt(j, "base_reward", c.base_reward, problems, "env.");
    c.episode_length = e.episode_length == 0 ? 1 : e.episode_length;
    try {
      c.validate();
    } catch (const DomainError& err) {
      problems.push_back(std::string("env: ") + err.what());
    }
  } else if (type == "markov") {
    e.kind = EnvSpec::Kind::Markov;
    try {
      if (j.contains("file")) {
        e.markov = markov_game_from_json(load_json_file(j.at("file").get<std::string>()));
      } else if (j.contains("game")) {
        e.markov = markov_game_from_json(j.at("game"));
      } else {
        problems.emplace_back("env: markov environment needs 'game' or 'file'");
      }
    } catch (const std::exception& err) {
      problems.push_back(std::string("env.game: ") + err.what());
    }
  } else {
    problems.push_back("env.type: unknown environment type '" + type + "'");
  }
  return e;
}

inline EnvSpec env_spec_from_json(const json& j) {
  std::vector<std::string> problems;
  auto e = env_spec_from_json(j, problems);
  if (!problems.empty()) throw ValidationError(problems);
  return e;
}

/// Everything a `train` invocation needs.
struct ExperimentConfig {
  EnvSpec env;
  TrainConfig train;
  std::vector<double> alphas{0.0};
  std::string output = "runs";
  json raw;
};

inline json train_config_to_json(const TrainConfig& c) {
  return json{{"algorithm", to_string(c.algorithm)},
              {"objective", to_string(c.objective)},
              {"alpha", c.alpha},
              {"learning_rate", c.learning_rate},
              {"critic_learning_rate", c.critic_learning_rate},
              {"final_learning_rate", c.final_learning_rate},
              {"gamma", c.gamma},
              {"gae_lambda", c.gae_lambda},
              {"entropy_coef", c.entropy_coef},
              {"ppo_clip", c.ppo_clip},
              {"ppo_epochs", c.ppo_epochs},
              {"num_envs", c.num_envs},
              {"episode_length", c.episode_length},
              {"total_steps", c.total_steps},
              {"seed", c.seed},
              {"v_floor", c.v_floor},
              {"critic_init", c.critic_init},
              {"critic_warmup", c.critic_warmup},
              {"normalize_advantages", c.normalize_advantages}};
}

/// Validates the whole document before anything runs; every bad field is
/// reported by name in a single ValidationError.
inline ExperimentConfig experiment_config_from_json(const json& j) {
  std::vector<std::string> problems;
  ExperimentConfig cfg;
  cfg.raw = j;
  if (!j.is_object()) throw ValidationError({"config: must be a JSON object"});

  if (j.contains("mode")) {
    const auto mode = j.at("mode").is_string() ? j.at("mode").get<std::string>() : std::string();
    if (mode != "analyze" && mode != "train" && mode != "eval" && mode != "verify") {
      problems.emplace_back("mode: must be one of analyze, train, eval, verify");
    }
  }
  if (j.contains("env")) {
    cfg.env = env_spec_from_json(j.at("env"), problems);
  } else {
    problems.emplace_back("env: missing");
  }

  auto& t = cfg.train;
  if (j.contains("algorithm")) {
    const auto a = j.at("algorithm").is_string() ? j.at("algorithm").get<std::string>() : std::string();
    if (a == "FairMAA2C" || a == "a2c") {
      t.algorithm = Algorithm::FairMAA2C;
    } else if (a == "FairMAPPO" || a == "ppo") {
      t.algorithm = Algorithm::FairMAPPO;
      if (!j.contains("learning_rate")) t.learning_rate = 0.001;
    } else {
      problems.emplace_back("algorithm: must be FairMAA2C or FairMAPPO");
    }
  }
  if (j.contains("objective")) {
    const auto o = j.at("objective").is_string() ? j.at("objective").get<std::string>() : std::string();
    if (o == "ProportionalFair" || o == "PF") {
      t.objective = Objective::ProportionalFair;
    } else if (o == "UtilitarianWelfare" || o == "UW") {
      t.objective = Objective::UtilitarianWelfare;
    } else {
      problems.emplace_back("objective: must be ProportionalFair or UtilitarianWelfare");
    }
  }
  detail::read_opt(j, "learning_rate", t.learning_rate, problems, "");
  t.critic_learning_rate = t.learning_rate;
  detail::read_opt(j, "critic_learning_rate", t.critic_learning_rate, problems, "");
  detail::read_opt(j, "final_learning_rate", t.final_learning_rate, problems, "");
  detail::read_opt(j, "gamma", t.gamma, problems, "");
  detail::read_opt(j, "gae_lambda", t.gae_lambda, problems, "");
  detail::read_opt(j, "entropy_coef", t.entropy_coef, problems, "");
  detail::read_opt(j, "ppo_clip", t.ppo_clip, problems, "");
  detail::read_opt(j, "ppo_epochs", t.ppo_epochs, problems, "");
  detail::read_opt(j, "num_envs", t.num_envs, problems, "");
  detail::read_opt(j, "total_steps", t.total_steps, problems, "");
  detail::read_opt(j, "seed", t.seed, problems, "");
  detail::read_opt(j, "v_floor", t.v_floor, problems, "");
  detail::read_opt(j, "critic_init", t.critic_init, problems, "");
  detail::read_opt(j, "critic_warmup", t.critic_warmup, problems, "");
  detail::read_opt(j, "normalize_advantages", t.normalize_advantages, problems, "");
  detail::read_opt(j, "output", cfg.output, problems, "");
  t.episode_length = cfg.env.episode_length;
  detail::read_opt(j, "episode_length", t.episode_length, problems, "");
  cfg.env.episode_length = t.episode_length;

  if (j.contains("alpha")) {
    const auto& a = j.at("alpha");
    try {
      cfg.alphas = a.is_array() ? a.get<std::vector<double>>() : std::vector<double>{a.get<double>()};
    } catch (const json::exception&) {
      problems.emplace_back("alpha: must be a number or an array of numbers");
    }
  }
  if (cfg.alphas.empty()) problems.emplace_back("alpha: sweep must not be empty");
  for (double a : cfg.alphas) {
    if (!(a >= 0.0 && a <= 1.0)) problems.push_back("alpha: sweep value " + std::to_string(a) + " outside [0, 1]");
  }
  t.alpha = cfg.alphas.empty() ? 0.0 : cfg.alphas.front();
  for (auto& e : t.validate()) {
    if (e.rfind("alpha", 0) != 0) problems.push_back(std::move(e));
  }
  if (!problems.empty()) throw ValidationError(problems);
  return cfg;
}

}  // namespace fairgame
