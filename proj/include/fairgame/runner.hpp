#pragma once

// Command implementations shared by the `fairgame` CLI and the tests.

#include <openssl/evp.h>

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "fairgame/environments.hpp"
#include "fairgame/fair_learning.hpp"
#include "fairgame/game_core.hpp"
#include "fairgame/io.hpp"
#include "fairgame/metrics.hpp"
#include "fairgame/verify.hpp"

namespace fairgame {

inline constexpr const char* kVersion = "0.1.0";

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
  std::ostringstream os;
  for (unsigned int k = 0; k < len; ++k) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[k]);
  return os.str();
}

inline std::string sha256_file(const std::filesystem::path& p) { return sha256_hex(read_text_file(p.string())); }

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace detail {

inline json profiles_json(const NormalFormGame& g, const std::vector<std::size_t>& profiles) {
  json out = json::array();
  for (auto k : profiles) out.push_back(g.decode(k));
  return out;
}

}  // namespace detail

/// Dilemma class, altruism level (closed form and brute force), TS <= R^2 and
/// the pure equilibria of G and of G(alpha) for each requested alpha.
inline json cmd_analyze(const GameDocument& doc, const std::vector<double>& alphas) {
  const auto& g = doc.game;
  if (!g.strictly_positive()) {
    throw DomainError("all payoffs must be strictly positive (positivity is required by the log transform)");
  }
  json out;
  out["players"] = g.num_players();
  out["strategies"] = g.strategy_counts();
  out["nash"] = detail::profiles_json(g, find_pure_nash(g));
  out["social_optima"] = detail::profiles_json(g, social_optima(g));
  if (doc.dilemma) {
    const auto& d = *doc.dilemma;
    const auto cls = classify_social_dilemma(d);
    out["payoffs"] = {{"T", d.T}, {"R", d.R}, {"S", d.S}, {"P", d.P}};
    out["class"] = to_string(cls.kind);
    out["inequalities"] = {{"R>P", cls.reward_over_punishment},
                           {"R>S", cls.reward_over_sucker},
                           {"2R>=T+S", cls.cooperation_over_exploit},
                           {"T>R or P>S", cls.greed_or_fear}};
    out["ts_le_r2"] = check_consistency_ts_r2(d);
    if (cls.is_dilemma() && check_consistency_ts_r2(d)) {
      out["alpha_g"] = altruism_level_closed_form(d);
    } else {
      out["alpha_g"] = nullptr;
    }
  } else {
    out["class"] = nullptr;
    out["alpha_g"] = nullptr;
  }
  const auto brute = altruism_level_bruteforce(g, 1e-6);
  out["alpha_g_bruteforce"] = brute ? json(*brute) : json(nullptr);
  json ext = json::array();
  for (double a : alphas) {
    const auto transformed = altruistic_extension(g, a);
    ext.push_back({{"alpha", a}, {"nash", detail::profiles_json(g, find_pure_nash(transformed))}});
  }
  out["extensions"] = ext;
  return out;
}

struct RunOutcome {
  std::string run_id;
  std::filesystem::path directory;
  bool ok = false;
  std::string error;
};

inline std::string run_id_for(const TrainConfig& t) {
  return std::string(to_string(t.algorithm)) + "-" + to_string(t.objective) + "-alpha" + format_number(t.alpha) +
         "-seed" + std::to_string(t.seed);
}

/// Trains one sweep item and writes <out>/<run-id>/{config.json, log.csv,
/// snapshot.json, panels/, manifest.json}.
inline RunOutcome run_single(const ExperimentConfig& cfg, const TrainConfig& tc, const std::filesystem::path& out_dir) {
  RunOutcome res;
  res.run_id = run_id_for(tc);
  res.directory = out_dir / res.run_id;
  const std::string started = utc_timestamp();
  json manifest;
  manifest["version"] = kVersion;
  manifest["seed"] = tc.seed;
  manifest["run_id"] = res.run_id;
  manifest["step_counting"] = "total_steps counts global environment steps summed over all parallel environments";
  std::vector<std::string> files;
  try {
    std::filesystem::create_directories(res.directory);
    json config_snapshot{{"env", env_spec_to_json(cfg.env)}, {"train", train_config_to_json(tc)}};
    std::ofstream(res.directory / "config.json") << config_snapshot.dump(2) << '\n';
    files.emplace_back("config.json");
    manifest["config"] = config_snapshot;

    const auto result = train(cfg.env.factory(), tc);
    {
      std::ofstream os(res.directory / "log.csv");
      write_log_csv<LogRow>(os, result.log);
    }
    files.emplace_back("log.csv");
    std::ofstream(res.directory / "snapshot.json") << policies_to_json(result.state.policies).dump() << '\n';
    files.emplace_back("snapshot.json");
    for (const auto& p : emit_plot_data(res.directory / "log.csv", res.directory / "panels")) {
      files.push_back(std::filesystem::relative(p, res.directory).generic_string());
    }
    manifest["steps"] = result.steps;
    manifest["episodes"] = result.episodes;
    manifest["status"] = "ok";
    res.ok = true;
  } catch (const std::exception& e) {
    manifest["status"] = "failed";
    manifest["error"] = e.what();
    res.error = e.what();
  }
  json inventory = json::array();
  for (const auto& f : files) {
    std::error_code ec;
    if (std::filesystem::exists(res.directory / f, ec)) {
      inventory.push_back({{"path", f}, {"sha256", sha256_file(res.directory / f)}});
    }
  }
  manifest["files"] = inventory;
  manifest["started_at"] = started;
  manifest["finished_at"] = utc_timestamp();
  std::filesystem::create_directories(res.directory);
  std::ofstream(res.directory / "manifest.json") << manifest.dump(2) << '\n';
  return res;
}

/// Re-hashes every file listed in a manifest; returns the paths that differ.
inline std::vector<std::string> verify_manifest(const std::filesystem::path& run_dir) {
  const auto manifest = load_json_file((run_dir / "manifest.json").string());
  std::vector<std::string> bad;
  for (const auto& f : manifest.at("files")) {
    const auto path = f.at("path").get<std::string>();
    if (!std::filesystem::exists(run_dir / path) || sha256_file(run_dir / path) != f.at("sha256").get<std::string>()) {
      bad.push_back(path);
    }
  }
  return bad;
}

/// Runs the alpha sweep; item k uses seed + k. With jobs > 1 items run
/// concurrently (they share nothing).
inline std::vector<RunOutcome> cmd_train(const ExperimentConfig& cfg, std::size_t jobs = 1) {
  std::vector<TrainConfig> items;
  for (std::size_t k = 0; k < cfg.alphas.size(); ++k) {
    TrainConfig t = cfg.train;
    t.alpha = cfg.alphas[k];
    t.seed = cfg.train.seed + k;
    items.push_back(t);
  }
  const std::filesystem::path out(cfg.output);
  std::vector<RunOutcome> outcomes(items.size());
  jobs = std::max<std::size_t>(1, jobs);
  for (std::size_t start = 0; start < items.size(); start += jobs) {
    std::vector<std::future<RunOutcome>> pending;
    for (std::size_t k = start; k < std::min(items.size(), start + jobs); ++k) {
      pending.push_back(std::async(jobs > 1 ? std::launch::async : std::launch::deferred,
                                   [&, k] { return run_single(cfg, items[k], out); }));
    }
    for (std::size_t k = 0; k < pending.size(); ++k) outcomes[start + k] = pending[k].get();
  }
  return outcomes;
}

/// Runs frozen policies and summarizes returns, apples and Gini per episode.
inline json cmd_eval(const SoftmaxPolicyProfile& policies, const EnvSpec& spec, std::size_t episodes,
                     std::uint64_t seed) {
  if (episodes == 0) throw DomainError("evaluation needs at least one episode");
  auto env = spec.factory()();
  if (policies.num_agents() != env->num_agents()) throw ShapeError("snapshot agent count does not match environment");
  for (std::size_t i = 0; i < env->num_agents(); ++i) {
    const auto& m = policies.logits(i);
    if (static_cast<std::size_t>(m.rows()) != env->num_observations() ||
        static_cast<std::size_t>(m.cols()) != env->num_actions(i)) {
      throw ShapeError("snapshot logit table " + std::to_string(i) + " does not match environment shape");
    }
  }
  const std::size_t n = env->num_agents();
  std::vector<double> returns;
  std::vector<double> apples;
  std::vector<double> ginis;
  std::vector<double> per_agent_return(n, 0.0);
  const bool matrix = spec.kind == EnvSpec::Kind::Matrix;
  std::vector<double> joint_counts(4, 0.0);
  std::vector<double> cooperation(n, 0.0);
  double steps = 0.0;
  for (std::size_t e = 0; e < episodes; ++e) {
    const auto ep = collect_episode(*env, policies, mix_seed(seed, e), env->episode_length());
    double total_return = 0.0;
    for (std::size_t t = 0; t < ep.length(); ++t) {
      for (std::size_t i = 0; i < n; ++i) {
        total_return += ep.rewards[t][i];
        per_agent_return[i] += ep.rewards[t][i];
      }
      if (matrix) {
        joint_counts[ep.actions[t][0] * 2 + ep.actions[t][1]] += 1.0;
        for (std::size_t i = 0; i < n; ++i) cooperation[i] += ep.actions[t][i] == 0 ? 1.0 : 0.0;
      }
      steps += 1.0;
    }
    returns.push_back(total_return / static_cast<double>(n));
    double a = 0.0;
    for (double c : ep.consumption) a += c;
    apples.push_back(a);
    ginis.push_back(gini(ep.consumption).value);
  }
  auto stats = [](const std::vector<double>& v) {
    double sum = 0.0;
    for (double x : v) sum += x;
    return json{{"mean", sum / static_cast<double>(v.size())},
                {"min", *std::min_element(v.begin(), v.end())},
                {"max", *std::max_element(v.begin(), v.end())}};
  };
  json out{{"episodes", episodes}, {"return", stats(returns)}, {"apples", stats(apples)}, {"gini", stats(ginis)}};
  json per_agent = json::array();
  for (double r : per_agent_return) per_agent.push_back(r / static_cast<double>(episodes));
  out["per_agent_return"] = per_agent;
  if (matrix) {
    const double cc = joint_counts[0] / steps;
    out["joint_frequencies"] = {{"CC", cc}, {"CD", joint_counts[1] / steps}, {"DC", joint_counts[2] / steps},
                                {"DD", joint_counts[3] / steps}};
    out["cooperation_rate"] = cc;
    out["cooperation_rate_se"] = std::sqrt(cc * (1.0 - cc) / steps);
    json agent_coop = json::array();
    for (double c : cooperation) agent_coop.push_back(c / steps);
    out["agent_cooperation"] = agent_coop;
  }
  return out;
}

inline json suite_to_json(const SuiteReport& r) {
  return json{{"suite", r.name}, {"passed", r.passed()}, {"checks", r.checks}, {"violations", r.violations}};
}

/// Runs one named suite, or every suite for "all".
inline json cmd_verify(const std::string& suite) {
  json out = json::array();
  if (suite == "all") {
    for (const auto& name : verify_suite_names()) out.push_back(suite_to_json(run_verify_suite(name)));
  } else {
    out.push_back(suite_to_json(run_verify_suite(suite)));
  }
  return out;
}

}  // namespace fairgame
