// fairgame: analyze games, train fair learners, evaluate snapshots, run the
// oracle suites and render training curves.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "fairgame/fairgame.hpp"

namespace {

using fairgame::json;

constexpr int kRuntimeFailure = 1;
constexpr int kValidationFailure = 2;

fairgame::EnvSpec parse_env_argument(const std::string& arg) {
  if (!arg.empty() && arg.front() == '{') return fairgame::env_spec_from_json(fairgame::parse_json_text(arg, "--env"));
  if (std::filesystem::exists(arg)) return fairgame::env_spec_from_json(fairgame::load_json_file(arg));
  return fairgame::env_spec_from_json(json(arg));
}

std::vector<double> parse_alpha_list(const std::string& text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = std::min(text.find(',', start), text.size());
    const auto item = text.substr(start, end - start);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || !(v >= 0.0 && v <= 1.0)) {
      throw fairgame::ValidationError({"--alpha: '" + item + "' is not a number in [0, 1]"});
    }
    out.push_back(v);
    start = end + 1;
  }
  return out;
}

void apply_seed_override(fairgame::ExperimentConfig& cfg) {
  const char* env = std::getenv("FAIRGAME_SEED");
  if (env == nullptr || *env == '\0') return;
  char* end = nullptr;
  const auto v = std::strtoull(env, &end, 10);
  if (*end != '\0') throw fairgame::ValidationError({"FAIRGAME_SEED: not an unsigned integer"});
  cfg.train.seed = v;
}

template <typename F>
int guarded(F&& body) {
  try {
    return body();
  } catch (const fairgame::ValidationError& e) {
    for (const auto& p : e.problems()) std::cerr << "error: " << p << '\n';
    return kValidationFailure;
  } catch (const fairgame::SchemaError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidationFailure;
  } catch (const std::invalid_argument& e) {  // ShapeError
    std::cerr << "error: " << e.what() << '\n';
    return kValidationFailure;
  } catch (const std::domain_error& e) {  // DomainError, ConsistencyError
    std::cerr << "error: " << e.what() << '\n';
    return kValidationFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fair altruistic games: analysis, training and verification"};
  app.require_subcommand(1);
  app.set_version_flag("--version", fairgame::kVersion);

  auto* analyze = app.add_subcommand("analyze", "Classify a game and report altruism levels and equilibria");
  std::string game_file;
  std::string alpha_text;
  analyze->add_option("game", game_file, "Game JSON file")->required();
  analyze->add_option("--alpha", alpha_text, "Comma-separated altruism weights");

  auto* train = app.add_subcommand("train", "Run an alpha sweep from a config file");
  std::string config_file;
  std::size_t jobs = 1;
  train->add_option("config", config_file, "Experiment config JSON")->required();
  train->add_option("--jobs", jobs, "Sweep items to run concurrently")->check(CLI::PositiveNumber);

  auto* eval = app.add_subcommand("eval", "Evaluate a frozen policy snapshot");
  std::string snapshot_file;
  std::string env_text;
  std::size_t episodes = 100;
  std::uint64_t eval_seed = 0;
  eval->add_option("snapshot", snapshot_file, "Snapshot JSON")->required();
  eval->add_option("--env", env_text, "matrix:T,R,S,P | cleanup | env JSON file | inline JSON")->required();
  eval->add_option("--episodes", episodes, "Episodes to run")->check(CLI::PositiveNumber);
  eval->add_option("--seed", eval_seed, "Evaluation seed");

  auto* verify = app.add_subcommand("verify", "Run a seeded property suite");
  std::string suite = "all";
  verify->add_option("suite", suite, "Suite name or 'all'");

  auto* plot = app.add_subcommand("plot", "Render rolling panels from a training log");
  std::string log_file;
  std::string out_dir;
  std::size_t window = 50;
  plot->add_option("log", log_file, "log.csv from a run")->required();
  plot->add_option("--out", out_dir, "Output directory")->required();
  plot->add_option("--window", window, "Rolling window in episodes")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kValidationFailure;
  }

  if (analyze->parsed()) {
    return guarded([&] {
      const auto doc = fairgame::game_from_json(fairgame::load_json_file(game_file));
      const auto alphas = alpha_text.empty() ? std::vector<double>{0.0, 1.0} : parse_alpha_list(alpha_text);
      std::cout << fairgame::cmd_analyze(doc, alphas).dump(2) << '\n';
      return 0;
    });
  }
  if (train->parsed()) {
    return guarded([&] {
      auto cfg = fairgame::experiment_config_from_json(fairgame::load_json_file(config_file));
      apply_seed_override(cfg);
      const auto outcomes = fairgame::cmd_train(cfg, jobs);
      json summary = json::array();
      std::size_t ok = 0;
      for (const auto& o : outcomes) {
        summary.push_back({{"run_id", o.run_id}, {"directory", o.directory.string()}, {"ok", o.ok}, {"error", o.error}});
        ok += o.ok ? 1 : 0;
        if (!o.ok) std::cerr << "run " << o.run_id << " failed: " << o.error << '\n';
      }
      std::cout << summary.dump(2) << '\n';
      return ok == 0 ? kRuntimeFailure : 0;
    });
  }
  if (eval->parsed()) {
    return guarded([&] {
      const auto policies = fairgame::policies_from_json(fairgame::load_json_file(snapshot_file));
      const auto spec = parse_env_argument(env_text);
      std::cout << fairgame::cmd_eval(policies, spec, episodes, eval_seed).dump(2) << '\n';
      return 0;
    });
  }
  if (verify->parsed()) {
    return guarded([&] {
      const auto& names = fairgame::verify_suite_names();
      if (suite != "all" && std::find(names.begin(), names.end(), suite) == names.end()) {
        throw fairgame::ValidationError({"suite: unknown suite '" + suite + "'"});
      }
      const auto report = fairgame::cmd_verify(suite);
      std::cout << report.dump(2) << '\n';
      bool passed = true;
      for (const auto& r : report) {
        if (!r.at("passed").get<bool>()) {
          passed = false;
          for (const auto& v : r.at("violations")) std::cerr << r.at("suite").get<std::string>() << ": " << v.get<std::string>() << '\n';
        }
      }
      return passed ? 0 : kRuntimeFailure;
    });
  }
  if (plot->parsed()) {
    return guarded([&] {
      for (const auto& p : fairgame::emit_plot_data(log_file, out_dir, window)) std::cout << p.string() << '\n';
      return 0;
    });
  }
  return kValidationFailure;
}
