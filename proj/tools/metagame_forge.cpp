// Copyright 2026 The metagame-forge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// metagame_forge: experiment runner and game utilities.
//
//   metagame_forge run --config grid.json [--seeds 0..9] [--jobs 4] [--out dir]
//   metagame_forge gen-game --kind elo --dim 100 --noise 1 --seed 3 -o elo.json
//   metagame_forge eval --game g.json --row r.json --col c.json --metric exploitability
//   metagame_forge aggregate --in metrics.csv --out summary.csv
//
// Exit status: 0 on success, 1 when a run failed, 2 on invalid input.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "metagame/metagame.hpp"

namespace {

constexpr int kExitRunFailed = 1;
constexpr int kExitBadInput = 2;

using namespace metagame;

// A strategy file holds a JSON array of probabilities or {"probs": [...]}.
MixedStrategy load_strategy(const std::string& path, std::size_t expected) {
  std::ifstream in(path);
  if (!in) throw GameError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
    if (j.is_object()) j = j.at("probs");
    const auto v = j.get<std::vector<double>>();
    if (v.size() != expected) {
      throw GameError("strategy '" + path + "' has " + std::to_string(v.size()) +
                      " entries, game expects " + std::to_string(expected));
    }
    return MixedStrategy(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
  } catch (const nlohmann::json::exception& e) {
    throw GameError("strategy '" + path + "' is malformed: " + e.what());
  }
}

std::string sig12(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

int cmd_run(const std::string& config_path, const std::string& seeds, std::size_t jobs,
            const std::string& out_dir) {
  ExperimentConfig config;
  try {
    config = load_experiment(config_path);
    if (!seeds.empty()) config.seeds = parse_seed_range(seeds);
    if (jobs > 0) config.jobs = jobs;
    if (!out_dir.empty()) config.output_dir = out_dir;
    config.validate();
  } catch (const std::exception& e) {
    std::cerr << "invalid config: " << e.what() << '\n';
    return kExitBadInput;
  }
  ExperimentResult result;
  try {
    result = run_experiment(config, &std::cerr);
    write_outputs(result, config.output_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitBadInput;
  }
  std::cerr << result.runs - result.failures.size() << "/" << result.runs
            << " runs completed, " << result.rows.size() << " rows written to "
            << config.output_dir << '\n';
  return result.failures.empty() ? 0 : kExitRunFailed;
}

int cmd_gen_game(const std::string& kind, std::size_t dim, double noise, std::uint64_t seed,
                 const std::string& builtin_name, const std::string& out) {
  try {
    GameGenSpec spec;
    spec.kind = parse_game_kind(kind);
    spec.dim = dim;
    spec.noise = noise;
    spec.seed = seed;
    spec.builtin_name = builtin_name;
    if (spec.kind == GameKind::kBuiltin && builtin_name.empty()) {
      throw GameError("kind=builtin needs --builtin <name>");
    }
    save_game(generate(spec), out);
  } catch (const std::exception& e) {
    std::cerr << "gen-game: " << e.what() << '\n';
    return kExitBadInput;
  }
  return 0;
}

// At an exact follower tie the advantage is the pessimistic minimum, so on
// stackelberg_table1 the point (1/3, 2/3) itself evaluates to 5/3 while any
// point slightly toward D evaluates to about 11/3.
int cmd_eval(const std::string& game_path, const std::string& row_path,
             const std::string& col_path, const std::string& metric) {
  try {
    const BimatrixGame game = load_game(game_path);
    const MixedStrategy row = load_strategy(row_path, game.rows());
    const MixedStrategy col = load_strategy(col_path, game.cols());
    if (metric == "exploitability") {
      std::cout << sig12(exploitability(game, row, col)) << '\n';
    } else if (metric == "advantage_row") {
      std::cout << sig12(advantage(game, Player::kRow, row)) << '\n';
    } else if (metric == "advantage_col") {
      std::cout << sig12(advantage(game, Player::kCol, col)) << '\n';
    } else if (metric == "payoff") {
      const PayoffPair p = payoff(game, row, col);
      std::cout << sig12(p.row) << ' ' << sig12(p.col) << '\n';
    } else {
      throw GameError("unknown metric '" + metric + "'");
    }
  } catch (const std::exception& e) {
    std::cerr << "eval: " << e.what() << '\n';
    return kExitBadInput;
  }
  return 0;
}

int cmd_aggregate(const std::string& in, const std::string& out) {
  try {
    write_summary_csv(aggregate_csv(in), out);
  } catch (const std::exception& e) {
    std::cerr << "aggregate: " << e.what() << '\n';
    return kExitBadInput;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"metagame_forge: PSRO-family experiments on two-player matrix games"};
  app.require_subcommand(1);

  std::string config_path, seeds, out_dir;
  std::size_t jobs = 0;
  auto* run = app.add_subcommand("run", "Run an experiment grid from a JSON config");
  run->add_option("--config", config_path, "Experiment config")->required();
  run->add_option("--seeds", seeds, "Seed range a..b (inclusive), replaces the config seeds");
  run->add_option("--jobs", jobs, "Concurrent runs");
  run->add_option("--out", out_dir, "Output directory");

  std::string kind, builtin_name, game_out;
  std::size_t dim = 0;
  double noise = 0.0;
  std::uint64_t seed = 0;
  auto* gen = app.add_subcommand("gen-game", "Write a generated or built-in game as JSON");
  gen->add_option("--kind", kind,
                  "symmetric_zero_sum | transitive | elo | general_sum_random | builtin")
      ->required();
  gen->add_option("--dim", dim, "Number of pure strategies per player");
  gen->add_option("--noise", noise, "Elo noise standard deviation");
  gen->add_option("--seed", seed, "Generator seed");
  gen->add_option("--builtin", builtin_name,
                  "stackelberg_table1 | stag_hunt_table2 | rps | matching_pennies");
  gen->add_option("-o,--out", game_out, "Output path")->required();

  std::string game_path, row_path, col_path, metric;
  auto* eval = app.add_subcommand("eval", "Evaluate a joint strategy on a game");
  eval->add_option("--game", game_path, "Game JSON")->required();
  eval->add_option("--row", row_path, "Row strategy JSON")->required();
  eval->add_option("--col", col_path, "Column strategy JSON")->required();
  eval->add_option("--metric", metric, "exploitability | advantage_row | advantage_col | payoff")
      ->required();

  std::string agg_in, agg_out;
  auto* agg = app.add_subcommand("aggregate", "Summarize metrics.csv across seeds");
  agg->add_option("--in", agg_in, "metrics.csv")->required();
  agg->add_option("--out", agg_out, "summary.csv")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitBadInput;
  }

  if (*run) return cmd_run(config_path, seeds, jobs, out_dir);
  if (*gen) return cmd_gen_game(kind, dim, noise, seed, builtin_name, game_out);
  if (*eval) return cmd_eval(game_path, row_path, col_path, metric);
  return cmd_aggregate(agg_in, agg_out);
}
