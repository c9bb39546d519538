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

#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <thread>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "metagame/engine.hpp"
#include "metagame/game.hpp"
#include "metagame/types.hpp"

namespace metagame {

// Raised for malformed experiment configurations; the CLI maps it to exit 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Formatting

// Shortest decimal string that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) out[static_cast<std::size_t>(i)] = kDigits[v & 0xf];
  return out;
}

// ---------------------------------------------------------------------------
// Experiment configuration

// A game entry is either a generator spec or a payoff file. A generator spec
// without an explicit seed draws a fresh game per run seed.
struct GameEntry {
  GameGenSpec spec;
  bool fixed_seed = false;
  std::string path;  // non-empty for file-backed games

  bool from_file() const { return !path.empty(); }

  std::string label() const {
    if (from_file()) return std::filesystem::path(path).stem().string();
    return spec.family();
  }

  // Canonical identity used in run ids.
  std::string key() const {
    if (from_file()) return "file:" + path;
    std::ostringstream os;
    os << to_string(spec.kind) << ":" << spec.dim << ":" << format_double(spec.noise) << ":"
       << (fixed_seed ? std::to_string(spec.seed) : std::string("run")) << ":"
       << spec.builtin_name;
    return os.str();
  }
};

struct AlgorithmEntry {
  std::string name;    // label written to metrics.csv
  std::string preset;  // one of preset_names()
  nlohmann::json overrides = nlohmann::json::object();
};

struct ExperimentConfig {
  std::vector<GameEntry> games;
  std::vector<AlgorithmEntry> algorithms;
  RunMode mode = RunMode::kSelfPlay;
  std::vector<std::uint64_t> seeds;
  std::size_t max_iterations = 50;
  std::string output_dir = "out";
  std::size_t jobs = 1;
  nlohmann::json params = nlohmann::json::object();  // applied to every algorithm

  void validate() const {
    if (games.empty()) throw ConfigError("config lists no games");
    if (algorithms.empty()) throw ConfigError("config lists no algorithms");
    if (seeds.empty()) throw ConfigError("config lists no seeds");
    if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
    std::vector<std::string> names;
    for (const auto& a : algorithms) {
      if (a.name.empty() || a.name.find_first_of(",\t\n\"") != std::string::npos) {
        throw ConfigError("algorithm name '" + a.name + "' is not a valid CSV field");
      }
      names.push_back(a.name);
    }
    std::sort(names.begin(), names.end());
    if (std::adjacent_find(names.begin(), names.end()) != names.end()) {
      throw ConfigError("algorithm names must be unique");
    }
  }
};

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{
      "vanilla_psro",         "diversity_psro",       "sc_psro",
      "sc_psro_no_diversity", "sc_psro_no_lookahead", "sc_psro_no_clipping"};
  return names;
}

inline void apply_overrides(AlgorithmConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("algorithm parameters must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "lambda_d") c.lambda_d = value.get<double>();
      else if (key == "lambda_1") c.lambda_1 = value.get<double>();
      else if (key == "lr") c.lr = value.get<double>();
      else if (key == "im") c.im = value.get<double>();
      else if (key == "clip_fraction") c.clip_fraction = value.get<double>();
      else if (key == "clipping_enabled") c.clipping_enabled = value.get<bool>();
      else if (key == "use_restricted_lookahead") c.use_restricted_lookahead = value.get<bool>();
      else if (key == "keep_old_on_reject") c.keep_old_on_reject = value.get<bool>();
      else if (key == "fp_random_init") c.fp_random_init = value.get<bool>();
      else if (key == "fp_max_iters") c.fp_max_iters = value.get<std::size_t>();
      else if (key == "fp_tol") c.fp_tol = value.get<double>();
      else if (key == "init_pop_size") c.init_pop_size = value.get<std::size_t>();
      else throw ConfigError("unknown algorithm parameter '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad algorithm parameter: ") + e.what());
  }
}

// Builds the AlgorithmConfig for a preset. Shared parameters are applied
// before the preset's defining switch so an ablation stays an ablation;
// per-entry overrides come last.
inline AlgorithmConfig make_algorithm_config(const std::string& preset,
                                             const nlohmann::json& shared,
                                             const nlohmann::json& overrides) {
  AlgorithmConfig c;
  if (preset == "vanilla_psro" || preset == "diversity_psro") c.clipping_enabled = false;
  apply_overrides(c, shared);
  if (preset == "vanilla_psro") {
    c.variant = Variant::kVanillaPsro;
  } else if (preset == "diversity_psro") {
    c.variant = Variant::kDiversityPsro;
  } else if (preset == "sc_psro") {
    c.variant = Variant::kScPsro;
  } else if (preset == "sc_psro_no_diversity") {
    c.variant = Variant::kScPsro;
    c.lambda_d = 0.0;
  } else if (preset == "sc_psro_no_lookahead") {
    c.variant = Variant::kScPsro;
    c.lambda_d = 1.0;
  } else if (preset == "sc_psro_no_clipping") {
    c.variant = Variant::kScPsro;
    c.clipping_enabled = false;
  } else {
    throw ConfigError("unknown algorithm preset '" + preset + "'");
  }
  apply_overrides(c, overrides);
  return c;
}

// Parses "a..b" (inclusive) or a single integer.
inline std::vector<std::uint64_t> parse_seed_range(std::string_view text) {
  auto parse_one = [&](std::string_view s) {
    std::uint64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || s.empty()) {
      throw ConfigError("bad seed '" + std::string(s) + "'");
    }
    return v;
  };
  std::vector<std::uint64_t> out;
  const auto dots = text.find("..");
  if (dots == std::string_view::npos) {
    out.push_back(parse_one(text));
    return out;
  }
  const std::uint64_t lo = parse_one(text.substr(0, dots));
  const std::uint64_t hi = parse_one(text.substr(dots + 2));
  if (hi < lo) throw ConfigError("empty seed range '" + std::string(text) + "'");
  for (std::uint64_t s = lo;; ++s) {
    out.push_back(s);
    if (s == hi) break;
  }
  return out;
}

inline std::vector<std::uint64_t> seeds_from_json(const nlohmann::json& j) {
  if (j.is_string()) return parse_seed_range(j.get<std::string>());
  if (j.is_array()) {
    std::vector<std::uint64_t> out;
    for (const auto& v : j) out.push_back(v.get<std::uint64_t>());
    return out;
  }
  if (j.is_object()) {
    const auto lo = j.at("from").get<std::uint64_t>();
    const auto hi = j.at("to").get<std::uint64_t>();
    if (hi < lo) throw ConfigError("empty seed range");
    return parse_seed_range(std::to_string(lo) + ".." + std::to_string(hi));
  }
  throw ConfigError("seeds must be a list, a range string \"a..b\" or {from, to}");
}

inline GameEntry game_entry_from_json(const nlohmann::json& j, const std::string& base_dir) {
  GameEntry g;
  if (j.is_string() || j.contains("file")) {
    std::filesystem::path p = j.is_string() ? j.get<std::string>() : j.at("file").get<std::string>();
    if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
    g.path = p.lexically_normal().string();
    return g;
  }
  if (j.contains("builtin")) {
    g.spec.kind = GameKind::kBuiltin;
    g.spec.builtin_name = j.at("builtin").get<std::string>();
    builtin(g.spec.builtin_name);  // rejects unknown names
    g.fixed_seed = true;
    return g;
  }
  g.spec.kind = parse_game_kind(j.at("kind").get<std::string>());
  if (g.spec.kind == GameKind::kBuiltin) {
    g.spec.builtin_name = j.at("name").get<std::string>();
    builtin(g.spec.builtin_name);
    g.fixed_seed = true;
    return g;
  }
  g.spec.dim = j.at("dim").get<std::size_t>();
  g.spec.noise = j.value("noise", 0.0);
  if (j.contains("seed")) {
    g.spec.seed = j.at("seed").get<std::uint64_t>();
    g.fixed_seed = true;
  }
  g.spec.validate();
  return g;
}

// `base_dir` resolves relative game file paths.
inline ExperimentConfig experiment_from_json(const nlohmann::json& j,
                                             const std::string& base_dir = {}) {
  ExperimentConfig c;
  try {
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");
    for (const auto& g : j.at("games")) c.games.push_back(game_entry_from_json(g, base_dir));
    for (const auto& a : j.at("algorithms")) {
      AlgorithmEntry e;
      if (a.is_string()) {
        e.preset = a.get<std::string>();
      } else {
        e.preset = a.at("preset").get<std::string>();
        e.overrides = a.value("params", nlohmann::json::object());
      }
      e.name = a.is_object() ? a.value("name", e.preset) : e.preset;
      c.algorithms.push_back(std::move(e));
    }
    c.mode = parse_mode(j.value("mode", std::string("self_play")));
    c.seeds = seeds_from_json(j.at("seeds"));
    c.max_iterations = j.value("max_iterations", c.max_iterations);
    c.output_dir = j.value("output_dir", c.output_dir);
    c.jobs = j.value("jobs", c.jobs);
    c.params = j.value("params", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  } catch (const GameError& e) {
    throw ConfigError(e.what());
  }
  c.validate();
  // Surface bad parameters before any run starts.
  for (const auto& a : c.algorithms) {
    try {
      make_algorithm_config(a.preset, c.params, a.overrides).validate();
    } catch (const GameError& e) {
      throw ConfigError("algorithm '" + a.name + "': " + e.what());
    }
  }
  return c;
}

inline ExperimentConfig load_experiment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return experiment_from_json(j, std::filesystem::path(path).parent_path().string());
}

// ---------------------------------------------------------------------------
// Metrics

inline const std::vector<std::string>& metric_columns() {
  static const std::vector<std::string> cols{
      "run_id",       "algorithm",    "game",        "seed",        "iteration",
      "exploitability", "reward_row", "reward_col",  "joint_reward", "pop_size_row",
      "pop_size_col", "clipped_row",  "clipped_col", "wall_ms"};
  return cols;
}

struct MetricRow {
  std::string run_id;
  std::string algorithm;
  std::string game;
  std::uint64_t seed = 0;
  std::size_t iteration = 0;
  double exploitability = 0.0;
  double reward_row = 0.0;
  double reward_col = 0.0;
  double joint_reward = 0.0;
  std::size_t pop_size_row = 0;
  std::size_t pop_size_col = 0;
  std::size_t clipped_row = 0;
  std::size_t clipped_col = 0;
  double wall_ms = 0.0;
};

inline MetricRow metric_row(const std::string& run_id, const std::string& algorithm,
                            const std::string& game, std::uint64_t seed,
                            const IterationReport& r) {
  MetricRow m;
  m.run_id = run_id;
  m.algorithm = algorithm;
  m.game = game;
  m.seed = seed;
  m.iteration = r.iteration;
  m.exploitability = r.exploitability;
  m.reward_row = r.reward_row;
  m.reward_col = r.reward_col;
  m.joint_reward = r.reward_row + r.reward_col;
  m.pop_size_row = r.pop_sizes[0];
  m.pop_size_col = r.pop_sizes[1];
  m.clipped_row = r.clipped_sizes[0];
  m.clipped_col = r.clipped_sizes[1];
  m.wall_ms = r.wall_ms;
  return m;
}

inline std::string csv_header() {
  std::string out;
  for (const auto& c : metric_columns()) {
    if (!out.empty()) out += ',';
    out += c;
  }
  return out;
}

inline std::string to_csv_line(const MetricRow& m) {
  std::ostringstream os;
  os << m.run_id << ',' << m.algorithm << ',' << m.game << ',' << m.seed << ',' << m.iteration
     << ',' << format_double(m.exploitability) << ',' << format_double(m.reward_row) << ','
     << format_double(m.reward_col) << ',' << format_double(m.joint_reward) << ','
     << m.pop_size_row << ',' << m.pop_size_col << ',' << m.clipped_row << ',' << m.clipped_col
     << ',' << format_double(m.wall_ms);
  return os.str();
}

inline void sort_rows(std::vector<MetricRow>& rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const MetricRow& a, const MetricRow& b) {
    return std::tie(a.run_id, a.iteration) < std::tie(b.run_id, b.iteration);
  });
}

inline void write_metrics_csv(const std::vector<MetricRow>& rows, std::ostream& out) {
  out << csv_header() << '\n';
  for (const auto& r : rows) out << to_csv_line(r) << '\n';
}

namespace detail {

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view s, std::size_t line_no) {
  T v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw GameError("metrics line " + std::to_string(line_no) + ": bad number '" +
                    std::string(s) + "'");
  }
  return v;
}

}  // namespace detail

inline std::vector<MetricRow> read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw GameError("metrics file is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != csv_header()) throw GameError("metrics header does not match the schema");
  std::vector<MetricRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = detail::split(line, ',');
    if (f.size() != metric_columns().size()) {
      throw GameError("metrics line " + std::to_string(line_no) + " has " +
                      std::to_string(f.size()) + " fields");
    }
    MetricRow m;
    m.run_id = std::string(f[0]);
    m.algorithm = std::string(f[1]);
    m.game = std::string(f[2]);
    m.seed = detail::parse_number<std::uint64_t>(f[3], line_no);
    m.iteration = detail::parse_number<std::size_t>(f[4], line_no);
    m.exploitability = detail::parse_number<double>(f[5], line_no);
    m.reward_row = detail::parse_number<double>(f[6], line_no);
    m.reward_col = detail::parse_number<double>(f[7], line_no);
    m.joint_reward = detail::parse_number<double>(f[8], line_no);
    m.pop_size_row = detail::parse_number<std::size_t>(f[9], line_no);
    m.pop_size_col = detail::parse_number<std::size_t>(f[10], line_no);
    m.clipped_row = detail::parse_number<std::size_t>(f[11], line_no);
    m.clipped_col = detail::parse_number<std::size_t>(f[12], line_no);
    m.wall_ms = detail::parse_number<double>(f[13], line_no);
    rows.push_back(std::move(m));
  }
  return rows;
}

inline std::vector<MetricRow> read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw GameError("cannot open '" + path + "'");
  return read_metrics_csv(in);
}

// ---------------------------------------------------------------------------
// Aggregation

// Metrics summarized across seeds, in summary.csv column order.
inline const std::vector<std::string>& summary_metrics() {
  static const std::vector<std::string> names{
      "exploitability", "reward_row",   "reward_col",  "joint_reward",
      "pop_size_row",   "pop_size_col", "clipped_row", "clipped_col"};
  return names;
}

inline std::vector<double> metric_values(const MetricRow& m) {
  return {m.exploitability,
          m.reward_row,
          m.reward_col,
          m.joint_reward,
          static_cast<double>(m.pop_size_row),
          static_cast<double>(m.pop_size_col),
          static_cast<double>(m.clipped_row),
          static_cast<double>(m.clipped_col)};
}

struct SummaryRow {
  std::string algorithm;
  std::string game;
  std::size_t iteration = 0;
  std::size_t count = 0;  // runs that reported this iteration
  std::vector<double> mean;
  std::vector<double> std;  // population standard deviation
};

// Groups by (algorithm, game family, iteration); a cell is summarized over
// the runs that reached it.
inline std::vector<SummaryRow> aggregate_rows(const std::vector<MetricRow>& rows) {
  using Key = std::tuple<std::string, std::string, std::size_t>;
  std::map<Key, std::vector<std::vector<double>>> cells;
  for (const auto& r : rows) {
    cells[{r.algorithm, r.game, r.iteration}].push_back(metric_values(r));
  }
  std::vector<SummaryRow> out;
  out.reserve(cells.size());
  const std::size_t k = summary_metrics().size();
  for (const auto& [key, samples] : cells) {
    SummaryRow s;
    std::tie(s.algorithm, s.game, s.iteration) = key;
    s.count = samples.size();
    s.mean.assign(k, 0.0);
    s.std.assign(k, 0.0);
    const double n = static_cast<double>(s.count);
    for (std::size_t m = 0; m < k; ++m) {
      double sum = 0.0;
      for (const auto& v : samples) sum += v[m];
      const double mean = sum / n;
      double sq = 0.0;
      for (const auto& v : samples) sq += (v[m] - mean) * (v[m] - mean);
      s.mean[m] = mean;
      s.std[m] = std::sqrt(sq / n);
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<SummaryRow> aggregate_csv(const std::string& metrics_path) {
  return aggregate_rows(read_metrics_csv(metrics_path));
}

inline void write_summary_csv(const std::vector<SummaryRow>& rows, std::ostream& out) {
  out << "algorithm,game,iteration,count";
  for (const auto& m : summary_metrics()) out << ',' << m << "_mean," << m << "_std";
  out << '\n';
  for (const auto& r : rows) {
    out << r.algorithm << ',' << r.game << ',' << r.iteration << ',' << r.count;
    for (std::size_t m = 0; m < r.mean.size(); ++m) {
      out << ',' << format_double(r.mean[m]) << ',' << format_double(r.std[m]);
    }
    out << '\n';
  }
}

inline void write_summary_csv(const std::vector<SummaryRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw GameError("cannot write '" + path + "'");
  write_summary_csv(rows, out);
}

// One gnuplot-ready file per (metric, game family, algorithm) under `dir`,
// named <metric>__<game>__<algorithm>.tsv.
inline void write_plot_data(const std::vector<SummaryRow>& rows, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const auto& names = summary_metrics();
  std::map<std::tuple<std::size_t, std::string, std::string>, std::vector<const SummaryRow*>>
      files;
  for (const auto& r : rows) {
    for (std::size_t m = 0; m < names.size(); ++m) files[{m, r.game, r.algorithm}].push_back(&r);
  }
  for (const auto& [key, series] : files) {
    const auto& [m, game, algorithm] = key;
    const auto path =
        std::filesystem::path(dir) / (names[m] + "__" + game + "__" + algorithm + ".tsv");
    std::ofstream out(path);
    if (!out) throw GameError("cannot write '" + path.string() + "'");
    out << "iteration\tmean\tstd\tcount\n";
    for (const SummaryRow* r : series) {
      out << r->iteration << '\t' << format_double(r->mean[m]) << '\t'
          << format_double(r->std[m]) << '\t' << r->count << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Grid execution

struct RunCell {
  std::size_t game_index = 0;
  std::size_t algorithm_index = 0;
  std::uint64_t seed = 0;
};

struct CellResult {
  std::string run_id;
  std::vector<MetricRow> rows;
  std::string error;  // non-empty when the run failed
};

struct ExperimentResult {
  std::vector<MetricRow> rows;  // sorted by (run_id, iteration)
  std::vector<std::string> failures;
  std::size_t runs = 0;
};

inline std::string run_id(const GameEntry& game, const AlgorithmEntry& algorithm,
                          const nlohmann::json& shared, std::uint64_t seed) {
  std::ostringstream os;
  os << game.key() << '|' << algorithm.name << '|' << algorithm.preset << '|' << shared.dump()
     << '|' << algorithm.overrides.dump() << '|' << seed;
  return hex64(fnv1a64(os.str()));
}

// Concurrency after the METAGAME_FORGE_THREADS override.
inline std::size_t effective_jobs(std::size_t configured) {
  if (const char* env = std::getenv("METAGAME_FORGE_THREADS")) {
    std::size_t v = 0;
    const std::string_view s(env);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec == std::errc() && res.ptr == s.data() + s.size() && v > 0) return v;
  }
  return std::max<std::size_t>(configured, 1);
}

// Runs every (game, algorithm, seed) cell with at most `jobs` workers. Each
// worker owns its cell's state; results are merged and sorted afterwards, so
// the output does not depend on scheduling.
inline ExperimentResult run_experiment(const ExperimentConfig& config,
                                       std::ostream* log = nullptr) {
  config.validate();
  std::vector<RunCell> cells;
  for (std::size_t g = 0; g < config.games.size(); ++g) {
    for (std::size_t a = 0; a < config.algorithms.size(); ++a) {
      for (std::uint64_t s : config.seeds) cells.push_back({g, a, s});
    }
  }

  std::vector<CellResult> results(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      const RunCell& cell = cells[i];
      const GameEntry& ge = config.games[cell.game_index];
      const AlgorithmEntry& ae = config.algorithms[cell.algorithm_index];
      CellResult& out = results[i];
      out.run_id = run_id(ge, ae, config.params, cell.seed);
      try {
        AlgorithmConfig ac = make_algorithm_config(ae.preset, config.params, ae.overrides);
        ac.seed = cell.seed;
        ac.max_iterations = config.max_iterations;
        BimatrixGame game = [&] {
          if (ge.from_file()) return load_game(ge.path);
          GameGenSpec spec = ge.spec;
          if (!ge.fixed_seed) spec.seed = cell.seed;
          return generate(spec);
        }();
        const auto reports = run(game, ac, config.mode);
        out.rows.reserve(reports.size());
        for (const auto& r : reports) {
          out.rows.push_back(metric_row(out.run_id, ae.name, ge.label(), cell.seed, r));
        }
      } catch (const std::exception& e) {
        out.rows.clear();
        out.error = ae.name + " on " + ge.label() + " seed " + std::to_string(cell.seed) +
                    ": " + e.what();
        if (log) {
          std::lock_guard<std::mutex> lock(log_mutex);
          *log << "run failed: " << out.error << '\n';
        }
      }
    }
  };

  const std::size_t jobs = std::min(effective_jobs(config.jobs), cells.size());
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(jobs);
    for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  ExperimentResult out;
  out.runs = cells.size();
  for (auto& r : results) {
    if (!r.error.empty()) out.failures.push_back(std::move(r.error));
    for (auto& row : r.rows) out.rows.push_back(std::move(row));
  }
  sort_rows(out.rows);
  return out;
}

// Writes metrics.csv, summary.csv and plots/*.tsv under `dir`.
inline void write_outputs(const ExperimentResult& result, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const auto metrics_path = (std::filesystem::path(dir) / "metrics.csv").string();
  {
    std::ofstream out(metrics_path);
    if (!out) throw GameError("cannot write '" + metrics_path + "'");
    write_metrics_csv(result.rows, out);
  }
  const auto summary = aggregate_rows(result.rows);
  write_summary_csv(summary, (std::filesystem::path(dir) / "summary.csv").string());
  write_plot_data(summary, (std::filesystem::path(dir) / "plots").string());
}

}  // namespace metagame
