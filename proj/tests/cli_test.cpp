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

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <gtest/gtest.h>

#include "metagame/harness.hpp"

namespace metagame {
namespace {

namespace fs = std::filesystem;

struct CommandResult {
  int status = -1;
  std::string out;
};

CommandResult forge(const std::string& args) {
  const std::string cmd = std::string(METAGAME_FORGE_BIN) + " " + args + " 2>/dev/null";
  CommandResult r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[512];
  while (std::fgets(buf, sizeof buf, pipe)) r.out += buf;
  const int raw = ::pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("metagame_cli_test_" +
            std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(path(name)) << text;
    return path(name);
  }

  fs::path dir_;
};

double as_double(const std::string& s) { return std::stod(s); }

TEST_F(CliTest, GenGameEloIsSymmetricZeroSum) {
  const auto r = forge("gen-game --kind elo --dim 100 --noise 0.5 --seed 3 -o " + path("g.json"));
  ASSERT_EQ(r.status, 0);
  const BimatrixGame g = load_game(path("g.json"));
  EXPECT_EQ(g.rows(), 100);
  EXPECT_TRUE(g.symmetric_zero_sum());
  const auto again = forge("gen-game --kind elo --dim 100 --noise 0.5 --seed 3 -o " + path("h.json"));
  ASSERT_EQ(again.status, 0);
  EXPECT_EQ(load_game(path("h.json")).own(Player::kRow), g.own(Player::kRow));
}

TEST_F(CliTest, GenGameBuiltinAndBadInput) {
  ASSERT_EQ(forge("gen-game --kind builtin --builtin stag_hunt_table2 -o " + path("s.json")).status,
            0);
  EXPECT_EQ(load_game(path("s.json")).own(Player::kRow)(0, 0), 30.0);
  EXPECT_EQ(forge("gen-game --kind elo --dim 1 -o " + path("x.json")).status, 2);
  EXPECT_EQ(forge("gen-game --kind builtin -o " + path("x.json")).status, 2);
  EXPECT_EQ(forge("gen-game --kind chess --dim 3 -o " + path("x.json")).status, 2);
  EXPECT_FALSE(fs::exists(path("x.json")));
}

TEST_F(CliTest, EvalMetrics) {
  save_game(builtin("rps"), path("rps.json"));
  const auto u = write("u.json", "[0.3333333333333333, 0.3333333333333333, 0.3333333333333334]");
  const auto e = forge("eval --game " + path("rps.json") + " --row " + u + " --col " + u +
                       " --metric exploitability");
  ASSERT_EQ(e.status, 0);
  EXPECT_NEAR(as_double(e.out), 0.0, 1e-12);

  save_game(builtin("stackelberg_table1"), path("t1.json"));
  const auto lead = write("lead.json", R"({"probs": [0.333334333333333, 0.666665666666667]})");
  const auto tie = write("tie.json", "[0.3333333333333333, 0.6666666666666667]");
  const auto l = write("l.json", "[1, 0]");
  const auto adv = forge("eval --game " + path("t1.json") + " --row " + lead + " --col " + l +
                         " --metric advantage_row");
  ASSERT_EQ(adv.status, 0);
  EXPECT_NEAR(as_double(adv.out), 11.0 / 3.0, 1e-5);
  const auto adv_tie = forge("eval --game " + path("t1.json") + " --row " + tie + " --col " + l +
                             " --metric advantage_row");
  EXPECT_NEAR(as_double(adv_tie.out), 5.0 / 3.0, 1e-9);

  const auto pay = forge("eval --game " + path("t1.json") + " --row " + l + " --col " + l +
                         " --metric payoff");
  ASSERT_EQ(pay.status, 0);
  EXPECT_EQ(pay.out, "1 0\n");
}

TEST_F(CliTest, EvalRejectsBadStrategies) {
  save_game(builtin("rps"), path("rps.json"));
  const auto bad = write("bad.json", "[0.5, 0.6, -0.1]");
  const auto short_s = write("short.json", "[0.5, 0.5]");
  const auto u = write("u.json", "[0.2, 0.3, 0.5]");
  const std::string game = " --game " + path("rps.json");
  EXPECT_EQ(forge("eval" + game + " --row " + bad + " --col " + u + " --metric payoff").status, 2);
  EXPECT_EQ(forge("eval" + game + " --row " + short_s + " --col " + u + " --metric payoff").status,
            2);
  EXPECT_EQ(forge("eval" + game + " --row " + u + " --col " + u + " --metric regret").status, 2);
}

TEST_F(CliTest, RunWritesOutputsAndRejectsEmptySeeds) {
  const auto cfg = write("cfg.json", R"({
    "games": [{"builtin": "matching_pennies"}, {"kind": "transitive", "dim": 4}],
    "algorithms": ["vanilla_psro", "sc_psro"],
    "seeds": "0..1",
    "max_iterations": 4
  })");
  const auto r = forge("run --config " + cfg + " --out " + path("out"));
  ASSERT_EQ(r.status, 0);
  const auto rows = read_metrics_csv(path("out/metrics.csv"));
  EXPECT_EQ(rows.size(), 2u * 2u * 2u * 4u);
  EXPECT_TRUE(fs::exists(path("out/summary.csv")));
  EXPECT_TRUE(fs::exists(path("out/plots")));

  const auto seeds = forge("run --config " + cfg + " --seeds 5..5 --jobs 2 --out " + path("o2"));
  ASSERT_EQ(seeds.status, 0);
  for (const auto& m : read_metrics_csv(path("o2/metrics.csv"))) EXPECT_EQ(m.seed, 5u);

  const auto empty = write("empty.json", R"({
    "games": [{"kind": "elo", "dim": 4}], "algorithms": ["sc_psro"], "seeds": []})");
  EXPECT_EQ(forge("run --config " + empty + " --out " + path("o3")).status, 2);
  EXPECT_EQ(forge("run --config " + path("nope.json")).status, 2);
  EXPECT_EQ(forge("run").status, 2);
}

TEST_F(CliTest, RunReportsFailedRuns) {
  const auto cfg = write("cfg.json", R"({
    "games": [{"builtin": "rps"}, "missing_game.json"],
    "algorithms": ["vanilla_psro"],
    "seeds": [0],
    "max_iterations": 3
  })");
  const auto r = forge("run --config " + cfg + " --out " + path("out"));
  EXPECT_EQ(r.status, 1);
  EXPECT_EQ(read_metrics_csv(path("out/metrics.csv")).size(), 3u);
}

TEST_F(CliTest, AggregateMatchesLibrary) {
  const auto cfg = write("cfg.json", R"({
    "games": [{"kind": "general_sum_random", "dim": 4}],
    "algorithms": ["sc_psro"], "mode": "prosocial", "seeds": "0..3", "max_iterations": 5})");
  ASSERT_EQ(forge("run --config " + cfg + " --out " + path("out")).status, 0);
  ASSERT_EQ(forge("aggregate --in " + path("out/metrics.csv") + " --out " + path("agg.csv")).status,
            0);
  std::ifstream a(path("agg.csv")), b(path("out/summary.csv"));
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(forge("aggregate --in " + path("none.csv") + " --out " + path("x.csv")).status, 2);
}

}  // namespace
}  // namespace metagame
