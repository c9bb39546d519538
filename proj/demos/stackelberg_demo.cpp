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

// Runs SC-PSRO and plain PSRO against an exact best-responding follower on
// the 2x2 leader/follower game and prints the leader's reward per iteration.

#include <cstdio>

#include "metagame/metagame.hpp"

int main() {
  using namespace metagame;
  const BimatrixGame game = builtin("stackelberg_table1");

  AlgorithmConfig sc;
  sc.max_iterations = 40;
  AlgorithmConfig vanilla = sc;
  vanilla.variant = Variant::kVanillaPsro;
  vanilla.clipping_enabled = false;

  const auto sc_run = run(game, sc, RunMode::kStackelbergPlayer);
  const auto vanilla_run = run(game, vanilla, RunMode::kStackelbergPlayer);

  std::printf("%4s  %10s  %10s\n", "iter", "sc_psro", "psro");
  for (std::size_t t = 0; t < sc_run.size(); t += 5) {
    std::printf("%4zu  %10.4f  %10.4f\n", sc_run[t].iteration, sc_run[t].reward_row,
                vanilla_run[t].reward_row);
  }
  const auto oracle = stackelberg_grid_value(game, Player::kRow, 3000);
  std::printf("grid-search Stackelberg value: %.4f at (%.4f, %.4f)\n", oracle.value,
              oracle.leader_mixed[0], oracle.leader_mixed[1]);
  return 0;
}
