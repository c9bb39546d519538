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

#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "metagame/game.hpp"
#include "metagame/solvers.hpp"

namespace metagame {
namespace {

// Singular-value route to expected cardinality: sum of s^2 / (1 + s^2).
double ec_by_svd(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  const Vector s = svd.singularValues();
  return (s.array().square() / (1.0 + s.array().square())).sum();
}

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = n01(rng);
  return m;
}

TEST(BestResponseTest, PaperBeatsRock) {
  const BimatrixGame g = builtin("rps");
  const auto br = best_response(g, Player::kCol, MixedStrategy::pure(3, 0));
  EXPECT_EQ(br.index, 1u);
  EXPECT_EQ(br.value, 1.0);
  EXPECT_EQ(br.responder_opponent_value, -1.0);
}

TEST(BestResponseTest, UniformTiesEverything) {
  const BimatrixGame g = builtin("rps");
  const auto br = best_response(g, Player::kRow, MixedStrategy::uniform(3));
  EXPECT_EQ(br.tied_indices, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(br.index, 0u);
  EXPECT_NEAR(br.value, 0.0, 1e-15);
}

TEST(BestResponseTest, StackelbergTiePoint) {
  const BimatrixGame g = builtin("stackelberg_table1");
  const auto br = best_response(g, Player::kCol, MixedStrategy{1.0 / 3, 2.0 / 3});
  EXPECT_EQ(br.tied_indices, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(br.index, 0u);
  EXPECT_NEAR(br.value, 2.0 / 3, 1e-12);
}

TEST(BestResponseTest, Restriction) {
  const BimatrixGame g = builtin("rps");
  const std::vector<std::size_t> allowed{0, 2};
  const auto br = best_response(g, Player::kCol, MixedStrategy::pure(3, 0),
                                std::span<const std::size_t>(allowed));
  EXPECT_EQ(br.index, 0u);
  EXPECT_EQ(br.value, 0.0);
  const std::vector<std::size_t> empty;
  EXPECT_THROW(best_response(g, Player::kCol, MixedStrategy::pure(3, 0),
                             std::span<const std::size_t>(empty)),
               GameError);
  EXPECT_THROW(best_response(g, Player::kCol, MixedStrategy::uniform(2)), GameError);
}

TEST(ExploitabilityTest, Examples) {
  const BimatrixGame rps = builtin("rps");
  EXPECT_NEAR(exploitability(rps, MixedStrategy::uniform(3), MixedStrategy::uniform(3)), 0.0,
              1e-15);
  EXPECT_EQ(exploitability(rps, MixedStrategy::pure(3, 0), MixedStrategy::pure(3, 0)), 2.0);
  const BimatrixGame t1 = builtin("stackelberg_table1");
  EXPECT_EQ(exploitability(t1, MixedStrategy::pure(2, 1), MixedStrategy::pure(2, 0)), 0.0);
}

TEST(ExploitabilityTest, NonNegative) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    const BimatrixGame g = gen_general_sum(2 + trial % 7, static_cast<std::uint64_t>(trial));
    const auto x = sample_dirichlet_one(g.rows(), rng);
    const auto y = sample_dirichlet_one(g.cols(), rng);
    EXPECT_GE(exploitability(g, x, y), -1e-12);
  }
}

TEST(AdvantageTest, Examples) {
  const BimatrixGame rps = builtin("rps");
  EXPECT_EQ(advantage(rps, Player::kRow, MixedStrategy::pure(3, 0)), -1.0);
  EXPECT_NEAR(advantage(rps, Player::kRow, MixedStrategy::uniform(3)), 0.0, 1e-15);
  const BimatrixGame t1 = builtin("stackelberg_table1");
  EXPECT_EQ(advantage(t1, Player::kRow, MixedStrategy::pure(2, 0)), 3.0);
  EXPECT_EQ(advantage(t1, Player::kRow, MixedStrategy::pure(2, 1)), 2.0);
}

TEST(AdvantageTest, PessimisticAtTheStackelbergTie) {
  const BimatrixGame t1 = builtin("stackelberg_table1");
  // Follower indifferent: min over {L, R} of the leader payoff is 5/3.
  EXPECT_NEAR(advantage(t1, Player::kRow, MixedStrategy{1.0 / 3, 2.0 / 3}), 5.0 / 3, 1e-12);
  EXPECT_NEAR(advantage(t1, Player::kRow, MixedStrategy{1.0 / 3 + 1e-6, 2.0 / 3 - 1e-6}),
              11.0 / 3, 1e-5);
  EXPECT_THROW(advantage(t1, Player::kRow, MixedStrategy::uniform(3)), GameError);
}

TEST(AdvantageTest, ColumnPlayerUsesItsOwnMatrix) {
  const BimatrixGame t1 = builtin("stackelberg_table1");
  // Column plays L: row best response is D (2 > 1), column earns 1.
  EXPECT_EQ(advantage(t1, Player::kCol, MixedStrategy::pure(2, 0)), 1.0);
  // Column plays R: row best response is D (4 > 3), column earns 0.
  EXPECT_EQ(advantage(t1, Player::kCol, MixedStrategy::pure(2, 1)), 0.0);
}

TEST(TheoremTest, ExploitabilityIsNegatedAdvantageSum) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t dim = 2 + static_cast<std::size_t>(trial % 7);
    const BimatrixGame g = gen_symmetric_zero_sum(dim, static_cast<std::uint64_t>(trial));
    const auto x = sample_dirichlet_one(dim, rng);
    const auto y = sample_dirichlet_one(dim, rng);
    EXPECT_NEAR(exploitability(g, x, y),
                -(advantage(g, Player::kRow, x) + advantage(g, Player::kCol, y)), 1e-9);
  }
}

TEST(TheoremTest, ZeroExploitabilityMeansZeroPayoffs) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const BimatrixGame g = gen_symmetric_zero_sum(2 + seed % 3, seed);
    const auto eqs = nash_support_enumeration(g);
    ASSERT_FALSE(eqs.empty());
    for (const auto& [x, y] : eqs) {
      EXPECT_LE(exploitability(g, x, y), 1e-9);
      const PayoffPair p = payoff(g, x, y);
      EXPECT_NEAR(p.row, 0.0, 1e-9);
      EXPECT_NEAR(p.col, 0.0, 1e-9);
      EXPECT_NEAR(advantage(g, Player::kRow, x), 0.0, 1e-9);
      EXPECT_NEAR(advantage(g, Player::kCol, y), 0.0, 1e-9);
    }
  }
}

TEST(TheoremTest, TransitiveAdvantageOrdersPayoffs) {
  std::mt19937_64 rng(23);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const BimatrixGame g = gen_transitive(10, seed);
    std::uniform_int_distribution<std::size_t> pick(0, 9);
    for (int k = 0; k < 50; ++k) {
      const auto i = pick(rng);
      const auto j = pick(rng);
      const auto pi = MixedStrategy::pure(10, i);
      const auto pj = MixedStrategy::pure(10, j);
      if (advantage(g, Player::kRow, pi) > advantage(g, Player::kRow, pj) + 1e-9) {
        EXPECT_GT(payoff(g, pi, pj).row, 0.0);
      }
    }
  }
}

TEST(TheoremTest, PayoffConstantAcrossBestResponseTies) {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t dim = 2 + static_cast<std::size_t>(trial % 4);
    const BimatrixGame g = gen_symmetric_zero_sum(dim, static_cast<std::uint64_t>(trial));
    // Mix a random point with an equilibrium so that ties actually occur.
    const auto eqs = nash_support_enumeration(g);
    const auto x = trial % 2 == 0 ? eqs.front().first : sample_dirichlet_one(dim, rng);
    const auto br = best_response(g, Player::kCol, x);
    for (std::size_t k : br.tied_indices) {
      EXPECT_NEAR(payoff(g, x, MixedStrategy::pure(dim, k)).row,
                  payoff(g, x, MixedStrategy::pure(dim, br.index)).row, 1e-9);
    }
  }
}

TEST(FictitiousPlayTest, MatchingPennies) {
  const BimatrixGame g = builtin("matching_pennies");
  const MetaSolution s = fictitious_play(g.u_row(), g.u_col(), 10000, 0.0);
  const auto eqs = nash_support_enumeration(g);
  ASSERT_EQ(eqs.size(), 1u);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_NEAR(s.theta_row[k], eqs[0].first[k], 0.05);
    EXPECT_NEAR(s.theta_col[k], eqs[0].second[k], 0.05);
  }
  EXPECT_GE(s.residual, 0.0);
  EXPECT_TRUE(on_simplex(s.theta_row.probs()));
}

TEST(FictitiousPlayTest, OneByOne) {
  const MetaSolution s = fictitious_play(Matrix::Constant(1, 1, 3.0),
                                         Matrix::Constant(1, 1, -1.0), 100, 1e-3);
  EXPECT_EQ(s.theta_row[0], 1.0);
  EXPECT_EQ(s.theta_col[0], 1.0);
  EXPECT_EQ(s.residual, 0.0);
  EXPECT_EQ(s.iterations_used, 1u);
}

TEST(FictitiousPlayTest, TableOneConvergesToDownLeft) {
  const BimatrixGame g = builtin("stackelberg_table1");
  const MetaSolution s = fictitious_play(g.u_row(), g.u_col(), 2000, 1e-6);
  EXPECT_LE(s.residual, 1e-6);
  const auto eqs = nash_support_enumeration(g);
  ASSERT_EQ(eqs.size(), 1u);
  EXPECT_NEAR((s.theta_row.probs() - eqs[0].first.probs()).cwiseAbs().maxCoeff(), 0.0, 1e-6);
  EXPECT_NEAR((s.theta_col.probs() - eqs[0].second.probs()).cwiseAbs().maxCoeff(), 0.0, 1e-6);
}

TEST(FictitiousPlayTest, StopsAtToleranceOrBudget) {
  const BimatrixGame g = gen_general_sum(6, 1);
  for (std::size_t iters : {1u, 10u, 500u}) {
    const MetaSolution s = fictitious_play(g.u_row(), g.u_col(), iters, 1e-3);
    EXPECT_TRUE(s.residual <= 1e-3 || s.iterations_used == iters);
    EXPECT_LE(s.iterations_used, iters);
    EXPECT_NEAR(s.residual,
                exploitability(new_game(g.u_row(), g.u_col()), s.theta_row, s.theta_col),
                1e-12);
  }
  EXPECT_THROW(fictitious_play(Matrix(0, 0), Matrix(0, 0), 10, 0.0), GameError);
  EXPECT_THROW(fictitious_play(Matrix::Zero(2, 2), Matrix::Zero(2, 3), 10, 0.0), GameError);
}

TEST(FictitiousPlayTest, RandomInitIsSeeded) {
  const BimatrixGame g = gen_general_sum(5, 2);
  FictitiousPlayOptions opts;
  opts.random_init = true;
  opts.seed = 7;
  const MetaSolution a = fictitious_play(g.u_row(), g.u_col(), 50, 0.0, opts);
  const MetaSolution b = fictitious_play(g.u_row(), g.u_col(), 50, 0.0, opts);
  EXPECT_EQ(a.theta_row, b.theta_row);
  EXPECT_EQ(a.theta_col, b.theta_col);
}

TEST(ExpectedCardinalityTest, HandValues) {
  EXPECT_NEAR(expected_cardinality(Matrix::Zero(1, 1)), 0.0, 1e-12);
  EXPECT_NEAR(expected_cardinality(Matrix::Ones(1, 1)), 0.5, 1e-12);
  EXPECT_NEAR(expected_cardinality(Matrix::Identity(3, 3)), 1.5, 1e-12);
  EXPECT_THROW(expected_cardinality(Matrix(0, 0)), GameError);
  Matrix bad = Matrix::Ones(2, 2);
  bad(1, 1) = NAN;
  EXPECT_THROW(expected_cardinality(bad), GameError);
}

TEST(ExpectedCardinalityTest, MatchesSingularValues) {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<Eigen::Index> size(1, 20);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix m = random_matrix(size(rng), size(rng), rng);
    const double ec = expected_cardinality(m);
    EXPECT_NEAR(ec, ec_by_svd(m), 1e-9);
    EXPECT_GE(ec, 0.0);
    EXPECT_LT(ec, static_cast<double>(m.rows()));
  }
}

TEST(ExpectedCardinalityTest, IncrementalMatchesDirect) {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 60; ++trial) {
    const Eigen::Index rows = trial % 9;
    const Eigen::Index cols = 1 + trial % 6;
    const Matrix fixed = random_matrix(rows, cols, rng);
    const Vector cand = random_matrix(cols, 1, rng).col(0);
    Matrix full(rows + 1, cols);
    full.topRows(rows) = fixed;
    full.row(rows) = cand.transpose();
    EXPECT_NEAR(IncrementalExpectedCardinality(fixed).with_row(cand), ec_by_svd(full), 1e-9);
  }
}

TEST(StackelbergGridTest, TableOne) {
  const auto r = stackelberg_grid_value(builtin("stackelberg_table1"), Player::kRow, 3000);
  EXPECT_NEAR(r.value, 11.0 / 3, 1e-2);
  EXPECT_NEAR(r.leader_mixed[0], 1.0 / 3, 1e-2);
}

TEST(StackelbergGridTest, StagHunt) {
  const auto r = stackelberg_grid_value(builtin("stag_hunt_table2"), Player::kRow, 300);
  EXPECT_EQ(r.value, 30.0);
  EXPECT_EQ(r.leader_mixed, MixedStrategy::pure(2, 0));
}

TEST(StackelbergGridTest, SingleActionAndLimits) {
  Matrix u(1, 3);
  u << 1, 2, 3;
  Matrix v(1, 3);
  v << 0, 5, 1;
  const BimatrixGame g = new_game(u, v);
  const auto r = stackelberg_grid_value(g, Player::kRow, 10);
  EXPECT_EQ(r.value, advantage(g, Player::kRow, MixedStrategy::pure(1, 0)));
  EXPECT_THROW(stackelberg_grid_value(gen_general_sum(4, 0), Player::kRow, 10), GameError);
}

TEST(SupportEnumerationTest, MatchingPennies) {
  const auto eqs = nash_support_enumeration(builtin("matching_pennies"));
  ASSERT_EQ(eqs.size(), 1u);
  EXPECT_NEAR(eqs[0].first[0], 0.5, 1e-12);
  EXPECT_NEAR(eqs[0].second[0], 0.5, 1e-12);
}

TEST(SupportEnumerationTest, StagHunt) {
  const BimatrixGame g = builtin("stag_hunt_table2");
  const auto eqs = nash_support_enumeration(g);
  ASSERT_EQ(eqs.size(), 3u);
  EXPECT_EQ(eqs[0].first, MixedStrategy::pure(2, 0));
  EXPECT_EQ(eqs[0].second, MixedStrategy::pure(2, 0));
  EXPECT_EQ(eqs[1].first, MixedStrategy::pure(2, 1));
  EXPECT_EQ(eqs[1].second, MixedStrategy::pure(2, 1));
  // Indifference: 30p - 10(1-p) = -10p + 20(1-p) gives p = 3/7.
  EXPECT_NEAR(eqs[2].first[0], 3.0 / 7, 1e-12);
  EXPECT_NEAR(eqs[2].second[0], 3.0 / 7, 1e-12);
}

TEST(SupportEnumerationTest, TableOneHasOnlyDownLeft) {
  const auto eqs = nash_support_enumeration(builtin("stackelberg_table1"));
  ASSERT_EQ(eqs.size(), 1u);
  EXPECT_EQ(eqs[0].first, MixedStrategy::pure(2, 1));
  EXPECT_EQ(eqs[0].second, MixedStrategy::pure(2, 0));
  EXPECT_THROW(nash_support_enumeration(gen_general_sum(6, 0)), GameError);
}

}  // namespace
}  // namespace metagame
