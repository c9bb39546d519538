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
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Cholesky>

#include "metagame/game.hpp"
#include "metagame/random.hpp"
#include "metagame/types.hpp"

namespace metagame {

// ---------------------------------------------------------------------------
// Best responses

struct BestResponseResult {
  std::size_t index = 0;
  double value = 0.0;
  std::vector<std::size_t> tied_indices;
  // Payoff of the player being responded to when the responder plays `index`.
  double responder_opponent_value = 0.0;
};

// Indices whose value is within kTieTolerance of the maximum over `allowed`
// (all indices when `allowed` is empty), in increasing order.
inline std::vector<std::size_t> tie_set(const Vector& values,
                                        std::span<const std::size_t> allowed = {}) {
  std::vector<std::size_t> ties;
  double best = -std::numeric_limits<double>::infinity();
  auto scan = [&](auto&& visit) {
    if (allowed.empty()) {
      for (Eigen::Index k = 0; k < values.size(); ++k) visit(static_cast<std::size_t>(k));
    } else {
      for (std::size_t k : allowed) visit(k);
    }
  };
  scan([&](std::size_t k) { best = std::max(best, values[static_cast<Eigen::Index>(k)]); });
  scan([&](std::size_t k) {
    if (values[static_cast<Eigen::Index>(k)] >= best - kTieTolerance) ties.push_back(k);
  });
  std::sort(ties.begin(), ties.end());
  return ties;
}

inline BestResponseResult best_response(
    const BimatrixGame& game, Player responder, const MixedStrategy& opponent_mixed,
    std::optional<std::span<const std::size_t>> restriction = std::nullopt) {
  const Player other = opponent(responder);
  if (opponent_mixed.size() != game.actions(other)) {
    throw GameError("opponent strategy length does not match the game");
  }
  std::span<const std::size_t> allowed;
  if (restriction) {
    if (restriction->empty()) throw GameError("best response over an empty restriction");
    for (std::size_t k : *restriction) {
      if (k >= game.actions(responder)) throw GameError("restriction index out of range");
    }
    allowed = *restriction;
  }
  const Vector values = game.own(responder) * opponent_mixed.probs();
  BestResponseResult out;
  out.tied_indices = tie_set(values, allowed);
  out.index = out.tied_indices.front();
  out.value = values[static_cast<Eigen::Index>(out.index)];
  out.responder_opponent_value =
      game.opposing(responder).row(static_cast<Eigen::Index>(out.index)).dot(
          opponent_mixed.probs());
  return out;
}

// ---------------------------------------------------------------------------
// Advantage

struct PessimisticResponse {
  std::size_t index = 0;  // opponent response attaining `value`
  double value = 0.0;     // player's payoff against that response
  double response_value = 0.0;  // opponent's own payoff at its best response
};

// Given, for every opponent response k, the player's payoff `own[k]` and the
// opponent's payoff `opp[k]`, returns the opponent best response (within
// kTieTolerance) that is worst for the player. Equal payoffs go to the lowest
// index.
inline PessimisticResponse pessimistic_response(const Vector& own, const Vector& opp) {
  PessimisticResponse out;
  out.response_value = opp.maxCoeff();
  bool found = false;
  for (Eigen::Index k = 0; k < opp.size(); ++k) {
    if (opp[k] < out.response_value - kTieTolerance) continue;
    if (!found || own[k] < out.value) {
      out.index = static_cast<std::size_t>(k);
      out.value = own[k];
      found = true;
    }
  }
  return out;
}

// Payoff of `pi` against the opponent's best response to it; ties among the
// opponent's best responses are resolved against `player`.
inline double advantage(const BimatrixGame& game, Player player, const MixedStrategy& pi) {
  if (pi.size() != game.actions(player)) {
    throw GameError("strategy length does not match the game");
  }
  const Vector own = game.own(player).transpose() * pi.probs();
  const Vector opp = game.opposing(player).transpose() * pi.probs();
  return pessimistic_response(own, opp).value;
}

// ---------------------------------------------------------------------------
// Exploitability (NashConv)

inline double exploitability(const BimatrixGame& game, const MixedStrategy& pi_row,
                             const MixedStrategy& pi_col) {
  if (pi_row.size() != game.rows() || pi_col.size() != game.cols()) {
    throw GameError("strategy length does not match game dimensions");
  }
  const Vector row_values = game.u_row() * pi_col.probs();
  const Vector col_values = game.u_col().transpose() * pi_row.probs();
  const double row_gain = row_values.maxCoeff() - pi_row.probs().dot(row_values);
  const double col_gain = col_values.maxCoeff() - pi_col.probs().dot(col_values);
  return row_gain + col_gain;
}

// ---------------------------------------------------------------------------
// Fictitious play

struct MetaSolution {
  MixedStrategy theta_row;
  MixedStrategy theta_col;
  double residual = 0.0;
  std::size_t iterations_used = 0;
};

struct FictitiousPlayOptions {
  // Draw the first iterate from the simplex instead of starting uniform.
  bool random_init = false;
  std::uint64_t seed = 0;
};

namespace detail {
inline std::size_t first_argmax(const Vector& v, double tol) {
  const double best = v.maxCoeff();
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    if (v[k] >= best - tol) return static_cast<std::size_t>(k);
  }
  return 0;
}
}  // namespace detail

// Simultaneous fictitious play: each iterate is a best response to the
// opponent's running average. Returns the averages unless the current pure
// iterate is a strictly better approximate equilibrium, in which case that
// pair is returned.
inline MetaSolution fictitious_play(const Matrix& m_row, const Matrix& m_col,
                                    std::size_t max_iters, double tol,
                                    const FictitiousPlayOptions& options = {}) {
  if (m_row.size() == 0 || m_col.size() == 0) throw GameError("empty meta-game");
  if (m_row.rows() != m_col.rows() || m_row.cols() != m_col.cols()) {
    throw GameError("meta-game matrices differ in shape");
  }
  if (max_iters < 1) throw GameError("fictitious play needs max_iters >= 1");
  if (!(tol >= 0.0)) throw GameError("fictitious play needs tol >= 0");

  const Eigen::Index n = m_row.rows();
  const Eigen::Index m = m_row.cols();
  Vector sum_row;
  Vector sum_col;
  if (options.random_init) {
    Rng rng = make_rng(options.seed, streams::kMetaSolver);
    sum_row = sample_dirichlet_one(static_cast<std::size_t>(n), rng).probs();
    sum_col = sample_dirichlet_one(static_cast<std::size_t>(m), rng).probs();
  } else {
    sum_row = Vector::Constant(n, 1.0 / static_cast<double>(n));
    sum_col = Vector::Constant(m, 1.0 / static_cast<double>(m));
  }
  // Cumulative payoff of each pure action against the opponent's sum.
  Vector row_values = m_row * sum_col;
  Vector col_values = m_col.transpose() * sum_row;

  MetaSolution best;
  best.residual = std::numeric_limits<double>::infinity();
  std::optional<std::pair<Eigen::Index, Eigen::Index>> pure;

  for (std::size_t k = 1;; ++k) {
    const double count = static_cast<double>(k);
    const double avg_residual =
        (row_values.maxCoeff() - sum_row.dot(row_values) / count +
         col_values.maxCoeff() - sum_col.dot(col_values) / count) /
        count;
    double pure_residual = std::numeric_limits<double>::infinity();
    if (pure) {
      const auto [i, j] = *pure;
      pure_residual = m_row.col(j).maxCoeff() - m_row(i, j) +
                      m_col.row(i).maxCoeff() - m_col(i, j);
    }
    const double residual = std::max(0.0, std::min(avg_residual, pure_residual));
    if (residual < best.residual || k == 1) {
      if (pure_residual < avg_residual) {
        best.theta_row = MixedStrategy::pure(static_cast<std::size_t>(n),
                                             static_cast<std::size_t>(pure->first));
        best.theta_col = MixedStrategy::pure(static_cast<std::size_t>(m),
                                             static_cast<std::size_t>(pure->second));
      } else {
        best.theta_row = MixedStrategy::normalized(sum_row);
        best.theta_col = MixedStrategy::normalized(sum_col);
      }
      best.residual = residual;
    }
    best.iterations_used = k;
    if (residual <= tol || k >= max_iters) break;

    const auto i = static_cast<Eigen::Index>(
        detail::first_argmax(row_values, kTieTolerance * count));
    const auto j = static_cast<Eigen::Index>(
        detail::first_argmax(col_values, kTieTolerance * count));
    sum_row[i] += 1.0;
    sum_col[j] += 1.0;
    row_values += m_row.col(j);
    col_values += m_col.row(i).transpose();
    pure = std::make_pair(i, j);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Expected cardinality

// Cholesky factorization of a symmetric positive-definite matrix.
class SpdFactor {
 public:
  explicit SpdFactor(const Matrix& a) {
    if (a.rows() != a.cols()) throw GameError("SPD factor of a non-square matrix");
    llt_.compute(a);
    if (llt_.info() != Eigen::Success) throw GameError("matrix is not positive definite");
  }

  Eigen::Index size() const noexcept { return llt_.rows(); }

  Vector solve(const Vector& b) const { return llt_.solve(b); }

  double trace_of_inverse() const {
    return llt_.solve(Matrix::Identity(size(), size())).trace();
  }

 private:
  Eigen::LLT<Matrix> llt_;
};

// EC(M) = Tr(I - (L + I)^{-1}) with L = M M^T, evaluated as Tr((L + I)^{-1} L)
// through one SPD solve per row of M.
inline double expected_cardinality(const Matrix& m) {
  if (m.size() == 0) throw GameError("expected cardinality of an empty matrix");
  if (!m.allFinite()) throw GameError("expected cardinality of a non-finite matrix");
  const Matrix gram = m * m.transpose();
  const Matrix shifted = gram + Matrix::Identity(gram.rows(), gram.cols());
  const SpdFactor factor(shifted);
  double tr = 0.0;
  for (Eigen::Index k = 0; k < gram.rows(); ++k) {
    tr += factor.solve(gram.col(k))[k];
  }
  return tr;
}

// Expected cardinality of a fixed row block extended by one candidate row.
// The block's factorization is computed once; each candidate then costs one
// matrix-vector product and one pair of triangular solves (Schur complement).
class IncrementalExpectedCardinality {
 public:
  explicit IncrementalExpectedCardinality(Matrix fixed_rows)
      : fixed_(std::move(fixed_rows)) {
    if (fixed_.rows() > 0) {
      Matrix shifted = fixed_ * fixed_.transpose();
      shifted.diagonal().array() += 1.0;
      factor_.emplace(shifted);
      trace_inverse_ = factor_->trace_of_inverse();
    }
  }

  double with_row(const Vector& candidate) const {
    const double d = candidate.squaredNorm() + 1.0;
    const auto t = static_cast<double>(fixed_.rows() + 1);
    if (!factor_) return t - 1.0 / d;
    const Vector q = fixed_ * candidate;
    const Vector z = factor_->solve(q);
    const double schur = d - q.dot(z);
    return t - (trace_inverse_ + (z.squaredNorm() + 1.0) / schur);
  }

 private:
  Matrix fixed_;
  std::optional<SpdFactor> factor_;
  double trace_inverse_ = 0.0;
};

// ---------------------------------------------------------------------------
// Desk-scale oracles

struct StackelbergGridResult {
  MixedStrategy leader_mixed;
  double value = 0.0;
};

// Exhaustive search over the leader's simplex on a grid with spacing
// 1/resolution, scoring each point by the pessimistic advantage.
inline StackelbergGridResult stackelberg_grid_value(const BimatrixGame& game, Player leader,
                                                    std::size_t resolution) {
  const std::size_t n = game.actions(leader);
  if (n > 3) throw GameError("Stackelberg grid oracle supports at most 3 leader actions");
  if (resolution == 0) throw GameError("grid resolution must be >= 1");
  StackelbergGridResult best;
  bool have = false;
  auto consider = [&](Vector w) {
    MixedStrategy s = MixedStrategy::normalized(std::move(w));
    const double v = advantage(game, leader, s);
    if (!have || v > best.value) {
      best = {std::move(s), v};
      have = true;
    }
  };
  const auto r = static_cast<double>(resolution);
  if (n == 1) {
    consider(Vector::Ones(1));
  } else if (n == 2) {
    for (std::size_t a = 0; a <= resolution; ++a) {
      Vector w(2);
      w << static_cast<double>(a) / r, static_cast<double>(resolution - a) / r;
      consider(std::move(w));
    }
  } else {
    for (std::size_t a = 0; a <= resolution; ++a) {
      for (std::size_t b = 0; a + b <= resolution; ++b) {
        Vector w(3);
        w << static_cast<double>(a) / r, static_cast<double>(b) / r,
            static_cast<double>(resolution - a - b) / r;
        consider(std::move(w));
      }
    }
  }
  return best;
}

using StrategyProfile = std::pair<MixedStrategy, MixedStrategy>;

namespace detail {
inline void for_each_subset(std::size_t n, std::size_t k,
                            const std::function<void(const std::vector<std::size_t>&)>& f) {
  std::vector<std::size_t> idx(k);
  for (std::size_t i = 0; i < k; ++i) idx[i] = i;
  while (true) {
    f(idx);
    std::size_t pos = k;
    while (pos > 0 && idx[pos - 1] == n - k + pos - 1) --pos;
    if (pos == 0) return;
    ++idx[pos - 1];
    for (std::size_t i = pos; i < k; ++i) idx[i] = idx[i - 1] + 1;
  }
}

// Solves for the mixture over `mixer` support that makes every action of the
// other side in `indifferent` earn the same payoff under `payoff`
// (indexed [indifferent action][mixer action]). Empty on singular systems.
inline std::optional<Vector> indifference_mixture(const Matrix& payoff,
                                                  const std::vector<std::size_t>& indifferent,
                                                  const std::vector<std::size_t>& mixer,
                                                  std::size_t mixer_size) {
  const auto k = static_cast<Eigen::Index>(mixer.size());
  Matrix sys = Matrix::Zero(k + 1, k + 1);
  Vector rhs = Vector::Zero(k + 1);
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = 0; b < k; ++b) {
      sys(a, b) = payoff(static_cast<Eigen::Index>(indifferent[static_cast<std::size_t>(a)]),
                         static_cast<Eigen::Index>(mixer[static_cast<std::size_t>(b)]));
    }
    sys(a, k) = -1.0;  // common value
    sys(k, a) = 1.0;
  }
  rhs[k] = 1.0;
  Eigen::FullPivLU<Matrix> lu(sys);
  if (!lu.isInvertible()) return std::nullopt;
  const Vector sol = lu.solve(rhs);
  if ((sys * sol - rhs).cwiseAbs().maxCoeff() > 1e-9) return std::nullopt;
  Vector out = Vector::Zero(static_cast<Eigen::Index>(mixer_size));
  for (Eigen::Index b = 0; b < k; ++b) {
    if (sol[b] < -1e-12) return std::nullopt;
    out[static_cast<Eigen::Index>(mixer[static_cast<std::size_t>(b)])] = std::max(0.0, sol[b]);
  }
  if (!(out.sum() > 0.0)) return std::nullopt;
  return out / out.sum();
}
}  // namespace detail

// All Nash equilibria with equal-size supports, found by solving the
// indifference conditions on every support pair. Degenerate continua are
// represented only by the vertices this procedure happens to hit.
inline std::vector<StrategyProfile> nash_support_enumeration(const BimatrixGame& game) {
  const std::size_t n = game.rows();
  const std::size_t m = game.cols();
  if (n > 5 || m > 5) throw GameError("support enumeration supports at most 5x5 games");
  std::vector<StrategyProfile> found;
  const Matrix col_payoff_t = game.u_col().transpose();
  for (std::size_t k = 1; k <= std::min(n, m); ++k) {
    detail::for_each_subset(n, k, [&](const std::vector<std::size_t>& rows) {
      detail::for_each_subset(m, k, [&](const std::vector<std::size_t>& cols) {
        // Column mixture makes the row player indifferent over `rows`.
        auto y = detail::indifference_mixture(game.u_row(), rows, cols, m);
        if (!y) return;
        auto x = detail::indifference_mixture(col_payoff_t, cols, rows, n);
        if (!x) return;
        MixedStrategy sx = MixedStrategy::normalized(*x);
        MixedStrategy sy = MixedStrategy::normalized(*y);
        if (exploitability(game, sx, sy) > 1e-9) return;
        for (const auto& [fx, fy] : found) {
          if ((fx.probs() - sx.probs()).cwiseAbs().maxCoeff() < 1e-9 &&
              (fy.probs() - sy.probs()).cwiseAbs().maxCoeff() < 1e-9) {
            return;
          }
        }
        found.emplace_back(std::move(sx), std::move(sy));
      });
    });
  }
  return found;
}

}  // namespace metagame
