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

// Population-based open-ended learning over a bimatrix game.
//
// Each player owns a population of mixed strategies. Every iteration the
// populations (optionally clipped by self-confirming advantage) define an
// empirical meta-game, fictitious play solves it, and each player then grows
// or rewrites its population with one of three oracles:
//
//   vanilla_psro    exact best response to the opponent's meta-strategy
//   diversity_psro  expected-cardinality maximizer, always appended
//   sc_psro         diversity / lookahead update with an improvement test
//
// Candidate strategies are |pi + step * e_k| for every pure action k, so a
// candidate's payoff vectors are affine in the corresponding matrix row and
// each candidate is scored in O(opponent actions).

#pragma once

#include <array>
#include <chrono>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metagame/game.hpp"
#include "metagame/random.hpp"
#include "metagame/solvers.hpp"
#include "metagame/types.hpp"

namespace metagame {

enum class Variant { kVanillaPsro, kDiversityPsro, kScPsro };
enum class RunMode { kSelfPlay, kStackelbergPlayer, kProsocial };
enum class OracleBranch { kNone, kDiversity, kLookahead, kBestResponse };

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::kVanillaPsro: return "vanilla_psro";
    case Variant::kDiversityPsro: return "diversity_psro";
    case Variant::kScPsro: return "sc_psro";
  }
  return "?";
}

inline Variant parse_variant(std::string_view s) {
  if (s == "vanilla_psro") return Variant::kVanillaPsro;
  if (s == "diversity_psro") return Variant::kDiversityPsro;
  if (s == "sc_psro") return Variant::kScPsro;
  throw GameError("unknown variant '" + std::string(s) + "'");
}

inline const char* to_string(RunMode m) {
  switch (m) {
    case RunMode::kSelfPlay: return "self_play";
    case RunMode::kStackelbergPlayer: return "stackelberg_player";
    case RunMode::kProsocial: return "prosocial";
  }
  return "?";
}

inline RunMode parse_mode(std::string_view s) {
  if (s == "self_play") return RunMode::kSelfPlay;
  if (s == "stackelberg_player") return RunMode::kStackelbergPlayer;
  if (s == "prosocial") return RunMode::kProsocial;
  throw GameError("unknown mode '" + std::string(s) + "'");
}

inline const char* to_string(OracleBranch b) {
  switch (b) {
    case OracleBranch::kNone: return "none";
    case OracleBranch::kDiversity: return "diversity";
    case OracleBranch::kLookahead: return "lookahead";
    case OracleBranch::kBestResponse: return "best_response";
  }
  return "?";
}

struct AlgorithmConfig {
  Variant variant = Variant::kScPsro;
  double lambda_d = 0.5;       // probability of the diversity branch
  double lambda_1 = 1.0;       // advantage weight in the diversity score
  double lr = 0.5;             // simplex step size
  double im = 0.03;            // relative improvement bound
  double clip_fraction = 0.8;  // fraction retained by clipping
  bool clipping_enabled = true;
  bool use_restricted_lookahead = false;
  bool keep_old_on_reject = false;
  bool fp_random_init = false;
  std::size_t fp_max_iters = 2000;
  double fp_tol = 1e-3;
  std::size_t max_iterations = 50;
  std::size_t init_pop_size = 1;
  std::uint64_t seed = 0;

  void validate() const {
    auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!in_unit(lambda_d)) throw GameError("lambda_d must lie in [0, 1]");
    if (!in_unit(clip_fraction)) throw GameError("clip fraction s must lie in [0, 1]");
    if (!(lr > 0.0) || !std::isfinite(lr)) throw GameError("lr must be > 0");
    if (!(im >= 0.0)) throw GameError("im must be >= 0");
    if (!(lambda_1 >= 0.0)) throw GameError("lambda_1 must be >= 0");
    if (fp_max_iters < 1) throw GameError("fp_max_iters must be >= 1");
    if (!(fp_tol >= 0.0)) throw GameError("fp_tol must be >= 0");
    if (init_pop_size < 1) throw GameError("init_pop_size must be >= 1");
  }
};

// ---------------------------------------------------------------------------
// Population

// Cached restricted best response of the opponent population to one member.
struct ConfirmEntry {
  std::size_t mu_index = 0;
  double sc_advantage = 0.0;
  double response_value = 0.0;           // opponent's payoff at its best response
  std::vector<std::size_t> tied;         // opponent members within tie tolerance
  bool stale = true;
};

class Population {
 public:
  Population() = default;
  explicit Population(Player owner) : owner_(owner) {}

  Player owner() const noexcept { return owner_; }
  std::size_t size() const noexcept { return members_.size(); }
  bool empty() const noexcept { return members_.empty(); }

  const MixedStrategy& member(std::size_t i) const { return members_.at(i); }
  const std::vector<MixedStrategy>& members() const noexcept { return members_; }
  const ConfirmEntry& confirming(std::size_t i) const { return confirm_.at(i); }

  // Owner's payoff against each opponent pure action.
  const Vector& own_payoffs(std::size_t i) const { return own_.at(i); }
  // Opponent's payoff against each opponent pure action.
  const Vector& opposing_payoffs(std::size_t i) const { return opposing_.at(i); }

  void append(const BimatrixGame& game, MixedStrategy s) {
    check_length(game, s);
    own_.push_back(game.own(owner_).transpose() * s.probs());
    opposing_.push_back(game.opposing(owner_).transpose() * s.probs());
    members_.push_back(std::move(s));
    confirm_.emplace_back();
  }

  void replace(const BimatrixGame& game, std::size_t i, MixedStrategy s) {
    check_length(game, s);
    own_.at(i) = game.own(owner_).transpose() * s.probs();
    opposing_.at(i) = game.opposing(owner_).transpose() * s.probs();
    members_.at(i) = std::move(s);
    confirm_.at(i) = ConfirmEntry{};
  }

  bool any_stale() const {
    return std::any_of(confirm_.begin(), confirm_.end(),
                       [](const ConfirmEntry& e) { return e.stale; });
  }

  // Members stacked as columns (pure actions x members).
  Matrix members_matrix() const {
    if (members_.empty()) return {};
    Matrix out(members_.front().probs().size(), static_cast<Eigen::Index>(size()));
    for (std::size_t k = 0; k < size(); ++k) {
      out.col(static_cast<Eigen::Index>(k)) = members_[k].probs();
    }
    return out;
  }

  ConfirmEntry& mutable_confirming(std::size_t i) { return confirm_.at(i); }

 private:
  void check_length(const BimatrixGame& game, const MixedStrategy& s) const {
    if (s.size() != game.actions(owner_)) {
      throw GameError("population member length does not match the game");
    }
  }

  Player owner_ = Player::kRow;
  std::vector<MixedStrategy> members_;
  std::vector<Vector> own_;
  std::vector<Vector> opposing_;
  std::vector<ConfirmEntry> confirm_;
};

// Recomputes the confirming cache of every stale member: the opponent
// population's restricted best response to it (pessimistic at ties) and the
// member's payoff against that response.
inline void refresh_confirming(Population& pop, const Population& opponent_pop) {
  if (opponent_pop.empty()) throw GameError("confirming against an empty population");
  if (!pop.any_stale()) return;
  const Matrix opp_members = opponent_pop.members_matrix();
  for (std::size_t a = 0; a < pop.size(); ++a) {
    ConfirmEntry& entry = pop.mutable_confirming(a);
    if (!entry.stale) continue;
    const Vector own = opp_members.transpose() * pop.own_payoffs(a);
    const Vector opp = opp_members.transpose() * pop.opposing_payoffs(a);
    const PessimisticResponse r = pessimistic_response(own, opp);
    entry.mu_index = r.index;
    entry.sc_advantage = r.value;
    entry.response_value = r.response_value;
    entry.tied = tie_set(opp);
    entry.stale = false;
  }
}

// Marks the entries of `pop` whose confirming response may change because
// opponent member `changed` was replaced or appended.
inline void invalidate_for_opponent_change(Population& pop, const Population& opponent_pop,
                                           std::size_t changed) {
  const Vector& incoming = opponent_pop.member(changed).probs();
  for (std::size_t a = 0; a < pop.size(); ++a) {
    ConfirmEntry& entry = pop.mutable_confirming(a);
    if (entry.stale) continue;
    if (entry.mu_index == changed ||
        std::binary_search(entry.tied.begin(), entry.tied.end(), changed)) {
      entry.stale = true;
      continue;
    }
    const double v = pop.opposing_payoffs(a).dot(incoming);
    if (v >= entry.response_value - kTieTolerance) entry.stale = true;
  }
}

// ---------------------------------------------------------------------------
// Empirical game

struct EmpiricalGame {
  Matrix m_row;
  Matrix m_col;
  std::vector<std::size_t> row_index_map;
  std::vector<std::size_t> col_index_map;
};

// Number of members kept when clipping a population of `n` with fraction `s`.
inline std::size_t clipped_count(std::size_t n, double s) {
  const auto want = static_cast<std::size_t>(
      std::ceil(s * static_cast<double>(n) - 1e-9));
  return std::max(std::min(want, n), std::min<std::size_t>(2, n));
}

// Indices (ascending) of the members retained by clipping: the highest
// self-confirming advantages, lower index first among equals.
inline std::vector<std::size_t> clip_indices(const Population& pop, double s) {
  std::vector<std::size_t> order(pop.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (pop.confirming(i).stale) {
      throw GameError("stale confirming cache encountered while clipping");
    }
    order[i] = i;
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return pop.confirming(a).sc_advantage > pop.confirming(b).sc_advantage;
  });
  order.resize(clipped_count(pop.size(), s));
  std::sort(order.begin(), order.end());
  return order;
}

inline std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = i;
  return out;
}

inline EmpiricalGame build_empirical(const BimatrixGame& game, const Population& pop_row,
                                     const Population& pop_col, bool clip_row, bool clip_col,
                                     double s) {
  if (pop_row.empty() || pop_col.empty()) throw GameError("empty population");
  if (pop_row.owner() != Player::kRow || pop_col.owner() != Player::kCol) {
    throw GameError("populations passed in the wrong order");
  }
  (void)game;
  EmpiricalGame out;
  out.row_index_map = clip_row ? clip_indices(pop_row, s) : all_indices(pop_row.size());
  out.col_index_map = clip_col ? clip_indices(pop_col, s) : all_indices(pop_col.size());
  const auto n = static_cast<Eigen::Index>(out.row_index_map.size());
  const auto m = static_cast<Eigen::Index>(out.col_index_map.size());
  Matrix cols(static_cast<Eigen::Index>(game.cols()), m);
  for (Eigen::Index b = 0; b < m; ++b) {
    cols.col(b) = pop_col.member(out.col_index_map[static_cast<std::size_t>(b)]).probs();
  }
  out.m_row.resize(n, m);
  out.m_col.resize(n, m);
  for (Eigen::Index a = 0; a < n; ++a) {
    const std::size_t r = out.row_index_map[static_cast<std::size_t>(a)];
    out.m_row.row(a) = (cols.transpose() * pop_row.own_payoffs(r)).transpose();
    out.m_col.row(a) = (cols.transpose() * pop_row.opposing_payoffs(r)).transpose();
  }
  return out;
}

inline EmpiricalGame build_empirical(const BimatrixGame& game, const Population& pop_row,
                                     const Population& pop_col, bool clip, double s) {
  return build_empirical(game, pop_row, pop_col, clip, clip, s);
}

namespace detail {
inline MixedStrategy lift(const MixedStrategy& theta, const std::vector<std::size_t>& map,
                          std::size_t full_size) {
  Vector out = Vector::Zero(static_cast<Eigen::Index>(full_size));
  for (std::size_t k = 0; k < map.size(); ++k) {
    out[static_cast<Eigen::Index>(map[k])] = theta[k];
  }
  return MixedStrategy::normalized(std::move(out));
}
}  // namespace detail

// Fictitious play on the empirical game; the returned weights are indexed by
// full population position (clipped members get weight zero).
inline MetaSolution meta_nash(const EmpiricalGame& empirical, std::size_t row_pop_size,
                              std::size_t col_pop_size, std::size_t fp_max_iters,
                              double fp_tol, const FictitiousPlayOptions& options = {}) {
  MetaSolution sol =
      fictitious_play(empirical.m_row, empirical.m_col, fp_max_iters, fp_tol, options);
  sol.theta_row = detail::lift(sol.theta_row, empirical.row_index_map, row_pop_size);
  sol.theta_col = detail::lift(sol.theta_col, empirical.col_index_map, col_pop_size);
  return sol;
}

inline MixedStrategy aggregate(const Population& pop, const MixedStrategy& theta) {
  if (theta.size() != pop.size()) {
    throw GameError("meta-strategy length does not match the population");
  }
  Vector out = Vector::Zero(pop.member(0).probs().size());
  for (std::size_t k = 0; k < pop.size(); ++k) {
    if (theta[k] != 0.0) out += theta[k] * pop.member(k).probs();
  }
  return MixedStrategy::normalized(std::move(out));
}

inline MixedStrategy br_oracle(const BimatrixGame& game, Player player,
                               const MixedStrategy& opponent_aggregate) {
  const BestResponseResult br = best_response(game, player, opponent_aggregate);
  return MixedStrategy::pure(game.actions(player), br.index);
}

// Element-wise absolute value scaled to unit L1 norm; uniform when the norm
// is below 1e-15.
inline MixedStrategy normalize_abs(const Vector& v) {
  if (v.size() == 0) throw GameError("normalize_abs of an empty vector");
  if (!v.allFinite()) throw GameError("normalize_abs of a non-finite vector");
  Vector a = v.cwiseAbs();
  const double total = a.sum();
  if (total < 1e-15) return MixedStrategy::uniform(static_cast<std::size_t>(v.size()));
  return MixedStrategy::normalized(std::move(a));
}

// ---------------------------------------------------------------------------
// Candidate oracles

struct CandidateChoice {
  MixedStrategy strategy;
  std::size_t direction = 0;
  double step = 0.0;
  double score = 0.0;
  std::vector<double> scores;  // per direction
};

namespace detail {

// Payoff vectors of the candidates |pi + step * e_k|. Since pi >= 0 and
// step >= 0 the absolute value is the identity and only the scale changes.
struct CandidateFamily {
  const Vector& base;      // pi^T A (one entry per column of A)
  const Matrix& rows;      // A, one row per pure direction
  double step;
  double scale;            // 1 / (sum(pi) + step)

  Vector at(Eigen::Index k) const {
    return (base + step * rows.row(k).transpose()) * scale;
  }
};

inline double candidate_scale(const MixedStrategy& pi, double step) {
  return 1.0 / (pi.probs().cwiseAbs().sum() + step);
}

inline CandidateChoice pick_best(const MixedStrategy& pi, double step,
                                 std::vector<double> scores) {
  CandidateChoice out;
  out.step = step;
  std::size_t best = 0;
  for (std::size_t k = 1; k < scores.size(); ++k) {
    if (scores[k] > scores[best]) best = k;
  }
  out.direction = best;
  out.score = scores[best];
  Vector moved = pi.probs();
  moved[static_cast<Eigen::Index>(best)] += step;
  out.strategy = normalize_abs(moved);
  out.scores = std::move(scores);
  return out;
}

}  // namespace detail

// Advantage of every candidate |pi + step * e_k| in the full game.
inline std::vector<double> candidate_advantages(const BimatrixGame& game, Player player,
                                                const MixedStrategy& pi, double step) {
  const Matrix& own = game.own(player);
  const Matrix& opp = game.opposing(player);
  const Vector own_base = own.transpose() * pi.probs();
  const Vector opp_base = opp.transpose() * pi.probs();
  const double scale = detail::candidate_scale(pi, step);
  const detail::CandidateFamily own_f{own_base, own, step, scale};
  const detail::CandidateFamily opp_f{opp_base, opp, step, scale};
  std::vector<double> out(game.actions(player));
  for (Eigen::Index k = 0; k < own.rows(); ++k) {
    out[static_cast<std::size_t>(k)] = pessimistic_response(own_f.at(k), opp_f.at(k)).value;
  }
  return out;
}

// Self-confirming advantage of every candidate against `opponent_pop`.
inline std::vector<double> candidate_restricted_advantages(const BimatrixGame& game,
                                                           Player player,
                                                           const MixedStrategy& pi,
                                                           double step,
                                                           const Population& opponent_pop) {
  const Matrix opp_members = opponent_pop.members_matrix();
  const Matrix own = game.own(player) * opp_members;
  const Matrix opp = game.opposing(player) * opp_members;
  const Vector own_base = own.transpose() * pi.probs();
  const Vector opp_base = opp.transpose() * pi.probs();
  const double scale = detail::candidate_scale(pi, step);
  const detail::CandidateFamily own_f{own_base, own, step, scale};
  const detail::CandidateFamily opp_f{opp_base, opp, step, scale};
  std::vector<double> out(game.actions(player));
  for (Eigen::Index k = 0; k < own.rows(); ++k) {
    out[static_cast<std::size_t>(k)] = pessimistic_response(own_f.at(k), opp_f.at(k)).value;
  }
  return out;
}

// Expected cardinality of the player's empirical payoff rows when the member
// at `replaced` (or none, to append) is swapped for each candidate.
inline std::vector<double> candidate_expected_cardinality(
    const BimatrixGame& game, const Population& pop, const Population& opponent_pop,
    const MixedStrategy& pi, double step, std::optional<std::size_t> replaced) {
  const Player player = pop.owner();
  const Matrix opp_members = opponent_pop.members_matrix();
  const Matrix g = game.own(player) * opp_members;  // actions x opponent members
  const auto kept = static_cast<Eigen::Index>(pop.size() - (replaced ? 1 : 0));
  Matrix fixed(kept, static_cast<Eigen::Index>(opponent_pop.size()));
  Eigen::Index r = 0;
  for (std::size_t a = 0; a < pop.size(); ++a) {
    if (replaced && a == *replaced) continue;
    fixed.row(r++) = (opp_members.transpose() * pop.own_payoffs(a)).transpose();
  }
  const IncrementalExpectedCardinality ec(std::move(fixed));
  const Vector base = g.transpose() * pi.probs();
  const detail::CandidateFamily fam{base, g, step, detail::candidate_scale(pi, step)};
  std::vector<double> out(game.actions(player));
  for (Eigen::Index k = 0; k < g.rows(); ++k) {
    out[static_cast<std::size_t>(k)] = ec.with_row(fam.at(k));
  }
  return out;
}

// Diversity branch: argmax over directions of
// EC(P_i \ {pi_t} u {candidate} | P_j) + lambda_1 * advantage(candidate),
// where pi_t is the last member of `pop`.
inline CandidateChoice diversity_step(const BimatrixGame& game, const Population& pop,
                                      const Population& opponent_pop, double lr,
                                      double lambda_1) {
  const std::size_t last = pop.size() - 1;
  const MixedStrategy& pi_t = pop.member(last);
  std::vector<double> scores =
      candidate_expected_cardinality(game, pop, opponent_pop, pi_t, lr, last);
  if (lambda_1 > 0.0) {
    const std::vector<double> adv = candidate_advantages(game, pop.owner(), pi_t, lr);
    for (std::size_t k = 0; k < scores.size(); ++k) scores[k] += lambda_1 * adv[k];
  }
  return detail::pick_best(pi_t, lr, std::move(scores));
}

// Appending diversity oracle: argmax over directions of EC(P_i u {candidate}).
inline CandidateChoice diversity_append_step(const BimatrixGame& game, const Population& pop,
                                             const Population& opponent_pop, double lr) {
  const MixedStrategy& pi_t = pop.member(pop.size() - 1);
  return detail::pick_best(
      pi_t, lr,
      candidate_expected_cardinality(game, pop, opponent_pop, pi_t, lr, std::nullopt));
}

// Lookahead branch with a given step: argmax over directions of the
// candidate's advantage (full game) or self-confirming advantage against
// `opponent_pop` when `restricted` is set.
inline CandidateChoice lookahead_step(const BimatrixGame& game, Player player,
                                      const MixedStrategy& pi_t, const Population& opponent_pop,
                                      double step, bool restricted) {
  if (!(step >= 0.0)) throw GameError("lookahead step must be >= 0");
  std::vector<double> scores =
      restricted ? candidate_restricted_advantages(game, player, pi_t, step, opponent_pop)
                 : candidate_advantages(game, player, pi_t, step);
  return detail::pick_best(pi_t, step, std::move(scores));
}

// Step size for the lookahead branch: Uniform[0, min(lr, max_k theta_k)].
inline double sample_lookahead_step(double lr, const MixedStrategy& own_theta, Rng& rng) {
  const double hi = std::min(lr, own_theta.max_weight());
  if (!(hi > 0.0)) return 0.0;
  return std::uniform_real_distribution<double>(0.0, hi)(rng);
}

// ---------------------------------------------------------------------------
// Algorithm 1 improvement test

struct ImprovementTest {
  bool accepted = false;
  bool additive = false;  // fallback used because the baseline is not positive
  double value = 0.0;     // ratio - 1, or the additive gain
};

inline constexpr double kRatioDenominatorFloor = 1e-9;

inline ImprovementTest improvement_test(const BimatrixGame& game, Player player,
                                        const MixedStrategy& candidate,
                                        const MixedStrategy& current,
                                        const MixedStrategy& opponent_aggregate, double im) {
  const Vector values = game.own(player) * opponent_aggregate.probs();
  const double num = candidate.probs().dot(values);
  const double den = current.probs().dot(values);
  ImprovementTest out;
  if (den < kRatioDenominatorFloor) {
    out.additive = true;
    out.value = num - den;
    out.accepted = out.value >= im * game.max_abs_payoff(player);
  } else {
    out.value = num / den - 1.0;
    out.accepted = out.value >= im;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Engine state

struct EngineState {
  RunMode mode = RunMode::kSelfPlay;
  Population row{Player::kRow};
  Population col{Player::kCol};
  Rng rng;
  std::size_t iteration = 0;

  Population& pop(Player p) { return p == Player::kRow ? row : col; }
  const Population& pop(Player p) const { return p == Player::kRow ? row : col; }

  // In stackelberg_player mode the column side is an exact best responder;
  // its population is the fixed set of pure strategies.
  bool learns(Player p) const {
    return p == Player::kRow || mode != RunMode::kStackelbergPlayer;
  }
};

inline void refresh_all(EngineState& state) {
  refresh_confirming(state.row, state.col);
  if (state.learns(Player::kCol)) refresh_confirming(state.col, state.row);
}

inline EngineState init_state(const BimatrixGame& game, const AlgorithmConfig& config,
                              RunMode mode = RunMode::kSelfPlay) {
  config.validate();
  EngineState state;
  state.mode = mode;
  state.rng = make_rng(config.seed, streams::kEngine);
  for (std::size_t k = 0; k < config.init_pop_size; ++k) {
    state.row.append(game, sample_dirichlet_one(game.rows(), state.rng));
  }
  if (state.learns(Player::kCol)) {
    for (std::size_t k = 0; k < config.init_pop_size; ++k) {
      state.col.append(game, sample_dirichlet_one(game.cols(), state.rng));
    }
  } else {
    for (std::size_t k = 0; k < game.cols(); ++k) {
      state.col.append(game, MixedStrategy::pure(game.cols(), k));
    }
  }
  refresh_all(state);
  return state;
}

// Replaces or appends a member and invalidates the opponent caches it affects.
inline void set_member(const BimatrixGame& game, EngineState& state, Player p,
                       std::optional<std::size_t> index, MixedStrategy s) {
  Population& pop = state.pop(p);
  std::size_t changed;
  if (index) {
    pop.replace(game, *index, std::move(s));
    changed = *index;
  } else {
    pop.append(game, std::move(s));
    changed = pop.size() - 1;
  }
  if (state.learns(opponent(p))) {
    invalidate_for_opponent_change(state.pop(opponent(p)), pop, changed);
  }
}

struct UpdateOutcome {
  OracleBranch branch = OracleBranch::kNone;
  CandidateChoice choice;
  ImprovementTest test;
  bool appended = false;
};

struct PendingUpdate {
  Player player = Player::kRow;
  UpdateOutcome outcome;
};

// One pass of the population updating process for player `p`: a diversity or
// lookahead candidate rewrites the last member; when the improvement against
// the opponent's aggregate falls short of `im` a fresh random member is also
// appended. Proposal and application are split so both players can move
// against the same snapshot. Randomness is drawn from `state.rng`.
inline PendingUpdate propose_population_update(const BimatrixGame& game, Player p,
                                               EngineState& state,
                                               const MixedStrategy& own_theta,
                                               const MixedStrategy& opponent_aggregate,
                                               const AlgorithmConfig& config) {
  const Population& pop = state.pop(p);
  const Population& opp = state.pop(opponent(p));
  const std::size_t last = pop.size() - 1;
  PendingUpdate out;
  out.player = p;
  const double rd = std::uniform_real_distribution<double>(0.0, 1.0)(state.rng);
  if (rd <= config.lambda_d) {
    out.outcome.branch = OracleBranch::kDiversity;
    out.outcome.choice = diversity_step(game, pop, opp, config.lr, config.lambda_1);
  } else {
    out.outcome.branch = OracleBranch::kLookahead;
    const double step = sample_lookahead_step(config.lr, own_theta, state.rng);
    out.outcome.choice = lookahead_step(game, p, pop.member(last), opp, step,
                                        config.use_restricted_lookahead);
  }
  out.outcome.test = improvement_test(game, p, out.outcome.choice.strategy, pop.member(last),
                                      opponent_aggregate, config.im);
  out.outcome.appended = !out.outcome.test.accepted;
  return out;
}

inline void apply_population_update(const BimatrixGame& game, EngineState& state,
                                    const PendingUpdate& update, const AlgorithmConfig& config) {
  const Player p = update.player;
  const std::size_t last = state.pop(p).size() - 1;
  if (update.outcome.test.accepted || !config.keep_old_on_reject) {
    set_member(game, state, p, last, update.outcome.choice.strategy);
  }
  if (!update.outcome.test.accepted) {
    set_member(game, state, p, std::nullopt, sample_dirichlet_one(game.actions(p), state.rng));
  }
}

inline UpdateOutcome population_update(const BimatrixGame& game, Player p, EngineState& state,
                                       const MixedStrategy& own_theta,
                                       const MixedStrategy& opponent_aggregate,
                                       const AlgorithmConfig& config) {
  PendingUpdate u =
      propose_population_update(game, p, state, own_theta, opponent_aggregate, config);
  apply_population_update(game, state, u, config);
  return u.outcome;
}

// ---------------------------------------------------------------------------
// Iterations

struct IterationReport {
  std::size_t iteration = 0;
  MetaSolution theta;
  double exploitability = 0.0;
  double reward_row = 0.0;
  double reward_col = 0.0;
  std::array<std::size_t, 2> pop_sizes{};
  std::array<std::size_t, 2> clipped_sizes{};
  std::array<OracleBranch, 2> oracle_branch_taken{OracleBranch::kNone, OracleBranch::kNone};
  double wall_ms = 0.0;
};

inline IterationReport run_iteration(const BimatrixGame& game, EngineState& state,
                                     const AlgorithmConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  IterationReport report;
  report.iteration = ++state.iteration;

  refresh_all(state);
  const bool clip_col = config.clipping_enabled && state.learns(Player::kCol);
  const EmpiricalGame empirical = build_empirical(
      game, state.row, state.col, config.clipping_enabled, clip_col, config.clip_fraction);
  FictitiousPlayOptions fp_options;
  fp_options.random_init = config.fp_random_init;
  fp_options.seed = config.seed ^ (0x9e3779b97f4a7c15ull * state.iteration);
  report.theta = meta_nash(empirical, state.row.size(), state.col.size(), config.fp_max_iters,
                           config.fp_tol, fp_options);
  report.pop_sizes = {state.row.size(), state.col.size()};
  report.clipped_sizes = {empirical.row_index_map.size(), empirical.col_index_map.size()};

  const MixedStrategy row_agg = aggregate(state.row, report.theta.theta_row);
  MixedStrategy col_agg = aggregate(state.col, report.theta.theta_col);
  if (state.mode == RunMode::kStackelbergPlayer) {
    // The follower answers the leader's aggregate, pessimistically at ties.
    const Vector own = game.u_row().transpose() * row_agg.probs();
    const Vector opp = game.u_col().transpose() * row_agg.probs();
    const PessimisticResponse follower = pessimistic_response(own, opp);
    col_agg = MixedStrategy::pure(game.cols(), follower.index);
  }
  const PayoffPair rewards = payoff(game, row_agg, col_agg);
  report.exploitability = exploitability(game, row_agg, col_agg);
  report.reward_row = rewards.row;
  report.reward_col = rewards.col;

  const std::array<const MixedStrategy*, 2> own_theta{&report.theta.theta_row,
                                                      &report.theta.theta_col};
  const std::array<const MixedStrategy*, 2> opp_agg{&col_agg, &row_agg};
  std::vector<PendingUpdate> pending;
  std::vector<std::pair<Player, MixedStrategy>> appends;
  for (Player p : {Player::kRow, Player::kCol}) {
    if (!state.learns(p)) continue;
    const std::size_t i = index_of(p);
    switch (config.variant) {
      case Variant::kVanillaPsro:
        report.oracle_branch_taken[i] = OracleBranch::kBestResponse;
        appends.emplace_back(p, br_oracle(game, p, *opp_agg[i]));
        break;
      case Variant::kDiversityPsro:
        report.oracle_branch_taken[i] = OracleBranch::kDiversity;
        appends.emplace_back(
            p, diversity_append_step(game, state.pop(p), state.pop(opponent(p)), config.lr)
                   .strategy);
        break;
      case Variant::kScPsro:
        pending.push_back(
            propose_population_update(game, p, state, *own_theta[i], *opp_agg[i], config));
        report.oracle_branch_taken[i] = pending.back().outcome.branch;
        break;
    }
  }
  for (auto& [p, s] : appends) set_member(game, state, p, std::nullopt, std::move(s));
  for (const PendingUpdate& u : pending) apply_population_update(game, state, u, config);

  report.wall_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - start)
                       .count();
  return report;
}

inline std::vector<IterationReport> run(const BimatrixGame& game, const AlgorithmConfig& config,
                                        RunMode mode) {
  EngineState state = init_state(game, config, mode);
  std::vector<IterationReport> out;
  out.reserve(config.max_iterations);
  for (std::size_t t = 0; t < config.max_iterations; ++t) {
    out.push_back(run_iteration(game, state, config));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

inline nlohmann::json to_json(const Population& pop) {
  nlohmann::json members = nlohmann::json::array();
  nlohmann::json caches = nlohmann::json::array();
  for (std::size_t i = 0; i < pop.size(); ++i) {
    const Vector& p = pop.member(i).probs();
    members.push_back(std::vector<double>(p.data(), p.data() + p.size()));
    const ConfirmEntry& e = pop.confirming(i);
    caches.push_back({{"mu_index", e.mu_index},
                      {"sc_advantage", e.sc_advantage},
                      {"response_value", e.response_value},
                      {"tied", e.tied},
                      {"stale", e.stale}});
  }
  return {{"owner", to_string(pop.owner())}, {"members", members}, {"confirming", caches}};
}

inline Population population_from_json(const BimatrixGame& game, const nlohmann::json& j) {
  const Player owner = j.at("owner").get<std::string>() == "row" ? Player::kRow : Player::kCol;
  Population pop(owner);
  const auto& members = j.at("members");
  const auto& caches = j.at("confirming");
  if (members.size() != caches.size()) throw GameError("checkpoint cache count mismatch");
  for (std::size_t i = 0; i < members.size(); ++i) {
    const auto probs = members[i].get<std::vector<double>>();
    Vector v = Eigen::Map<const Vector>(probs.data(), static_cast<Eigen::Index>(probs.size()));
    pop.append(game, MixedStrategy::exact(std::move(v)));
    ConfirmEntry& e = pop.mutable_confirming(i);
    e.mu_index = caches[i].at("mu_index").get<std::size_t>();
    e.sc_advantage = caches[i].at("sc_advantage").get<double>();
    e.response_value = caches[i].at("response_value").get<double>();
    e.tied = caches[i].at("tied").get<std::vector<std::size_t>>();
    e.stale = caches[i].at("stale").get<bool>();
  }
  return pop;
}

inline nlohmann::json to_json(const EngineState& state) {
  std::ostringstream rng;
  rng << state.rng;
  return {{"mode", to_string(state.mode)},
          {"iteration", state.iteration},
          {"rng", rng.str()},
          {"row", to_json(state.row)},
          {"col", to_json(state.col)}};
}

inline EngineState engine_state_from_json(const BimatrixGame& game, const nlohmann::json& j) {
  EngineState state;
  state.mode = parse_mode(j.at("mode").get<std::string>());
  state.iteration = j.at("iteration").get<std::size_t>();
  std::istringstream rng(j.at("rng").get<std::string>());
  rng >> state.rng;
  if (!rng) throw GameError("checkpoint has a malformed generator state");
  state.row = population_from_json(game, j.at("row"));
  state.col = population_from_json(game, j.at("col"));
  return state;
}

}  // namespace metagame
