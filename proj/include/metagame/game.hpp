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
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "metagame/random.hpp"
#include "metagame/types.hpp"

namespace metagame {

// Two-player normal-form game given by one payoff matrix per player.
//
// Both matrices are indexed [row action][column action]. Transposed copies
// are kept so every per-player computation can treat that player's own
// actions as matrix rows.
class BimatrixGame {
 public:
  BimatrixGame() = default;

  BimatrixGame(Matrix u_row, Matrix u_col, std::string name = {})
      : u_row_(std::move(u_row)), u_col_(std::move(u_col)),
        name_(std::move(name)) {
    if (u_row_.size() == 0 || u_col_.size() == 0) {
      throw GameError("payoff matrices must be nonempty");
    }
    if (u_row_.rows() != u_col_.rows() || u_row_.cols() != u_col_.cols()) {
      throw GameError("payoff matrix shape mismatch: U_row is " +
                      shape(u_row_) + ", U_col is " + shape(u_col_));
    }
    if (!u_row_.allFinite() || !u_col_.allFinite()) {
      throw GameError("payoff matrices contain a non-finite entry");
    }
    u_row_t_ = u_row_.transpose();
    u_col_t_ = u_col_.transpose();
    symmetric_zero_sum_ = detect_symmetric_zero_sum(1e-12);
  }

  std::size_t rows() const noexcept {
    return static_cast<std::size_t>(u_row_.rows());
  }
  std::size_t cols() const noexcept {
    return static_cast<std::size_t>(u_row_.cols());
  }
  std::size_t actions(Player p) const noexcept {
    return p == Player::kRow ? rows() : cols();
  }

  const Matrix& u_row() const noexcept { return u_row_; }
  const Matrix& u_col() const noexcept { return u_col_; }
  const std::string& name() const noexcept { return name_; }
  bool symmetric_zero_sum() const noexcept { return symmetric_zero_sum_; }

  // Payoffs of `p`, indexed [p's action][opponent's action].
  const Matrix& own(Player p) const noexcept {
    return p == Player::kRow ? u_row_ : u_col_t_;
  }
  // Payoffs of `p`'s opponent, indexed [p's action][opponent's action].
  const Matrix& opposing(Player p) const noexcept {
    return p == Player::kRow ? u_col_ : u_row_t_;
  }

  double max_abs_payoff(Player p) const {
    return own(p).cwiseAbs().maxCoeff();
  }

 private:
  static std::string shape(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
  }

  bool detect_symmetric_zero_sum(double tol) const {
    if (u_row_.rows() != u_row_.cols()) return false;
    if ((u_row_ + u_col_).cwiseAbs().maxCoeff() > tol) return false;
    return (u_row_ + u_row_t_).cwiseAbs().maxCoeff() <= tol;
  }

  Matrix u_row_;
  Matrix u_col_;
  Matrix u_row_t_;
  Matrix u_col_t_;
  std::string name_;
  bool symmetric_zero_sum_ = false;
};

inline BimatrixGame new_game(Matrix u_row, Matrix u_col, std::string name = {}) {
  return BimatrixGame(std::move(u_row), std::move(u_col), std::move(name));
}

struct PayoffPair {
  double row = 0.0;
  double col = 0.0;
};

inline PayoffPair payoff(const BimatrixGame& game, const MixedStrategy& pi_row,
                         const MixedStrategy& pi_col) {
  if (pi_row.size() != game.rows() || pi_col.size() != game.cols()) {
    throw GameError("strategy length does not match game dimensions");
  }
  const Vector& x = pi_row.probs();
  const Vector& y = pi_col.probs();
  return {x.dot(game.u_row() * y), x.dot(game.u_col() * y)};
}

// ---------------------------------------------------------------------------
// Generators

enum class GameKind { kSymmetricZeroSum, kTransitive, kElo, kGeneralSum, kBuiltin };

inline GameKind parse_game_kind(std::string_view s) {
  if (s == "symmetric_zero_sum") return GameKind::kSymmetricZeroSum;
  if (s == "transitive") return GameKind::kTransitive;
  if (s == "elo") return GameKind::kElo;
  if (s == "general_sum_random" || s == "general_sum") return GameKind::kGeneralSum;
  if (s == "builtin") return GameKind::kBuiltin;
  throw GameError("unknown game kind '" + std::string(s) + "'");
}

inline const char* to_string(GameKind k) {
  switch (k) {
    case GameKind::kSymmetricZeroSum: return "symmetric_zero_sum";
    case GameKind::kTransitive: return "transitive";
    case GameKind::kElo: return "elo";
    case GameKind::kGeneralSum: return "general_sum_random";
    case GameKind::kBuiltin: return "builtin";
  }
  return "?";
}

struct GameGenSpec {
  GameKind kind = GameKind::kSymmetricZeroSum;
  std::size_t dim = 2;
  double noise = 0.0;
  std::uint64_t seed = 0;
  std::string builtin_name;

  void validate() const {
    if (kind == GameKind::kBuiltin) return;
    if (dim < 2) throw GameError("generated games need dim >= 2");
    if (!(noise >= 0.0) || !std::isfinite(noise)) {
      throw GameError("noise must be finite and >= 0");
    }
  }

  // Label shared by every seed of the same generator configuration.
  std::string family() const {
    std::ostringstream os;
    if (kind == GameKind::kBuiltin) return builtin_name;
    os << to_string(kind) << "_d" << dim;
    if (kind == GameKind::kElo) os << "_n" << noise;
    return os.str();
  }
};

namespace detail {

inline Matrix antisymmetrize(const Matrix& a) {
  Matrix out = a - a.transpose();
  return out;
}

inline BimatrixGame zero_sum_from(Matrix u_row, std::string name) {
  Matrix u_col = -u_row;
  return BimatrixGame(std::move(u_row), std::move(u_col), std::move(name));
}

}  // namespace detail

// U_row = A - A^T with A_ij ~ N(0, 1).
inline BimatrixGame gen_symmetric_zero_sum(std::size_t dim, std::uint64_t seed) {
  GameGenSpec{GameKind::kSymmetricZeroSum, dim, 0.0, seed, {}}.validate();
  auto rng = make_rng(seed, streams::kGameGenerator);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto n = static_cast<Eigen::Index>(dim);
  Matrix a(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = normal(rng);
  return detail::zero_sum_from(detail::antisymmetrize(a),
                               "symmetric_zero_sum_d" + std::to_string(dim));
}

// Strengths f_1 < ... < f_dim (sorted N(0,1) draws); U_ij = tanh(f_i - f_j).
inline BimatrixGame gen_transitive(std::size_t dim, std::uint64_t seed) {
  GameGenSpec{GameKind::kTransitive, dim, 0.0, seed, {}}.validate();
  auto rng = make_rng(seed, streams::kGameGenerator);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> strength(dim);
  for (auto& s : strength) s = normal(rng);
  std::sort(strength.begin(), strength.end());
  const auto n = static_cast<Eigen::Index>(dim);
  Matrix u = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = std::tanh(strength[static_cast<std::size_t>(i)] -
                                 strength[static_cast<std::size_t>(j)]);
      u(i, j) = v;
      u(j, i) = -v;
    }
  }
  return detail::zero_sum_from(std::move(u), "transitive_d" + std::to_string(dim));
}

// Ratings r_k ~ N(0,1); b_ij = 2 sigmoid(r_i - r_j) - 1; E_ij ~ N(0, noise^2);
// U = ((b + E) - (b + E)^T) / 2.
inline BimatrixGame gen_elo(std::size_t dim, double noise, std::uint64_t seed) {
  GameGenSpec{GameKind::kElo, dim, noise, seed, {}}.validate();
  auto rng = make_rng(seed, streams::kGameGenerator);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto n = static_cast<Eigen::Index>(dim);
  Vector rating(n);
  for (Eigen::Index k = 0; k < n; ++k) rating[k] = normal(rng);
  Matrix x(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double win = 1.0 / (1.0 + std::exp(-(rating[i] - rating[j])));
      x(i, j) = 2.0 * win - 1.0;
    }
  }
  if (noise > 0.0) {
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) x(i, j) += noise * normal(rng);
  }
  Matrix u = detail::antisymmetrize(x) * 0.5;
  std::ostringstream name;
  name << "elo_d" << dim << "_n" << noise;
  return detail::zero_sum_from(std::move(u), name.str());
}

inline constexpr double kGeneralSumLow = 0.0;
inline constexpr double kGeneralSumHigh = 10.0;

// Independent U_row and U_col with i.i.d. Uniform[0, 10] entries.
inline BimatrixGame gen_general_sum(std::size_t dim, std::uint64_t seed) {
  GameGenSpec{GameKind::kGeneralSum, dim, 0.0, seed, {}}.validate();
  auto rng = make_rng(seed, streams::kGameGenerator);
  std::uniform_real_distribution<double> unif(kGeneralSumLow, kGeneralSumHigh);
  const auto n = static_cast<Eigen::Index>(dim);
  Matrix u_row(n, n);
  Matrix u_col(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) u_row(i, j) = unif(rng);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) u_col(i, j) = unif(rng);
  return BimatrixGame(std::move(u_row), std::move(u_col),
                      "general_sum_random_d" + std::to_string(dim));
}

inline BimatrixGame builtin(std::string_view name) {
  auto mat = [](std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m(static_cast<Eigen::Index>(rows.size()),
             static_cast<Eigen::Index>(rows.begin()->size()));
    Eigen::Index i = 0;
    for (const auto& r : rows) {
      Eigen::Index j = 0;
      for (double v : r) m(i, j++) = v;
      ++i;
    }
    return m;
  };
  if (name == "stackelberg_table1") {
    // Rows U, D; columns L, R.
    return BimatrixGame(mat({{1, 3}, {2, 4}}), mat({{0, 2}, {1, 0}}),
                        std::string(name));
  }
  if (name == "stag_hunt_table2") {
    return BimatrixGame(mat({{30, -10}, {-10, 20}}), mat({{30, -10}, {-10, 20}}),
                        std::string(name));
  }
  if (name == "rps") {
    // Rock, Paper, Scissors.
    Matrix u = mat({{0, -1, 1}, {1, 0, -1}, {-1, 1, 0}});
    return detail::zero_sum_from(std::move(u), "rps");
  }
  if (name == "matching_pennies") {
    Matrix u = mat({{1, -1}, {-1, 1}});
    return detail::zero_sum_from(std::move(u), "matching_pennies");
  }
  throw GameError("unknown builtin game '" + std::string(name) + "'");
}

inline BimatrixGame generate(const GameGenSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case GameKind::kSymmetricZeroSum: return gen_symmetric_zero_sum(spec.dim, spec.seed);
    case GameKind::kTransitive: return gen_transitive(spec.dim, spec.seed);
    case GameKind::kElo: return gen_elo(spec.dim, spec.noise, spec.seed);
    case GameKind::kGeneralSum: return gen_general_sum(spec.dim, spec.seed);
    case GameKind::kBuiltin: return builtin(spec.builtin_name);
  }
  throw GameError("unhandled game kind");
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.empty()) {
    throw GameError(std::string(what) + " must be a nonempty array of rows");
  }
  const std::size_t cols = j.front().is_array() ? j.front().size() : 0;
  if (cols == 0) throw GameError(std::string(what) + " has an empty row");
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& row = j[i];
    if (!row.is_array() || row.size() != cols) {
      throw GameError(std::string(what) + " is not rectangular");
    }
    for (std::size_t k = 0; k < cols; ++k) {
      if (!row[k].is_number()) {
        throw GameError(std::string(what) + " has a non-numeric entry");
      }
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          row[k].get<double>();
    }
  }
  return m;
}

inline nlohmann::json to_json(const BimatrixGame& game) {
  return nlohmann::json{{"name", game.name()},
                        {"n_rows", game.rows()},
                        {"n_cols", game.cols()},
                        {"U_row", matrix_to_json(game.u_row())},
                        {"U_col", matrix_to_json(game.u_col())},
                        {"symmetric_zero_sum", game.symmetric_zero_sum()}};
}

inline BimatrixGame game_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw GameError("game file must hold a JSON object");
  for (const char* key : {"U_row", "U_col"}) {
    if (!j.contains(key)) {
      throw GameError(std::string("game file is missing '") + key + "'");
    }
  }
  Matrix u_row = matrix_from_json(j.at("U_row"), "U_row");
  Matrix u_col = matrix_from_json(j.at("U_col"), "U_col");
  if (j.contains("n_rows") && j.at("n_rows").get<std::size_t>() !=
                                  static_cast<std::size_t>(u_row.rows())) {
    throw GameError("n_rows does not match U_row");
  }
  if (j.contains("n_cols") && j.at("n_cols").get<std::size_t>() !=
                                  static_cast<std::size_t>(u_row.cols())) {
    throw GameError("n_cols does not match U_row");
  }
  std::string name = j.value("name", std::string{});
  BimatrixGame game(std::move(u_row), std::move(u_col), std::move(name));
  if (j.value("symmetric_zero_sum", false) && !game.symmetric_zero_sum()) {
    throw GameError("file flags symmetric_zero_sum but matrices are not");
  }
  return game;
}

inline void save_game(const BimatrixGame& game, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw GameError("cannot open '" + path + "' for writing");
  out << to_json(game).dump(1) << '\n';
  if (!out) throw GameError("failed writing '" + path + "'");
}

inline BimatrixGame load_game(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw GameError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw GameError("malformed game file '" + path + "': " + e.what());
  }
  try {
    return game_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw GameError("malformed game file '" + path + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Structural diagnostics

namespace detail {
inline void require_symmetric_zero_sum(const BimatrixGame& game) {
  if (!game.symmetric_zero_sum()) {
    throw GameError("diagnostic requires a symmetric zero-sum game");
  }
}

inline bool violates_transitivity(const Matrix& u, Eigen::Index i, Eigen::Index j,
                                  Eigen::Index k) {
  return u(i, j) >= 0.0 && u(j, k) >= 0.0 && u(i, k) < 0.0;
}
}  // namespace detail

// Fraction of uniformly drawn ordered triples (i, j, k) with
// U_ij >= 0, U_jk >= 0 and U_ik < 0.
inline double transitivity_violation_rate(const BimatrixGame& game,
                                          std::size_t samples,
                                          std::uint64_t seed) {
  detail::require_symmetric_zero_sum(game);
  if (samples == 0) throw GameError("samples must be >= 1");
  auto rng = make_rng(seed, streams::kDiagnostics);
  std::uniform_int_distribution<Eigen::Index> pick(
      0, static_cast<Eigen::Index>(game.rows()) - 1);
  const Matrix& u = game.u_row();
  std::size_t violations = 0;
  for (std::size_t s = 0; s < samples; ++s) {
    const auto i = pick(rng);
    const auto j = pick(rng);
    const auto k = pick(rng);
    if (detail::violates_transitivity(u, i, j, k)) ++violations;
  }
  return static_cast<double>(violations) / static_cast<double>(samples);
}

// Same quantity over all n^3 ordered triples.
inline double transitivity_violation_rate_exhaustive(const BimatrixGame& game) {
  detail::require_symmetric_zero_sum(game);
  const Matrix& u = game.u_row();
  const Eigen::Index n = u.rows();
  std::size_t violations = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index k = 0; k < n; ++k)
        if (detail::violates_transitivity(u, i, j, k)) ++violations;
  return static_cast<double>(violations) / static_cast<double>(n * n * n);
}

// Mean payoff of a pure strategy against every opponent pure strategy.
inline double cyclic_balance(const BimatrixGame& game, std::size_t row_index) {
  detail::require_symmetric_zero_sum(game);
  if (row_index >= game.rows()) throw GameError("row index out of range");
  return game.u_row().row(static_cast<Eigen::Index>(row_index)).mean();
}

}  // namespace metagame
