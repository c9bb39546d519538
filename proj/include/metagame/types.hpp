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

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace metagame {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Absolute tolerance used whenever a set of tied best responses is formed.
inline constexpr double kTieTolerance = 1e-9;
// Accepted deviation of a probability vector's sum from one.
inline constexpr double kSimplexTolerance = 1e-12;

enum class Player { kRow = 0, kCol = 1 };

constexpr Player opponent(Player p) noexcept {
  return p == Player::kRow ? Player::kCol : Player::kRow;
}

constexpr std::size_t index_of(Player p) noexcept {
  return static_cast<std::size_t>(p);
}

inline const char* to_string(Player p) noexcept {
  return p == Player::kRow ? "row" : "col";
}

// Thrown for any violated input contract (shapes, ranges, malformed files).
class GameError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A probability vector over one player's pure strategies.
//
// Construction validates non-negativity and finiteness and rescales the
// entries so that they sum to one.
class MixedStrategy {
 public:
  MixedStrategy() = default;

  // `probs` must be non-negative, finite and sum to one within 1e-9; the
  // stored vector is renormalized exactly.
  explicit MixedStrategy(Vector probs) : probs_(std::move(probs)) {
    validate_entries(probs_);
    const double total = probs_.sum();
    if (std::abs(total - 1.0) > 1e-9) {
      throw GameError("mixed strategy does not sum to one (sum = " +
                      std::to_string(total) + ")");
    }
    probs_ /= total;
  }

  MixedStrategy(std::initializer_list<double> probs)
      : MixedStrategy(from_list(probs)) {}

  // Divides a non-negative vector with positive mass by its sum.
  static MixedStrategy normalized(Vector weights) {
    validate_entries(weights);
    const double total = weights.sum();
    if (!(total > 0.0)) throw GameError("cannot normalize a zero vector");
    MixedStrategy out;
    out.probs_ = weights / total;
    return out;
  }

  // Keeps the entries bit-for-bit; the sum must already be one within 1e-9.
  static MixedStrategy exact(Vector probs) {
    validate_entries(probs);
    if (std::abs(probs.sum() - 1.0) > 1e-9) {
      throw GameError("mixed strategy does not sum to one");
    }
    MixedStrategy out;
    out.probs_ = std::move(probs);
    return out;
  }

  static MixedStrategy pure(std::size_t size, std::size_t index) {
    if (index >= size) throw GameError("pure strategy index out of range");
    MixedStrategy out;
    out.probs_ = Vector::Zero(static_cast<Eigen::Index>(size));
    out.probs_[static_cast<Eigen::Index>(index)] = 1.0;
    return out;
  }

  static MixedStrategy uniform(std::size_t size) {
    if (size == 0) throw GameError("uniform strategy over an empty set");
    MixedStrategy out;
    out.probs_ = Vector::Constant(static_cast<Eigen::Index>(size),
                                  1.0 / static_cast<double>(size));
    return out;
  }

  std::size_t size() const noexcept {
    return static_cast<std::size_t>(probs_.size());
  }
  const Vector& probs() const noexcept { return probs_; }
  double operator[](std::size_t i) const {
    return probs_[static_cast<Eigen::Index>(i)];
  }
  double max_weight() const noexcept {
    return probs_.size() == 0 ? 0.0 : probs_.maxCoeff();
  }

  friend bool operator==(const MixedStrategy& a, const MixedStrategy& b) {
    return a.probs_.size() == b.probs_.size() &&
           (a.probs_.array() == b.probs_.array()).all();
  }

 private:
  static Vector from_list(std::initializer_list<double> probs) {
    Vector v(static_cast<Eigen::Index>(probs.size()));
    Eigen::Index i = 0;
    for (double p : probs) v[i++] = p;
    return v;
  }

  static void validate_entries(const Vector& v) {
    if (v.size() == 0) throw GameError("mixed strategy is empty");
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (!std::isfinite(v[i])) throw GameError("non-finite probability");
      if (v[i] < 0.0) throw GameError("negative probability");
    }
  }

  Vector probs_;
};

inline bool on_simplex(const Vector& v, double tol = kSimplexTolerance) {
  if (v.size() == 0) return false;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i]) || v[i] < 0.0) return false;
  }
  return std::abs(v.sum() - 1.0) <= tol;
}

}  // namespace metagame
