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

#include <cstdint>
#include <random>

#include "metagame/types.hpp"

namespace metagame {

// Every consumer of randomness owns a std::mt19937_64 seeded from
// (seed, stream). Outputs are reproducible for a given build.
using Rng = std::mt19937_64;

namespace streams {
inline constexpr std::uint32_t kGameGenerator = 1;
inline constexpr std::uint32_t kDiagnostics = 2;
inline constexpr std::uint32_t kEngine = 3;
inline constexpr std::uint32_t kMetaSolver = 4;
}  // namespace streams

inline Rng make_rng(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32), stream};
  return Rng(seq);
}

// Uniform draw from the probability simplex (Dirichlet with unit
// concentration) via normalized Exp(1) variates.
inline MixedStrategy sample_dirichlet_one(std::size_t size, Rng& rng) {
  std::exponential_distribution<double> expo(1.0);
  Vector w(static_cast<Eigen::Index>(size));
  for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = expo(rng);
  if (!(w.sum() > 0.0)) return MixedStrategy::uniform(size);
  return MixedStrategy::normalized(std::move(w));
}

}  // namespace metagame
