/*
 * Copyright 2026 The CCFV Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Deterministic seeding and draws.
//
// Every random stream in ccfv is keyed by a tuple of fields (global seed,
// case id, scale, class, ...) folded through splitmix64, so independent
// draws stay reproducible without shared generator state.

#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace ccfv {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class SeedMixer {
 public:
  explicit constexpr SeedMixer(std::uint64_t seed) : state_(splitmix64(seed)) {}

  constexpr SeedMixer& add(std::uint64_t field) {
    state_ = splitmix64(state_ ^ field);
    return *this;
  }

  constexpr SeedMixer& add(std::string_view text) {
    add(static_cast<std::uint64_t>(text.size()));
    for (unsigned char c : text) state_ = splitmix64(state_ ^ c);
    return *this;
  }

  constexpr std::uint64_t value() const { return state_; }

 private:
  std::uint64_t state_;
};

using Rng = std::mt19937_64;

// Uniform integer in [0, bound). Multiply-shift with rejection; unlike
// std::uniform_int_distribution the sequence is identical on every toolchain.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t bound) {
  if (bound == 0) return 0;
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t x = rng();
    const unsigned __int128 m = static_cast<unsigned __int128>(x) * bound;
    if (static_cast<std::uint64_t>(m) >= threshold) {
      return static_cast<std::uint64_t>(m >> 64);
    }
  }
}

// Uniform real in [0, 1) with 53 random bits.
inline double uniform_unit(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// k distinct indices from [0, pool), in draw order (partial Fisher-Yates).
inline std::vector<std::size_t> choose_without_replacement(std::size_t pool, std::size_t k,
                                                           std::uint64_t seed) {
  if (k > pool) k = pool;
  std::vector<std::size_t> idx(pool);
  for (std::size_t i = 0; i < pool; ++i) idx[i] = i;
  Rng rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(uniform_below(rng, pool - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

}  // namespace ccfv
