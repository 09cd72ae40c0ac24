// Copyright 2026 The netexp Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Counter-based random numbers keyed by (seed, stream, index, draw).
// Every value is a pure function of its key, so simulations can be replayed
// per unit and evaluated in any order.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace netexp {

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

class CounterRng {
 public:
  constexpr explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
      : key_(detail::splitmix64(detail::splitmix64(seed) ^ (stream * 0xd1b54a32d192ed03ULL))) {}

  constexpr std::uint64_t bits(std::uint64_t index, std::uint64_t draw = 0) const noexcept {
    std::uint64_t h = detail::splitmix64(key_ ^ detail::splitmix64(index));
    return detail::splitmix64(h + draw * 0x9e3779b97f4a7c15ULL);
  }

  // Uniform on the open interval (0, 1).
  double uniform(std::uint64_t index, std::uint64_t draw = 0) const noexcept {
    return (static_cast<double>(bits(index, draw) >> 11) + 0.5) * 0x1p-53;
  }

  // Standard normal via Box-Muller on draws (2*draw, 2*draw + 1).
  double normal(std::uint64_t index, std::uint64_t draw = 0) const noexcept {
    double u1 = uniform(index, 2 * draw);
    double u2 = uniform(index, 2 * draw + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Standard logistic by inversion.
  double logistic(std::uint64_t index, std::uint64_t draw = 0) const noexcept {
    double u = uniform(index, draw);
    return std::log(u) - std::log1p(-u);
  }

 private:
  std::uint64_t key_;
};

}  // namespace netexp
