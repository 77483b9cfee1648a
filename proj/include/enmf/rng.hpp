// Copyright 2026 The enmf Authors.
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

#include <cstdint>
#include <random>

#include "enmf/matrix.hpp"

namespace enmf {

// All randomness in the library flows through std::mt19937_64 with draws
// mapped to [0, 1) by taking the top 53 bits. The generator, the mapping,
// and every fill order are fixed so that a seed pins down the bytes of the
// result on any conforming platform.

/// SplitMix64 finalizer; bijective on 64-bit words.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Derives a stream seed from a base seed and up to two indices. Used to
/// give every (dataset, init) pair of a benchmark suite its own stream.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a = 0, std::uint64_t b = 0) {
  constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;
  std::uint64_t h = mix64(base + kGolden);
  h = mix64(h ^ (a + kGolden));
  h = mix64(h ^ (b + kGolden));
  return h;
}

/// One draw uniform on [0, 1): top 53 bits scaled by 2^-53.
inline double uniform_unit(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

/// Fills a matrix with uniform [0, 1) draws in row-major order.
inline void fill_uniform(DenseMatrix& m, std::mt19937_64& gen) {
  double* p = m.data();
  for (std::size_t i = 0; i < m.size(); ++i) p[i] = uniform_unit(gen);
}

inline DenseMatrix uniform_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  DenseMatrix m(rows, cols, 0.0);
  std::mt19937_64 gen(seed);
  fill_uniform(m, gen);
  return m;
}

}  // namespace enmf
