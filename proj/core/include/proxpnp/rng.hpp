/*
 * Copyright 2026 The proxpnp Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "proxpnp/types.hpp"

namespace proxpnp {

/// Named sub-streams so that each artifact of an experiment (signal,
/// operator, dictionaries, noise, ...) draws from an independent sequence.
enum class Stream : std::uint64_t {
  kDefault = 0,
  kSignal = 1,
  kOperator = 2,
  kAnalysisDictionary = 3,
  kSynthesisDictionary = 4,
  kNoise = 5,
  kPowerIteration = 6,
  kPatches = 7,
  kSampling = 8,
};

/// Portable pseudo-random generator.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. Distributions are implemented here rather than taken from
/// <random> because the standard distributions are implementation-defined:
///   uniform01()  = (next() >> 11) * 2^-53, in [0, 1)
///   normal()     = Box-Muller on two uniforms, u1 mapped to (0, 1]
/// The engine seed for (seed, stream) is splitmix64(seed ^ splitmix64(stream)).
class Rng {
 public:
  explicit Rng(std::uint64_t seed, Stream stream = Stream::kDefault);

  std::uint64_t next() { return engine_(); }
  double uniform01();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  Vector normal_vector(Index n);
  Vector uniform_vector(Index n, double lo = 0.0, double hi = 1.0);
  /// Row-major fill, so the matrix is independent of Eigen's storage order.
  Matrix normal_matrix(Index rows, Index cols);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

/// 64-bit FNV-1a, used for config and artifact hashes.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace proxpnp
