// include/hsaudit/rng.h

// Copyright 2026  The hsaudit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef HSAUDIT_RNG_H_
#define HSAUDIT_RNG_H_

#include <cstdint>
#include <random>
#include <string_view>

#include "hsaudit/core.h"

namespace hsaudit {

/// 64-bit FNV-1a over the bytes of s.
std::uint64_t fnv1a64(std::string_view s);

/// splitmix64 finalizer.
std::uint64_t splitmix64(std::uint64_t x);

/// Seed of the random stream owned by `key` under a global seed:
///   splitmix64(seed ^ splitmix64(fnv1a64(key))).
/// Streams keyed by utterance or speaker id make generation independent of
/// iteration order.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view key);

/// Portable random source.  std::mt19937_64 output is fixed by the standard;
/// the distributions below are implemented here (not via <random>
/// distributions, whose algorithms vary between standard libraries) so that
/// draws are bit-identical across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n);
  /// Standard normal (Box-Muller, cached pair).
  double normal();
  Vector normal_vector(Eigen::Index n);
  Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Haar-distributed random orthogonal matrix (QR of a Gaussian matrix with
/// the sign of R's diagonal folded into Q).
Matrix random_orthogonal(Eigen::Index n, Rng& rng);

}  // namespace hsaudit

#endif  // HSAUDIT_RNG_H_
