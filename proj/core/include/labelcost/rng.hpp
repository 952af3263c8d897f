// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace labelcost {

std::uint64_t splitmix64(std::uint64_t x);

/// Stable 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

/// Derives an independent stream seed for `key` under `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view key);

/// Seeded generator whose output is identical across standard libraries.
///
/// std::mt19937_64's sequence is fixed by the standard; the distributions
/// in <random> are not, so the conversions here are written out.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer on [0, bound), rejection-sampled; bound > 0.
  std::uint64_t below(std::uint64_t bound);
  /// Standard normal via Box-Muller.
  double normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace labelcost
