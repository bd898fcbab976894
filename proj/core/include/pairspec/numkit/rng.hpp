// Copyright 2026 The pairspec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>

namespace pairspec::numkit {

/// 64-bit FNV-1a hash of a label.
std::uint64_t fnv1a(std::string_view text) noexcept;

// xoshiro256** seeded through SplitMix64 from (seed, label). Deterministic
// across platforms: every distribution below is implemented here rather than
// through <random> distributions, whose algorithms are unspecified.
class Rng {
 public:
  Rng(std::uint64_t seed, std::string_view label);

  std::uint64_t seed() const noexcept { return seed_; }

  /// Independent substream keyed by this stream's identity and `label`.
  Rng split(std::string_view label) const;
  Rng split(std::uint64_t index) const;

  std::uint64_t next_u64() noexcept;
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  double normal() noexcept;
  /// Uniform on {0, ..., n-1}; n must be positive.
  std::size_t uniform_int(std::size_t n);
  /// Index drawn with probability proportional to nonnegative `weights`.
  std::size_t categorical(std::span<const double> weights);

 private:
  Rng(std::uint64_t seed, std::uint64_t key);

  std::uint64_t seed_;
  std::uint64_t key_;
  std::array<std::uint64_t, 4> s_{};
};

/// Convenience constructor matching the library's stream-naming API.
inline Rng rng_stream(std::uint64_t seed, std::string_view label) { return Rng(seed, label); }

}  // namespace pairspec::numkit
