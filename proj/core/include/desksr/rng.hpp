// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

namespace desksr {

/// xoshiro256** seeded through splitmix64.
///
/// The standard library distributions are implementation-defined, so every
/// draw the library makes goes through this generator and the helpers below.
/// Given the same seed the stream is identical on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Independent stream for a (seed, a, b) triple, e.g. (seed, epoch, index).
  static Rng derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b);

  std::uint64_t next_u64();

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);

  /// Standard normal via Box-Muller (both outputs are used).
  double normal();

  template <class T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::array<std::uint64_t, 4> s_{};
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace desksr
