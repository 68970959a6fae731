#pragma once

#include <cstdint>
#include <initializer_list>
#include <vector>

namespace bradcn {

/// Seeds every random source used by the library (parameter init, data
/// shuffling, synthetic scene generation). Must be called before any model is
/// constructed or any split is drawn; later calls reseed everything.
void seed_all(uint64_t seed);

/// The seed most recently passed to seed_all (default 0 until called).
uint64_t global_seed();

/// Derives a stream seed from a base seed and salt values. Stable across
/// platforms, so manifests and synthetic corpora reproduce everywhere.
uint64_t mix_seed(uint64_t base, std::initializer_list<uint64_t> salts);

/// splitmix64 generator. Used wherever the artifact needs platform-stable
/// randomness (std::shuffle and std::uniform_int_distribution are
/// implementation-defined, so they are off limits for manifests).
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64();

  /// Uniform in [0, 1).
  double next_real();

  /// Uniform in [lo, hi] inclusive. Unbiased (rejection sampling).
  int64_t next_int(int64_t lo, int64_t hi);

  /// Fisher-Yates shuffle driven by this generator.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<size_t>(next_int(0, static_cast<int64_t>(i) - 1));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  uint64_t state_;
};

}  // namespace bradcn
