#include "bradcn/rng.hpp"

#include <torch/torch.h>

namespace bradcn {

namespace {
uint64_t g_seed = 0;

uint64_t splitmix64(uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace

void seed_all(uint64_t seed) {
  g_seed = seed;
  torch::manual_seed(seed);
}

uint64_t global_seed() { return g_seed; }

uint64_t mix_seed(uint64_t base, std::initializer_list<uint64_t> salts) {
  uint64_t state = base;
  uint64_t out = splitmix64(state);
  for (uint64_t salt : salts) {
    state ^= salt + 0x9e3779b97f4a7c15ULL + (state << 6) + (state >> 2);
    out = splitmix64(state);
  }
  return out;
}

uint64_t Rng::next_u64() { return splitmix64(state_); }

double Rng::next_real() {
  // 53 mantissa bits -> uniform double in [0, 1).
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

int64_t Rng::next_int(int64_t lo, int64_t hi) {
  const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
  if (span == 0) return static_cast<int64_t>(next_u64());  // full 64-bit range
  const uint64_t limit = UINT64_MAX - UINT64_MAX % span;
  uint64_t draw;
  do {
    draw = next_u64();
  } while (draw >= limit);
  return lo + static_cast<int64_t>(draw % span);
}

}  // namespace bradcn
