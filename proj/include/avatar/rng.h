#pragma once

#include <cstdint>
#include <random>

namespace avatar {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Deterministic across platforms: mt19937_64 output is fully specified by the
// standard, and every derived draw below is built from raw engine words
// rather than the (implementation-defined) standard distributions.
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed), engine_(seed) {}

  uint64_t seed() const { return seed_; }

  uint64_t next_u64() { return engine_(); }

  // [0, 1), 53 bits of precision.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased draw from [0, n). n must be > 0.
  uint64_t uniform_int(uint64_t n);

  // Standard normal via Box-Muller; two engine words per call, no cached spare.
  double gaussian();

  // Gaussian resampled until |z| <= 2, then scaled.
  double trunc_normal(double stddev);

  // Independent child stream. Derived from the original seed, so forks are
  // insensitive to how much of this stream has been consumed.
  Rng fork(uint64_t stream) const {
    return Rng(splitmix64(seed_ ^ splitmix64(stream ^ 0x51ed2701a3c5e964ull)));
  }

 private:
  uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace avatar
