#pragma once

// Deterministic counter-based random number generation (splitmix64 core).
// Every stochastic part of the pipeline draws from an Rng keyed by
// (seed, stream), so scenes, shuffles and weight draws are reproducible
// bit-for-bit across runs and independent of each other.

#include <cmath>
#include <cstdint>

namespace ldr {

namespace detail {
inline uint64_t mix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace detail

class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(detail::mix64(seed)) {}

  Rng(uint64_t seed, uint64_t stream)
      : state_(detail::mix64(detail::mix64(seed) ^
                             (0x632be59bd9b4e019ULL * (stream + 1)))) {}

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Inclusive integer range.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    return lo + int64_t(next_u64() % uint64_t(hi - lo + 1));
  }

  // Standard normal, Box-Muller. Always consumes exactly two draws.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.28318530717958647692 * u2);
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  uint64_t state_;
};

// Stream tags keep unrelated consumers of the same user seed apart.
namespace stream {
constexpr uint64_t kScene = 0x5343454e45ULL;     // per-sample scene generation
constexpr uint64_t kShuffle = 0x53485546ULL;     // per-epoch batch order
constexpr uint64_t kInit = 0x494e4954ULL;        // weight initialization
constexpr uint64_t kBench = 0x42454e43ULL;       // benchmark frames
}  // namespace stream

}  // namespace ldr
