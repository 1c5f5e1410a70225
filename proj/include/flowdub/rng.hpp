#pragma once

#include <cstdint>
#include <random>

namespace flowdub {

// Seedable generator used everywhere randomness enters. Identical seeds give
// identical draw sequences on every platform: only the raw 64-bit engine
// output is consumed, never the implementation-defined std distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform double in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
};

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

// Child seed for an independent stream; used to hand each parallel task its
// own generator.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

}  // namespace flowdub
