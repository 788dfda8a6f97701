#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace pubtrend {

// Seeded generator whose raw stream is fully specified (std::mt19937_64 has
// published reference outputs). Normal and Poisson variates are derived here
// rather than via <random> distributions, whose algorithms vary between
// standard library implementations.
class Rng {
 public:
  static constexpr std::string_view kAlgorithm = "mt19937_64";

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal();

  // Knuth multiplication for small means, PTRS transformed rejection otherwise.
  std::int64_t poisson(double mean);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace pubtrend
