#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace bcvnn {

/// Seeded generator with distribution code written out by hand, so draws are
/// identical across standard libraries (std:: distributions are not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }

  /// Standard normal via Box-Muller; consumes two uniforms per call.
  double normal();

  /// Deterministic child seed for (seed, key...) so independent streams can be
  /// created in any order or on any thread.
  static std::uint64_t derive(std::uint64_t seed, std::initializer_list<std::uint64_t> keys);

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace bcvnn
