#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace stormcast {

/// Seeded generator used everywhere a run must be reproducible.
///
/// Bounded integers and uniform reals are derived from the raw engine output
/// with fixed formulas; std distributions are implementation-defined and would
/// break byte-identical reruns across standard libraries.
class Rng {
public:
  static constexpr std::string_view kName = "mt19937_64";

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound) {
    // rejection sampling on the top of the range keeps the result unbiased
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t r;
    do {
      r = engine_();
    } while (r >= limit);
    return r % bound;
  }

  /// Uniform real in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller.
  double normal();

  /// Poisson variate (Knuth for small means, normal approximation above 30).
  std::uint32_t poisson(double mean);

private:
  std::mt19937_64 engine_;
};

/// splitmix64 finaliser; derives independent child seeds from (seed, index).
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  std::uint64_t z = seed ^ (index + 0x9E3779B97F4A7C15ULL + (seed << 6) + (seed >> 2));
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

} // namespace stormcast
