#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>

// Distribution helpers with a fixed algorithm. The standard <random>
// distributions are implementation-defined, which would make checkpoints
// differ between standard libraries.
namespace diffdetect::rng {

using Engine = std::mt19937_64;

// Uniform in [0, 1) with 53 random bits.
inline double unit(Engine& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

inline double uniform(Engine& gen, double lo, double hi) {
  return lo + (hi - lo) * unit(gen);
}

// Box-Muller; one draw per call, the sine branch is discarded.
inline double normal(Engine& gen) {
  double u1 = unit(gen);
  while (u1 <= 0.0) {
    u1 = unit(gen);
  }
  const double u2 = unit(gen);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Uniform integer in [0, bound) by rejection.
inline std::uint64_t below(Engine& gen, std::uint64_t bound) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x = gen();
  while (x >= limit) {
    x = gen();
  }
  return x % bound;
}

template <typename T>
void shuffle(std::span<T> items, Engine& gen) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::swap(items[i - 1], items[below(gen, i)]);
  }
}

}  // namespace diffdetect::rng
