#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

namespace uap {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seeded random stream. The engine is the standard-specified mt19937_64 and
// every distribution is implemented here, so a seed fixes the exact sequence
// regardless of standard-library vendor.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Unbiased draw from [0, n).
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_index: empty range");
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // (0, 1]; safe as a log argument.
  double uniform01_positive() { return 1.0 - uniform01(); }

  bool coin() { return (next_u64() >> 63) != 0; }

  // Standard normal, Box-Muller without a cached spare.
  double gaussian() {
    const double u1 = uniform01_positive();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  // Exp(1).
  double exponential() { return -std::log(uniform01_positive()); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Independent stream for (seed, salt) so sub-experiments do not share draws.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t s = seed ^ (0x632be59bd9b4e019ULL * (salt + 1));
    return splitmix64(s);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace uap
