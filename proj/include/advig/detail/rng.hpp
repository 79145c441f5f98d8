#pragma once

#include <cstdint>
#include <random>

namespace advig::detail {

// splitmix64 step; used to derive well-separated stream seeds from one
// master seed so worker scheduling cannot change which numbers a given
// particle or dataset entry sees.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt) {
  return splitmix64(base + 0x9E3779B97F4A7C15ull * (salt + 1));
}

// Deterministic uniform source. std::mt19937_64's output sequence is fixed
// by the standard; the mappings below avoid std::uniform_*_distribution,
// whose results differ between standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next() { return eng_(); }

  /// Uniform double in [0, 1).
  double u01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

  /// Uniform integer in [lo, hi], inclusive.
  int uniform_int(int lo, int hi) {
    const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
    const auto wide = static_cast<unsigned __int128>(eng_()) * range;
    return lo + static_cast<int>(wide >> 64);
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace advig::detail
