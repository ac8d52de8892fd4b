#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace ordernet {

// Deterministic PRNG (splitmix64). Every random draw in the project routes
// through this class so datasets, shuffles and weight initialization
// regenerate bit-identically from a seed on any platform. The constants are
// the standard splitmix64 ones (Steele, Lea & Flood, as used in
// java.util.SplittableRandom).
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53-bit resolution.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in [0, bound), bound > 0. Rejection sampling keeps the draw
  // unbiased without any platform-dependent modular tricks.
  std::uint64_t next_below(std::uint64_t bound) {
    std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      std::uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

  // Standard normal, Box-Muller; the paired variate is cached.
  double next_gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u = 1.0 - next_double();  // (0, 1], keeps log finite
    double v = next_double();
    double r = std::sqrt(-2.0 * std::log(u));
    double theta = 6.283185307179586476925286766559 * v;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // Fisher-Yates, descending form.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
  double spare_{0.0};
  bool has_spare_{false};
};

// splitmix64 finalizer on its own; bijective, avalanching.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Seed for a derived stream, e.g. instance #index of size n inside a dataset.
// The xor-of-mixes construction decorrelates nearby (base, a, b) triples.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                                 std::uint64_t b = 0) {
  return mix64(base ^ mix64(a ^ mix64(b ^ 0x510E527FADE682D1ull)));
}

}  // namespace ordernet
