#pragma once

// Deterministic RNG streams. Every randomized operation owns a stream derived
// from (seed, purpose-tag[, index]) so that adding or reordering operations
// never shifts the draws seen by unrelated code. Distribution transforms are
// written out by hand: std:: distributions are implementation-defined and
// would break bit-reproducibility of persisted outputs across toolchains.

#include <cstdint>
#include <limits>
#include <numbers>
#include <cmath>
#include <random>
#include <span>
#include <stdexcept>
#include <string_view>

namespace calibench::rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag,
                                 std::uint64_t index = 0) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ fnv1a64(tag));
  return splitmix64(h ^ index);
}

class Stream {
 public:
  explicit Stream(std::uint64_t raw_seed) : eng_(raw_seed) {}
  Stream(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0)
      : eng_(derive_seed(seed, tag, index)) {}

  std::uint64_t next_u64() { return eng_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // [0, n)
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n == 0) throw std::domain_error("uniform_int: n must be positive");
    const std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t reject = ((kMax % n) + 1) % n;  // 2^64 mod n
    for (;;) {
      std::uint64_t x = next_u64();
      if (reject == 0 || x <= kMax - reject) return x % n;
    }
  }

  // Box-Muller with cached spare.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0,1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // Index into a normalized probability row; clamps the final bucket so a
  // cumulative sum a few ulps under 1 cannot fall off the end.
  int categorical(std::span<const double> probs) {
    if (probs.empty()) throw std::domain_error("categorical: empty row");
    double u = uniform();
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < probs.size(); ++k) {
      acc += probs[k];
      if (u < acc) return static_cast<int>(k);
    }
    return static_cast<int>(probs.size() - 1);
  }

  // Fisher-Yates permutation of 0..n-1.
  std::vector<int> permutation(int n) {
    std::vector<int> p(n);
    for (int i = 0; i < n; ++i) p[i] = i;
    for (int i = n - 1; i > 0; --i) {
      int j = static_cast<int>(uniform_int(static_cast<std::uint64_t>(i) + 1));
      std::swap(p[i], p[j]);
    }
    return p;
  }

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace calibench::rng
