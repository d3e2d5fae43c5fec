#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace quake {

// splitmix64 stream. Self-contained so that seeded runs are bit-identical
// across standard libraries (std distributions are implementation-defined).
struct Rng {
  std::uint64_t state;

  explicit Rng(std::uint64_t seed = 0) : state(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // [0, 1)
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal, Box-Muller
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  // unbiased integer in [0, n)
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) return 0;
    std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
  }

  // derive an independent stream (for per-file / per-cell seeding)
  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    Rng r(a ^ (0x9e3779b97f4a7c15ULL + (b << 6) + (b >> 2)));
    r.next_u64();
    return r.next_u64() ^ b;
  }
};

// seeded Fisher-Yates; deterministic everywhere, unlike std::shuffle
template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = std::size_t(rng.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace quake
