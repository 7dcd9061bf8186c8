#pragma once

// Portable seeded randomness.
//
// std::mt19937_64 produces the same sequence on every conforming standard
// library, but the std distributions do not. Everything that draws from a
// range goes through the helpers below so shuffles and initial weights are
// identical across platforms:
//
//   uniform_below(n): draw r = next() until r >= (2^64 - n) % n, return r % n
//   uniform01():      (next() >> 11) * 2^-53
//   shuffle:          Fisher-Yates, i = n-1 .. 1, swap(i, uniform_below(i+1))
//
// Named sub-seeds: derive_seed(seed, name) = splitmix64(seed ^ fnv1a64(name)).

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace rfsnn {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view name) {
  return splitmix64(seed ^ fnv1a64(name));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next() { return gen_(); }

  std::uint64_t uniform_below(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = gen_();
      if (r >= threshold) return r % n;
    }
  }

  double uniform01() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

 private:
  std::mt19937_64 gen_;
};

template <class E>
void shuffle(std::span<E> items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.uniform_below(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace rfsnn
