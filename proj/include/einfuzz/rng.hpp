#pragma once

#include <cassert>
#include <cstdint>
#include <random>
#include <vector>

namespace einfuzz {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed for an independent stream (per document, per fuzzing iteration, ...).
// Mixing through splitmix64 keeps nearby stream ids decorrelated.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return splitmix64(base ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

// All randomness flows through this wrapper around std::mt19937_64. The raw
// engine sequence is fixed by the C++ standard; the bounded draws below are
// implemented here because std::uniform_int_distribution is not reproducible
// across standard libraries. Same seed -> same stream, everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next() { return gen_(); }

  // Uniform in [0, bound), bias-free via rejection sampling.
  std::uint64_t below(std::uint64_t bound) {
    assert(bound > 0);
    const std::uint64_t threshold = -bound % bound;
    for (;;) {
      const std::uint64_t r = gen_();
      if (r >= threshold) return r % bound;
    }
  }

  // Uniform in [lo, hi], inclusive on both ends.
  std::int64_t range(std::int64_t lo, std::int64_t hi) {
    assert(lo <= hi);
    return lo + static_cast<std::int64_t>(
                    below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  // Uniform in [0, 1) with 53 bits of entropy.
  double real01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double real(double lo, double hi) { return lo + real01() * (hi - lo); }

  bool chance(double p) { return real01() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

  template <typename T>
  const T& pick(const std::vector<T>& v) {
    assert(!v.empty());
    return v[below(v.size())];
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace einfuzz
