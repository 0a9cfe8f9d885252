#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "advgray/errors.hpp"

namespace advgray {

// SplitMix64 generator. Chosen because the full state is one 64-bit word,
// the update uses only well-defined unsigned arithmetic, and therefore the
// stream for a given seed is identical on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t seed_state() const { return state_; }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) {
    if (!(lo < hi)) {
      throw ConfigError("rng_uniform: empty range [" + std::to_string(lo) +
                        ", " + std::to_string(hi) + ")");
    }
    return lo + (hi - lo) * next_double();
  }

  std::vector<double> uniform_vec(double lo, double hi, std::size_t n) {
    if (!(lo < hi)) {
      throw ConfigError("rng_uniform: empty range [" + std::to_string(lo) +
                        ", " + std::to_string(hi) + ")");
    }
    std::vector<double> out(n);
    for (auto& v : out) v = lo + (hi - lo) * next_double();
    return out;
  }

  // Unbiased integer in [0, bound) via Lemire's multiply-shift rejection.
  std::uint64_t below(std::uint64_t bound) {
    if (bound == 0) throw ConfigError("rng below: bound must be positive");
    unsigned __int128 m =
        static_cast<unsigned __int128>(next_u64()) * bound;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < bound) {
      std::uint64_t threshold = (0 - bound) % bound;
      while (lo < threshold) {
        m = static_cast<unsigned __int128>(next_u64()) * bound;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  // Fisher-Yates; identical permutation for identical seed and size.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

// Decorrelates derived seeds (per-epoch shuffles, per-model init).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  Rng r(seed ^ (salt * 0xD1B54A32D192ED03ULL));
  return r.next_u64();
}

}  // namespace advgray
