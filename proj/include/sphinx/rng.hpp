#pragma once

#include <cstdint>
#include <string_view>

// Deterministic random number generation.
//
// Every random decision in the pipeline flows through the two generators in
// this header so that a (master_seed, inputs) pair reproduces byte-identical
// artifacts on any platform. Standard-library distributions are avoided on
// purpose: their output is implementation-defined.
//
// Stream derivation scheme:
//   * per-language streams:  stream_seed = master_seed XOR fnv1a64(lang_code)
//   * per-index streams:     stream_seed = splitmix64 output #index+1 of a
//                            splitmix64 sequence started at master_seed
// Both are order-free, so independent tasks can run in parallel and still
// produce the same bytes.

namespace sphinx::rng {

/// FNV-1a 64-bit hash (offset 14695981039346656037, prime 1099511628211).
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

/// One step of splitmix64 (Steele, Lea, Flood 2014). Advances `state` by the
/// golden gamma and returns the mixed output.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// The (index+1)-th output of a splitmix64 sequence seeded with `master`.
/// O(1) random access; used to derive independent per-task streams.
inline std::uint64_t derive_stream_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t state = master + index * 0x9E3779B97F4A7C15ull;
  return splitmix64_next(state);
}

/// Per-language stream seed: master XOR the FNV-1a hash of the language code.
inline std::uint64_t language_stream_seed(std::uint64_t master, std::string_view lang_code) {
  return master ^ fnv1a64(lang_code);
}

/// xoshiro256** 1.0 (Blackman, Vigna 2018). State is seeded from four
/// successive splitmix64 outputs as the authors recommend.
class Xoshiro256ss {
 public:
  explicit Xoshiro256ss(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : s_) word = splitmix64_next(sm);
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1) with 53 bits of precision.
  double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Unbiased uniform integer in [0, n) via rejection of the biased tail.
  std::uint64_t bounded(std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = next();
      if (r >= threshold) return r % n;
    }
  }

  bool next_bool() { return (next() >> 63) != 0; }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t s_[4];
};

}  // namespace sphinx::rng
