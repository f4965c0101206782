#pragma once

#include <cstdint>

namespace flowforge {

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Derives an independent stream seed from a base seed and up to two salts.
/// Used to give every pixel / sample / view its own stream so that parallel
/// execution order cannot change results.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt_a,
                                 std::uint64_t salt_b = 0) {
  std::uint64_t h = mix64(base + 0x9e3779b97f4a7c15ull);
  h = mix64(h ^ (salt_a + 0x9e3779b97f4a7c15ull));
  h = mix64(h ^ (salt_b + 0x632be59bd9b4e019ull));
  return h;
}

/// Deterministic 64-bit random stream (SplitMix64). Bit-stable across
/// platforms and cheap enough to construct per pixel.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    return mix64(state_);
  }

  /// Uniform in [0, 1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double next_double(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  /// Uniform integer in [0, n), n > 0.
  std::uint32_t next_below(std::uint32_t n) {
    return static_cast<std::uint32_t>(next_u64() % n);
  }

 private:
  std::uint64_t state_;
};

}  // namespace flowforge
