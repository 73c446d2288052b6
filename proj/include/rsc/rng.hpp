#pragma once

#include <cstdint>
#include <string_view>

#include "rsc/errors.hpp"

namespace rsc {

// Counter-based splittable random stream. A stream is fully determined by a
// 64-bit key; keys are derived from (master seed, purpose tag, indices) so
// that subset draws, noise draws, and permutation draws never share state.
// All integer output is bit-reproducible across platforms.
//
// Generator: SplitMix64 (Steele, Lea, Flood 2014). Uniform doubles take the
// top 53 bits of a draw. Gaussians use Box-Muller on (open, half-open)
// uniforms, consuming two draws per pair; this mapping is frozen and must
// not change, reproducibility of every sampler depends on it.
class RngStream {
 public:
  explicit RngStream(std::uint64_t key) : state_(key) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform on [0, 1), 53-bit resolution.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0, 1]; safe to pass through log().
  double next_unit_open() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // Unbiased uniform integer in [0, n), n >= 1.
  std::uint64_t next_below(std::uint64_t n);

  // Standard normal via Box-Muller; the second value of each pair is cached.
  double next_gaussian();

  // Gamma(shape, 1) for shape >= 1 (Marsaglia-Tsang squeeze).
  double next_gamma(double shape);

 private:
  std::uint64_t state_;
  double cached_gaussian_ = 0.0;
  bool has_cached_gaussian_ = false;
};

// Key derivation: FNV-1a over the tag, then SplitMix64 finalizer mixing of
// seed, tag hash, and the two indices. Streams with different (tag, a, b)
// are computationally independent.
std::uint64_t stream_key(std::uint64_t seed, std::string_view tag,
                         std::uint64_t a = 0, std::uint64_t b = 0);

inline RngStream substream(std::uint64_t seed, std::string_view tag,
                           std::uint64_t a = 0, std::uint64_t b = 0) {
  return RngStream(stream_key(seed, tag, a, b));
}

}  // namespace rsc
