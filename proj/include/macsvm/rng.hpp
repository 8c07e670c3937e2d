#pragma once

#include <cstdint>

namespace macsvm {

/// ctr64-v1: counter-based 64-bit generator.
///
/// The i-th output (i = 0, 1, ...) of the stream keyed by `key` is
///
///     mix(key + (i + 1) * 0x9E3779B97F4A7C15)       (mod 2^64)
///
/// where mix is the SplitMix64 finalizer
///
///     x ^= x >> 30; x *= 0xBF58476D1CE4E5B9;
///     x ^= x >> 27; x *= 0x94D049BB133111EB;
///     x ^= x >> 31.
///
/// uniform() maps the top 53 bits to [0, 1); normal() is Box-Muller using two
/// consecutive uniforms (u1 from the first, u2 from the second, returning
/// sqrt(-2 ln(1 - u1)) * cos(2 pi u2)) with no cached second variate. Every
/// consumer derives its own key with substream(), so results are reproducible
/// bit for bit across implementations that follow this description.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  static std::uint64_t mix(std::uint64_t x);

  /// Key for an independent stream tagged by `tag` under `seed`.
  static std::uint64_t substream(std::uint64_t seed, std::uint64_t tag);

  std::uint64_t next_u64();
  double uniform();
  double normal();
  /// Uniform integer in [0, n) by multiply-shift on 64 bits; n > 0.
  std::uint64_t below(std::uint64_t n);

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace macsvm
