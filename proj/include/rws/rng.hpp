#pragma once

#include <cstdint>
#include <limits>

namespace rws {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based generator: output n of the stream keyed by (seed, j, k) is a
/// pure function of (seed, j, k, n), so every coefficient can be regenerated
/// in isolation and in any order. Satisfies UniformRandomBitGenerator.
class KeyedStream {
 public:
  using result_type = std::uint64_t;

  constexpr KeyedStream(std::uint64_t seed, std::uint64_t j, std::uint64_t k) noexcept
      : key_(mix64(mix64(seed ^ 0x5851f42d4c957f2dULL) ^ mix64((j << 40) ^ k ^ 0x2545f4914f6cdd1dULL))) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() noexcept {
    return mix64(key_ + 0x9e3779b97f4a7c15ULL * ++counter_);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  constexpr double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  constexpr std::uint64_t draws() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace rws
