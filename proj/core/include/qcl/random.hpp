#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace qcl {

// Counter-based randomness. Every random quantity in the library is a pure
// function of (seed, stream labels, index), which keeps results independent
// of evaluation order and worker count.

constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t mix_key(std::uint64_t key, std::uint64_t value) noexcept {
  return splitmix64(key ^ splitmix64(value + 0x632be59bd9b4e019ULL));
}

template <class... Parts>
constexpr std::uint64_t stream_key(std::uint64_t seed, Parts... parts) noexcept {
  std::uint64_t key = splitmix64(seed);
  ((key = mix_key(key, static_cast<std::uint64_t>(parts))), ...);
  return key;
}

/// 53-bit uniform double in [0, 1).
constexpr double unit_interval(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Seed for a named sub-stream of a root seed ("ulam", "driving", ...).
constexpr std::uint64_t derive_seed(std::uint64_t root, std::string_view label) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return mix_key(splitmix64(root), h);
}

/// SplitMix64 stream keyed by a 64-bit value. Satisfies
/// UniformRandomBitGenerator.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit constexpr CounterRng(std::uint64_t key) noexcept : state_(key) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  constexpr result_type operator()() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  constexpr double uniform() noexcept { return unit_interval((*this)()); }

 private:
  std::uint64_t state_;
};

}  // namespace qcl
