#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace agora {

// Philox-2x64-10 block cipher. Counter-based: every (key, counter) pair maps
// to an independent 128-bit block, so streams can be split by structured
// counters instead of sequential draws. Parallel agents then consume
// identical randomness regardless of scheduling.
namespace philox {

constexpr std::uint64_t kMul = 0xD2B74407B1CE6E93ull;
constexpr std::uint64_t kWeyl = 0x9E3779B97F4A7C15ull;

inline std::array<std::uint64_t, 2> block(std::uint64_t key, std::uint64_t c0, std::uint64_t c1) {
  std::uint64_t x0 = c0, x1 = c1, k = key;
  for (int round = 0; round < 10; ++round) {
    const unsigned __int128 prod = static_cast<unsigned __int128>(kMul) * x0;
    const std::uint64_t hi = static_cast<std::uint64_t>(prod >> 64);
    const std::uint64_t lo = static_cast<std::uint64_t>(prod);
    x0 = hi ^ k ^ x1;
    x1 = lo;
    k += kWeyl;
  }
  return {x0, x1};
}

// Uniform in [0, 1) with 53-bit resolution.
inline double u01(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

// Uniform in (0, 1): safe as a log argument.
inline double u01_open(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

// Box-Muller pair from one block.
inline std::array<double, 2> normal_pair(std::uint64_t b0, std::uint64_t b1) {
  const double radius = std::sqrt(-2.0 * std::log(u01_open(b0)));
  const double angle = 6.283185307179586476925286766559 * u01(b1);
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

}  // namespace philox

// Sequential convenience stream over the philox block function.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) : key_(seed), c0_(stream) {}

  std::uint64_t next_bits() {
    if (have_second_) {
      have_second_ = false;
      return second_;
    }
    const auto b = philox::block(key_, c0_, c1_++);
    second_ = b[1];
    have_second_ = true;
    return b[0];
  }

  double uniform() { return philox::u01(next_bits()); }

  // Uniform integer in [0, n) by rejection (exact, no modulo bias).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = n * ((~std::uint64_t{0}) / n);
    for (;;) {
      const std::uint64_t bits = next_bits();
      if (bits < limit) return bits % n;
    }
  }

  double normal() {
    if (have_normal_) {
      have_normal_ = false;
      return second_normal_;
    }
    have_second_ = false;  // keep normal draws block-aligned
    const auto b = philox::block(key_, c0_, c1_++);
    const auto z = philox::normal_pair(b[0], b[1]);
    second_normal_ = z[1];
    have_normal_ = true;
    return z[0];
  }

 private:
  std::uint64_t key_;
  std::uint64_t c0_;
  std::uint64_t c1_ = 0;
  std::uint64_t second_ = 0;
  bool have_second_ = false;
  double second_normal_ = 0.0;
  bool have_normal_ = false;
};

}  // namespace agora
