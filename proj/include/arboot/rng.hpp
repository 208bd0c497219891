#pragma once

// Counter-based random number streams (Philox-4x32-10).
//
// Every stream is addressed by (seed, stream, substream) and produces the
// same sequence no matter how many other streams were consumed before it,
// which makes parallel Monte Carlo runs bit-reproducible at any thread
// count.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace arboot {

class PhiloxStream {
 public:
  using result_type = std::uint64_t;

  PhiloxStream(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream = 0)
      : key0_(static_cast<std::uint32_t>(seed)),
        key1_(static_cast<std::uint32_t>(seed >> 32)),
        c1_(static_cast<std::uint32_t>(substream)),
        c2_(static_cast<std::uint32_t>(stream)),
        c3_(static_cast<std::uint32_t>(stream >> 32) * 0x85EBCA6Bu ^
            static_cast<std::uint32_t>(substream >> 32) * 0xC2B2AE35u) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (buffered_) {
      buffered_ = false;
      return buffer_;
    }
    std::uint32_t c0 = block_++, c1 = c1_, c2 = c2_, c3 = c3_;
    std::uint32_t k0 = key0_, k1 = key1_;
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * c0;
      const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * c2;
      const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
      const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
      const std::uint32_t n0 = hi1 ^ c1 ^ k0;
      const std::uint32_t n2 = hi0 ^ c3 ^ k1;
      c0 = n0;
      c1 = lo1;
      c2 = n2;
      c3 = lo0;
      k0 += 0x9E3779B9u;
      k1 += 0xBB67AE85u;
    }
    buffer_ = (std::uint64_t{c2} << 32) | c3;
    buffered_ = true;
    return (std::uint64_t{c0} << 32) | c1;
  }

  // Uniform on (0,1), never exactly 0 or 1.
  double uniform01() {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() {
    if (have_normal_) {
      have_normal_ = false;
      return spare_normal_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_normal_ = radius * std::sin(angle);
    have_normal_ = true;
    return radius * std::cos(angle);
  }

  double rademacher() { return ((*this)() & 1u) ? 1.0 : -1.0; }

  bool bernoulli(double p = 0.5) { return uniform01() < p; }

  double exponential(double mean) { return -mean * std::log(uniform01()); }

  // Beta(1/2, 1/2) via the arcsine-law inverse CDF.
  double arcsine_beta() {
    const double s = std::sin(std::numbers::pi * uniform01() / 2.0);
    return s * s;
  }

 private:
  std::uint32_t key0_, key1_;
  std::uint32_t c1_, c2_, c3_;
  std::uint32_t block_ = 0;
  std::uint64_t buffer_ = 0;
  bool buffered_ = false;
  double spare_normal_ = 0.0;
  bool have_normal_ = false;
};

// Stable 64-bit mixer for deriving per-replication seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace arboot
