#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace cvdist {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace detail

/// xoshiro256++ seeded per (master seed, block index) pair.
///
/// Every record block draws from its own substream, so estimates are
/// bit-for-bit reproducible for a fixed seed regardless of whether blocks
/// are generated serially or on worker threads.
class BlockRng {
 public:
  BlockRng(std::uint64_t seed, std::uint64_t block) {
    std::uint64_t s = seed ^ (0xA0761D6478BD642Full * (block + 1));
    for (auto& w : state_) w = detail::splitmix64(s);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = detail::rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = detail::rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1).
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in (0, 1]; safe as a log argument.
  double next_unit_open() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  /// Box-Muller pair of independent standard normals.
  void normal_pair(double& z0, double& z1) {
    const double u1 = next_unit_open();
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    z0 = r * std::cos(theta);
    z1 = r * std::sin(theta);
  }

  double normal() {
    double z0 = 0.0;
    double z1 = 0.0;
    normal_pair(z0, z1);
    return z0;
  }

 private:
  std::uint64_t state_[4];
};

}  // namespace cvdist
