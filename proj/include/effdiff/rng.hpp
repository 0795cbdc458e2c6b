#pragma once

// Counter-based random streams. Every (seed, particle, step) triple owns an
// independent substream, so trajectories are replayable and results do not
// depend on worker count or scheduling.

#include <array>
#include <cstdint>

#include "effdiff/detail/simd.hpp"

namespace effdiff {

// Philox 4x64, 10 rounds (Salmon, Moraes, Dror, Shaw 2011).
struct Philox4x64 {
  static constexpr std::uint64_t kM0 = 0xD2E7470EE14C6C93ULL;
  static constexpr std::uint64_t kM1 = 0xCA5A826395121157ULL;
  static constexpr std::uint64_t kW0 = 0x9E3779B97F4A7C15ULL;
  static constexpr std::uint64_t kW1 = 0xBB67AE8584CAA73BULL;

  static std::array<std::uint64_t, 4> block(std::uint64_t k0, std::uint64_t k1,
                                            std::uint64_t c0, std::uint64_t c1,
                                            std::uint64_t c2, std::uint64_t c3) {
    for (int round = 0; round < 10; ++round) {
      const unsigned __int128 p0 = static_cast<unsigned __int128>(kM0) * c0;
      const unsigned __int128 p1 = static_cast<unsigned __int128>(kM1) * c2;
      const std::uint64_t hi0 = static_cast<std::uint64_t>(p0 >> 64);
      const std::uint64_t lo0 = static_cast<std::uint64_t>(p0);
      const std::uint64_t hi1 = static_cast<std::uint64_t>(p1 >> 64);
      const std::uint64_t lo1 = static_cast<std::uint64_t>(p1);
      c0 = hi1 ^ c1 ^ k0;
      c1 = lo1;
      c2 = hi0 ^ c3 ^ k1;
      c3 = lo0;
      k0 += kW0;
      k1 += kW1;
    }
    return {c0, c1, c2, c3};
  }
};

// uint64 -> double in the open interval (0,1). Every operation here is
// exact in binary64 (top 52 bits, half-cell offset, power-of-two scale), so
// the map never rounds onto 0 or 1 and is reproducible by integer reasoning.
inline double uniform_from_bits(std::uint64_t x) {
  return (static_cast<double>(x >> 12) + 0.5) * 0x1.0p-52;
}

// Standard normals for one (particle, step), indexed by draw order.
// Consumes Philox blocks lazily: one block yields four normals via
// Box-Muller on the four packed uniforms.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t particle, std::uint64_t step)
      : seed_(seed), particle_(particle), step_(step) {}

  double next();

  template <typename Derived>
  void fill(Eigen::MatrixBase<Derived>& out) {
    for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = next();
  }

 private:
  std::uint64_t seed_, particle_, step_;
  std::uint64_t block_index_ = 0;
  std::uint64_t bits2_ = 0, bits3_ = 0;  // pending uniforms for the lazy pair
  double cache_[4] = {};
  int pos_ = 4;
  int limit_ = 4;
  bool have_second_ = true;
};

namespace detail {

// Batched variant: normals for kLanes consecutive particles at one step.
// Lane l of pack s equals NormalStream(seed, first_particle + l, step)'s
// s-th draw bitwise: the scalar stream routes through the same pack
// transcendental kernels on a broadcast lane. Streams never mix across
// lanes.
void fill_normals_batch(std::uint64_t seed, std::uint64_t first_particle,
                        std::uint64_t step, int count, Pack* out);

}  // namespace detail

}  // namespace effdiff
