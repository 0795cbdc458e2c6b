#include "effdiff/rng.hpp"

namespace effdiff {

namespace {

using detail::kLanes;
using detail::Pack;

// One Box-Muller pair per lane from two uniform packs. Both the scalar
// stream and the batched generator funnel through here, so their outputs
// agree bitwise lane for lane regardless of how Eigen lowers log().
inline void box_muller_pair(const Pack& u_radius, const Pack& u_angle, Pack& z0,
                            Pack& z1) {
  const Pack r = (-2.0 * u_radius.log()).sqrt();
  Pack s, c;
  detail::sincospi2(u_angle, s, c);
  z0 = r * c;
  z1 = r * s;
}

}  // namespace

double NormalStream::next() {
  if (pos_ < limit_) return cache_[pos_++];
  if (!have_second_) {
    // finish the current block: second pair from the stashed uniforms
    const Pack u2 = Pack::Constant(uniform_from_bits(bits2_));
    const Pack u3 = Pack::Constant(uniform_from_bits(bits3_));
    Pack z2, z3;
    box_muller_pair(u2, u3, z2, z3);
    cache_[2] = z2[0];
    cache_[3] = z3[0];
    limit_ = 4;
    have_second_ = true;
    return cache_[pos_++];
  }
  const auto bits = Philox4x64::block(seed_, particle_, step_, block_index_, 0, 0);
  ++block_index_;
  const Pack u0 = Pack::Constant(uniform_from_bits(bits[0]));
  const Pack u1 = Pack::Constant(uniform_from_bits(bits[1]));
  Pack z0, z1;
  box_muller_pair(u0, u1, z0, z1);
  cache_[0] = z0[0];
  cache_[1] = z1[0];
  bits2_ = bits[2];
  bits3_ = bits[3];
  pos_ = 0;
  limit_ = 2;
  have_second_ = false;
  return cache_[pos_++];
}

namespace detail {

namespace {

// hi/lo 64 bits of a * m for a constant multiplier m, in plain uint64 ops so
// the lane loops below stay auto-vectorizable (one scalar Philox per lane
// serializes on its ~50-cycle round latency; eight interleaved lanes run at
// multiplier throughput instead).
template <std::uint64_t M>
inline void mul_wide(std::uint64_t a, std::uint64_t& hi, std::uint64_t& lo) {
  constexpr std::uint64_t m32 = 0xFFFFFFFFULL;
  constexpr std::uint64_t ml = M & m32;
  constexpr std::uint64_t mh = M >> 32;
  const std::uint64_t al = a & m32;
  const std::uint64_t ah = a >> 32;
  const std::uint64_t t0 = al * ml;
  const std::uint64_t t1 = ah * ml + (t0 >> 32);  // < 2^64, exact
  const std::uint64_t t2 = al * mh + (t1 & m32);
  hi = ah * mh + (t1 >> 32) + (t2 >> 32);
  lo = (t2 << 32) | (t0 & m32);
}

// Philox4x64 for kLanes keys at once; bitwise equal to Philox4x64::block
// per lane. k0 and the counter words start uniform across lanes, k1 carries
// the particle index.
inline void philox_lanes(std::uint64_t seed, std::uint64_t first_particle,
                         std::uint64_t step, std::uint64_t block,
                         std::uint64_t out[4][kLanes]) {
  std::uint64_t c0[kLanes], c1[kLanes], c2[kLanes], c3[kLanes], k1[kLanes];
  for (int l = 0; l < kLanes; ++l) {
    c0[l] = step;
    c1[l] = block;
    c2[l] = 0;
    c3[l] = 0;
    k1[l] = first_particle + static_cast<std::uint64_t>(l);
  }
  std::uint64_t k0 = seed;
  for (int round = 0; round < 10; ++round) {
    for (int l = 0; l < kLanes; ++l) {
      std::uint64_t hi0, lo0, hi1, lo1;
      mul_wide<Philox4x64::kM0>(c0[l], hi0, lo0);
      mul_wide<Philox4x64::kM1>(c2[l], hi1, lo1);
      c0[l] = hi1 ^ c1[l] ^ k0;
      c1[l] = lo1;
      c2[l] = hi0 ^ c3[l] ^ k1[l];
      c3[l] = lo0;
      k1[l] += Philox4x64::kW1;
    }
    k0 += Philox4x64::kW0;
  }
  for (int l = 0; l < kLanes; ++l) {
    out[0][l] = c0[l];
    out[1][l] = c1[l];
    out[2][l] = c2[l];
    out[3][l] = c3[l];
  }
}

}  // namespace

void fill_normals_batch(std::uint64_t seed, std::uint64_t first_particle,
                        std::uint64_t step, int count, Pack* out) {
  std::uint64_t bits[4][kLanes];
  Pack u[4];
  for (int base = 0; base < count; base += 4) {
    const std::uint64_t block = static_cast<std::uint64_t>(base) / 4;
    philox_lanes(seed, first_particle, step, block, bits);
    for (int j = 0; j < 4; ++j)
      for (int l = 0; l < kLanes; ++l)
        u[j][l] = uniform_from_bits(bits[j][l]);
    Pack z0, z1;
    box_muller_pair(u[0], u[1], z0, z1);
    out[base] = z0;
    if (base + 1 < count) out[base + 1] = z1;
    if (base + 2 < count) {
      Pack z2, z3;
      box_muller_pair(u[2], u[3], z2, z3);
      out[base + 2] = z2;
      if (base + 3 < count) out[base + 3] = z3;
    }
  }
}

}  // namespace detail

}  // namespace effdiff
