#pragma once

// Fixed-width lane pack used by the batched particle kernels. All math is
// expressed through Eigen array ops so the same code vectorizes on AVX2,
// AVX-512, or falls back to scalar without source changes.

#include <Eigen/Dense>

namespace effdiff::detail {

inline constexpr int kLanes = 8;
using Pack = Eigen::Array<double, kLanes, 1>;

// sin(2*pi*x) and cos(2*pi*x) for arbitrary finite x.
// Quadrant reduction to [-pi/4, pi/4] plus odd/even Taylor polynomials.
// Absolute error below 3e-14, which is far inside every statistical and
// weak-order tolerance in this library. The batched Monte Carlo kernels and
// the normal streams come here (the scalar stream broadcasts one lane so it
// matches the batched path bitwise); the Eulerian solver and the scalar
// coefficient paths use libm.
inline void sincospi2(const Pack& x, Pack& s, Pack& c) {
  const Pack t = x - x.round();       // [-1/2, 1/2]
  const Pack u = 4.0 * t;             // [-2, 2]
  const Pack k = u.round();           // {-2,-1,0,1,2}
  const Pack theta = (u - k) * 1.5707963267948966192;  // pi/2 scale, [-pi/4, pi/4]

  const Pack t2 = theta * theta;
  // sin: odd series through theta^13
  Pack sp = Pack::Constant(1.0 / 6227020800.0);
  sp = sp * t2 - 1.0 / 39916800.0;
  sp = sp * t2 + 1.0 / 362880.0;
  sp = sp * t2 - 1.0 / 5040.0;
  sp = sp * t2 + 1.0 / 120.0;
  sp = sp * t2 - 1.0 / 6.0;
  sp = sp * t2 + 1.0;
  sp *= theta;
  // cos: even series through theta^14
  Pack cp = Pack::Constant(-1.0 / 87178291200.0);
  cp = cp * t2 + 1.0 / 479001600.0;
  cp = cp * t2 - 1.0 / 3628800.0;
  cp = cp * t2 + 1.0 / 40320.0;
  cp = cp * t2 - 1.0 / 720.0;
  cp = cp * t2 + 1.0 / 24.0;
  cp = cp * t2 - 1.0 / 2.0;
  cp = cp * t2 + 1.0;

  // quadrant m = k mod 4 in {0,1,2,3}
  const Pack m = k - 4.0 * (k * 0.25).floor();
  const auto odd = (m - 2.0 * (m * 0.5).floor()) > 0.5;
  const Pack sbase = odd.select(cp, sp);
  const Pack cbase = odd.select(sp, cp);
  s = (m > 1.5).select(-sbase, sbase);
  c = ((m > 0.5) && (m < 2.5)).select(-cbase, cbase);
}

inline Pack sinpi2(const Pack& x) {
  Pack s, c;
  sincospi2(x, s, c);
  return s;
}

inline Pack cospi2(const Pack& x) {
  Pack s, c;
  sincospi2(x, s, c);
  return c;
}

}  // namespace effdiff::detail
