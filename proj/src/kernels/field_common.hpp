#pragma once

// Shared per-call setup for the field kernels. Everything here has internal
// linkage so that each kernel translation unit (compiled with its own ISA
// flags) gets a private copy.

#include <cmath>
#include <numbers>

#include "pilotwave/kernels.hpp"

namespace pilotwave::kernels {
namespace {

constexpr double kEigenNorm = 2.0 / std::numbers::pi;

inline void sin_cos(double a, double& s, double& c) {
#if defined(__GLIBC__)
  ::sincos(a, &s, &c);
#else
  s = std::sin(a);
  c = std::cos(a);
#endif
}

// sin(k a), cos(k a) for k = 1 .. count by repeated rotation from (sin a, cos a).
inline void harmonics_from(double s1, double c1, int count, double* s, double* c) {
  double sk = s1;
  double ck = c1;
  for (int k = 0; k < count; ++k) {
    s[k] = sk;
    c[k] = ck;
    const double sn = sk * c1 + ck * s1;
    const double cn = ck * c1 - sk * s1;
    sk = sn;
    ck = cn;
  }
}

inline void harmonics(double a, int count, double* s, double* c) {
  double s1, c1;
  sin_cos(a, s1, c1);
  harmonics_from(s1, c1, count, s, c);
}

// exp(-i k^2 t / 2) for k = 1 .. count, given sin(t/2) and cos(t/2). The
// superposition factorises as exp(-i E_mn t) = p_m p_n with E_mn = (m^2 + n^2) / 2.
inline void time_phases_from(double sin_half_t, double cos_half_t, int count, double* pr, double* pi) {
  const double wr = cos_half_t;
  const double wi = -sin_half_t;
  const double w2r = wr * wr - wi * wi;
  const double w2i = 2.0 * wr * wi;
  double qr = 1.0, qi = 0.0;  // w^(k^2)
  double rr = wr, ri = wi;    // w^(2k+1)
  for (int k = 0; k < count; ++k) {
    const double nr = qr * rr - qi * ri;
    const double ni = qr * ri + qi * rr;
    qr = nr;
    qi = ni;
    pr[k] = qr;
    pi[k] = qi;
    const double r2r = rr * w2r - ri * w2i;
    const double r2i = rr * w2i + ri * w2r;
    rr = r2r;
    ri = r2i;
  }
}

inline void time_phases(double t, int count, double* pr, double* pi) {
  double s, c;
  sin_cos(0.5 * t, s, c);
  time_phases_from(s, c, count, pr, pi);
}

inline int phase_count(const PackedModes& pm) { return pm.m_max > pm.n_max ? pm.m_max : pm.n_max; }

}  // namespace
}  // namespace pilotwave::kernels
