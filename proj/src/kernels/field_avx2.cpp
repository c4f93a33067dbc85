// Compiled with -mavx2 -mfma. Only reached through avx2_kernels(), which
// checks CPUID first.

#include <immintrin.h>

#include <vector>

#include "field_common.hpp"

namespace pilotwave::kernels {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// sin and cos of four angles at once. Cody-Waite reduction by pi/2 (three-part
// constant, exact for |a| up to a few hundred) followed by the Cephes minimax
// polynomials on [-pi/4, pi/4].
inline void sincos4(__m256d a, double* s_out, double* c_out) {
  const __m256d two_over_pi = _mm256_set1_pd(0.63661977236758134308);
  const __m256d p1 = _mm256_set1_pd(1.570796251296997070312e+00);
  const __m256d p2 = _mm256_set1_pd(7.54978941586159635336e-08);
  const __m256d p3 = _mm256_set1_pd(5.39030285815811905290e-15);
  const __m256d q = _mm256_round_pd(_mm256_mul_pd(a, two_over_pi), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(q, p1, a);
  r = _mm256_fnmadd_pd(q, p2, r);
  r = _mm256_fnmadd_pd(q, p3, r);
  const __m256d z = _mm256_mul_pd(r, r);

  __m256d ps = _mm256_set1_pd(1.58962301576546568060e-10);
  ps = _mm256_fmadd_pd(ps, z, _mm256_set1_pd(-2.50507477628578072866e-8));
  ps = _mm256_fmadd_pd(ps, z, _mm256_set1_pd(2.75573136213857245213e-6));
  ps = _mm256_fmadd_pd(ps, z, _mm256_set1_pd(-1.98412698295895385996e-4));
  ps = _mm256_fmadd_pd(ps, z, _mm256_set1_pd(8.33333333332211858878e-3));
  ps = _mm256_fmadd_pd(ps, z, _mm256_set1_pd(-1.66666666666666307295e-1));
  const __m256d sin_r = _mm256_fmadd_pd(_mm256_mul_pd(ps, z), r, r);

  __m256d pc = _mm256_set1_pd(-1.13585365213876817300e-11);
  pc = _mm256_fmadd_pd(pc, z, _mm256_set1_pd(2.08757008419747316778e-9));
  pc = _mm256_fmadd_pd(pc, z, _mm256_set1_pd(-2.75573141792967388112e-7));
  pc = _mm256_fmadd_pd(pc, z, _mm256_set1_pd(2.48015872888517045348e-5));
  pc = _mm256_fmadd_pd(pc, z, _mm256_set1_pd(-1.38888888888730564116e-3));
  pc = _mm256_fmadd_pd(pc, z, _mm256_set1_pd(4.16666666666665929218e-2));
  const __m256d cos_r = _mm256_fmadd_pd(_mm256_mul_pd(pc, z), z, _mm256_fnmadd_pd(_mm256_set1_pd(0.5), z, _mm256_set1_pd(1.0)));

  // Quadrant fix-up: swap on odd q, sign from q mod 4.
  const __m128i qi = _mm256_cvtpd_epi32(q);
  const __m256i qq = _mm256_cvtepi32_epi64(qi);
  const __m256i one = _mm256_set1_epi64x(1);
  const __m256i two = _mm256_set1_epi64x(2);
  const __m256d swap = _mm256_castsi256_pd(_mm256_cmpeq_epi64(_mm256_and_si256(qq, one), one));
  const __m256d sbase = _mm256_blendv_pd(sin_r, cos_r, swap);
  const __m256d cbase = _mm256_blendv_pd(cos_r, sin_r, swap);
  const __m256i sign_bit = _mm256_set1_epi64x(static_cast<long long>(0x8000000000000000ULL));
  const __m256i s_neg = _mm256_cmpeq_epi64(_mm256_and_si256(qq, two), two);
  const __m256i c_neg = _mm256_cmpeq_epi64(_mm256_and_si256(_mm256_add_epi64(qq, one), two), two);
  _mm256_storeu_pd(s_out, _mm256_xor_pd(sbase, _mm256_castsi256_pd(_mm256_and_si256(s_neg, sign_bit))));
  _mm256_storeu_pd(c_out, _mm256_xor_pd(cbase, _mm256_castsi256_pd(_mm256_and_si256(c_neg, sign_bit))));
}

// Lanes run over the m axis, four modes at a time.
void point_avx2(const PackedModes& pm, double x, double y, double t, PointField& out) {
  const int M = pm.m_max;
  const int N = pm.n_max;
  const int MS = pm.m_stride;
  const int K = phase_count(pm);

  alignas(32) double pr[kMaxQuantumNumber], pi[kMaxQuantumNumber];
  alignas(32) double sx[kMaxQuantumNumber], cx[kMaxQuantumNumber];
  alignas(32) double sy[kMaxQuantumNumber], cy[kMaxQuantumNumber];
  alignas(32) double s1[4], c1[4];
  sincos4(_mm256_set_pd(0.0, 0.5 * t, y, x), s1, c1);
  time_phases_from(s1[2], c1[2], K, pr, pi);
  harmonics_from(s1[0], c1[0], M, sx, cx);
  harmonics_from(s1[1], c1[1], N, sy, cy);

  alignas(32) double xr[kMaxQuantumNumber], xi[kMaxQuantumNumber];
  alignas(32) double gr[kMaxQuantumNumber], gi[kMaxQuantumNumber];
  for (int m = M; m < MS; ++m) xr[m] = xi[m] = gr[m] = gi[m] = 0.0;
  for (int m = 0; m < M; ++m) {
    xr[m] = pr[m] * sx[m];
    xi[m] = pi[m] * sx[m];
    const double km = static_cast<double>(m + 1) * cx[m];
    gr[m] = pr[m] * km;
    gi[m] = pi[m] * km;
  }

  __m256d acc_pr = _mm256_setzero_pd(), acc_pi = _mm256_setzero_pd();
  __m256d acc_xr = _mm256_setzero_pd(), acc_xi = _mm256_setzero_pd();
  __m256d acc_yr = _mm256_setzero_pd(), acc_yi = _mm256_setzero_pd();

  for (int m0 = 0; m0 < MS; m0 += 4) {
    __m256d ur = _mm256_setzero_pd(), ui = _mm256_setzero_pd();
    __m256d vr = _mm256_setzero_pd(), vi = _mm256_setzero_pd();
    for (int n = 0; n < N; ++n) {
      const double kn = static_cast<double>(n + 1) * cy[n];
      const __m256d syr = _mm256_set1_pd(pr[n] * sy[n]);
      const __m256d syi = _mm256_set1_pd(pi[n] * sy[n]);
      const __m256d dyr = _mm256_set1_pd(pr[n] * kn);
      const __m256d dyi = _mm256_set1_pd(pi[n] * kn);
      const std::size_t off = static_cast<std::size_t>(n) * MS + m0;
      const __m256d ar = _mm256_loadu_pd(pm.re.data() + off);
      const __m256d ai = _mm256_loadu_pd(pm.im.data() + off);
      ur = _mm256_fnmadd_pd(ai, syi, _mm256_fmadd_pd(ar, syr, ur));
      ui = _mm256_fmadd_pd(ai, syr, _mm256_fmadd_pd(ar, syi, ui));
      vr = _mm256_fnmadd_pd(ai, dyi, _mm256_fmadd_pd(ar, dyr, vr));
      vi = _mm256_fmadd_pd(ai, dyr, _mm256_fmadd_pd(ar, dyi, vi));
    }
    const __m256d sr = _mm256_load_pd(xr + m0), si = _mm256_load_pd(xi + m0);
    const __m256d dr = _mm256_load_pd(gr + m0), di = _mm256_load_pd(gi + m0);
    acc_pr = _mm256_fnmadd_pd(si, ui, _mm256_fmadd_pd(sr, ur, acc_pr));
    acc_pi = _mm256_fmadd_pd(si, ur, _mm256_fmadd_pd(sr, ui, acc_pi));
    acc_xr = _mm256_fnmadd_pd(di, ui, _mm256_fmadd_pd(dr, ur, acc_xr));
    acc_xi = _mm256_fmadd_pd(di, ur, _mm256_fmadd_pd(dr, ui, acc_xi));
    acc_yr = _mm256_fnmadd_pd(si, vi, _mm256_fmadd_pd(sr, vr, acc_yr));
    acc_yi = _mm256_fmadd_pd(si, vr, _mm256_fmadd_pd(sr, vi, acc_yi));
  }

  out.psi = {kEigenNorm * hsum(acc_pr), kEigenNorm * hsum(acc_pi)};
  out.dpsi_dx = {kEigenNorm * hsum(acc_xr), kEigenNorm * hsum(acc_xi)};
  out.dpsi_dy = {kEigenNorm * hsum(acc_yr), kEigenNorm * hsum(acc_yi)};
}

// Lanes run over x points, four grid columns at a time.
void density_grid_avx2(const PackedModes& pm, std::span<const double> xs,
                       std::span<const double> ys, double t, std::span<double> out) {
  const int M = pm.m_max;
  const int N = pm.n_max;
  const int K = phase_count(pm);
  const std::size_t nx = xs.size();
  const std::size_t stride = (nx + 3) & ~std::size_t{3};

  alignas(32) double pr[kMaxQuantumNumber], pi[kMaxQuantumNumber];
  time_phases(t, K, pr, pi);

  std::vector<double> tr(static_cast<std::size_t>(M) * stride, 0.0), ti(tr.size(), 0.0);
  double s[kMaxQuantumNumber], c[kMaxQuantumNumber];
  for (std::size_t i = 0; i < nx; ++i) {
    harmonics(xs[i], M, s, c);
    for (int m = 0; m < M; ++m) {
      tr[m * stride + i] = pr[m] * s[m];
      ti[m * stride + i] = pi[m] * s[m];
    }
  }

  const __m256d norm2 = _mm256_set1_pd(kEigenNorm * kEigenNorm);
  alignas(32) double tail[4];
  for (std::size_t j = 0; j < ys.size(); ++j) {
    harmonics(ys[j], N, s, c);
    double ur[kMaxQuantumNumber], ui[kMaxQuantumNumber];
    for (int m = 0; m < M; ++m) ur[m] = ui[m] = 0.0;
    for (int n = 0; n < N; ++n) {
      const double syr = pr[n] * s[n], syi = pi[n] * s[n];
      const double* ar = pm.re.data() + static_cast<std::size_t>(n) * pm.m_stride;
      const double* ai = pm.im.data() + static_cast<std::size_t>(n) * pm.m_stride;
      for (int m = 0; m < M; ++m) {
        ur[m] += ar[m] * syr - ai[m] * syi;
        ui[m] += ar[m] * syi + ai[m] * syr;
      }
    }
    double* row = out.data() + j * nx;
    for (std::size_t i0 = 0; i0 < nx; i0 += 4) {
      __m256d re = _mm256_setzero_pd(), im = _mm256_setzero_pd();
      for (int m = 0; m < M; ++m) {
        const __m256d a = _mm256_loadu_pd(tr.data() + m * stride + i0);
        const __m256d b = _mm256_loadu_pd(ti.data() + m * stride + i0);
        const __m256d vr = _mm256_set1_pd(ur[m]);
        const __m256d vi = _mm256_set1_pd(ui[m]);
        re = _mm256_fnmadd_pd(b, vi, _mm256_fmadd_pd(a, vr, re));
        im = _mm256_fmadd_pd(b, vr, _mm256_fmadd_pd(a, vi, im));
      }
      const __m256d d = _mm256_mul_pd(norm2, _mm256_fmadd_pd(im, im, _mm256_mul_pd(re, re)));
      if (i0 + 4 <= nx) {
        _mm256_storeu_pd(row + i0, d);
      } else {
        _mm256_store_pd(tail, d);
        for (std::size_t k = 0; i0 + k < nx; ++k) row[i0 + k] = tail[k];
      }
    }
  }
}

}  // namespace

const KernelTable& avx2_kernel_table() {
  static const KernelTable table{Isa::Avx2, "avx2", &point_avx2, &density_grid_avx2};
  return table;
}

}  // namespace pilotwave::kernels
