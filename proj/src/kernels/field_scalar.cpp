#include <vector>

#include "field_common.hpp"

namespace pilotwave::kernels {
namespace {

void point_scalar(const PackedModes& pm, double x, double y, double t, PointField& out) {
  const int M = pm.m_max;
  const int N = pm.n_max;
  const int K = phase_count(pm);

  double pr[kMaxQuantumNumber], pi[kMaxQuantumNumber];
  double sx[kMaxQuantumNumber], cx[kMaxQuantumNumber];
  double sy[kMaxQuantumNumber], cy[kMaxQuantumNumber];
  time_phases(t, K, pr, pi);
  harmonics(x, M, sx, cx);
  harmonics(y, N, sy, cy);

  // u_m = sum_n A_mn p_n sin(n y), v_m = sum_n A_mn p_n n cos(n y)
  double ur[kMaxQuantumNumber], ui[kMaxQuantumNumber];
  double vr[kMaxQuantumNumber], vi[kMaxQuantumNumber];
  for (int m = 0; m < M; ++m) ur[m] = ui[m] = vr[m] = vi[m] = 0.0;
  for (int n = 0; n < N; ++n) {
    const double syr = pr[n] * sy[n], syi = pi[n] * sy[n];
    const double kn = static_cast<double>(n + 1) * cy[n];
    const double dyr = pr[n] * kn, dyi = pi[n] * kn;
    const double* ar = pm.re.data() + static_cast<std::size_t>(n) * pm.m_stride;
    const double* ai = pm.im.data() + static_cast<std::size_t>(n) * pm.m_stride;
    for (int m = 0; m < M; ++m) {
      ur[m] += ar[m] * syr - ai[m] * syi;
      ui[m] += ar[m] * syi + ai[m] * syr;
      vr[m] += ar[m] * dyr - ai[m] * dyi;
      vi[m] += ar[m] * dyi + ai[m] * dyr;
    }
  }

  double psr = 0, psi = 0, dxr = 0, dxi = 0, dyr = 0, dyi = 0;
  for (int m = 0; m < M; ++m) {
    const double sxr = pr[m] * sx[m], sxi = pi[m] * sx[m];
    const double km = static_cast<double>(m + 1) * cx[m];
    const double cxr = pr[m] * km, cxi = pi[m] * km;
    psr += sxr * ur[m] - sxi * ui[m];
    psi += sxr * ui[m] + sxi * ur[m];
    dxr += cxr * ur[m] - cxi * ui[m];
    dxi += cxr * ui[m] + cxi * ur[m];
    dyr += sxr * vr[m] - sxi * vi[m];
    dyi += sxr * vi[m] + sxi * vr[m];
  }
  out.psi = {kEigenNorm * psr, kEigenNorm * psi};
  out.dpsi_dx = {kEigenNorm * dxr, kEigenNorm * dxi};
  out.dpsi_dy = {kEigenNorm * dyr, kEigenNorm * dyi};
}

void density_grid_scalar(const PackedModes& pm, std::span<const double> xs,
                         std::span<const double> ys, double t, std::span<double> out) {
  const int M = pm.m_max;
  const int N = pm.n_max;
  const int K = phase_count(pm);
  const std::size_t nx = xs.size();

  double pr[kMaxQuantumNumber], pi[kMaxQuantumNumber];
  time_phases(t, K, pr, pi);

  // Column tables p_m sin(m x_i), laid out [m][i].
  std::vector<double> tr(static_cast<std::size_t>(M) * nx), ti(tr.size());
  double s[kMaxQuantumNumber], c[kMaxQuantumNumber];
  for (std::size_t i = 0; i < nx; ++i) {
    harmonics(xs[i], M, s, c);
    for (int m = 0; m < M; ++m) {
      tr[m * nx + i] = pr[m] * s[m];
      ti[m * nx + i] = pi[m] * s[m];
    }
  }

  const double norm2 = kEigenNorm * kEigenNorm;
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
    for (std::size_t i = 0; i < nx; ++i) {
      double re = 0, im = 0;
      for (int m = 0; m < M; ++m) {
        const double a = tr[m * nx + i], b = ti[m * nx + i];
        re += a * ur[m] - b * ui[m];
        im += a * ui[m] + b * ur[m];
      }
      row[i] = norm2 * (re * re + im * im);
    }
  }
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{Isa::Scalar, "scalar", &point_scalar, &density_grid_scalar};
  return table;
}

}  // namespace pilotwave::kernels
