#pragma once

// Field-evaluation kernels for a box-mode superposition.
//
// Two kernels sit under everything else: the wavefunction and its gradient at
// a single point (called six times per Runge-Kutta-Fehlberg attempt) and
// |psi|^2 on a tensor-product grid (coarse-graining, quadrature, lattice
// densities). Each has a portable scalar reference and an AVX2/FMA variant.
// The variant is chosen once at startup from CPUID, overridable through
// PILOTWAVE_KERNEL=scalar|avx2 or select_kernels().

#include <complex>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace pilotwave::kernels {

inline constexpr int kMaxQuantumNumber = 64;

// Dense complex coefficient table A[m][n] = amplitude * exp(i * phase),
// stored n-major with the m axis padded to a multiple of four lanes.
struct PackedModes {
  int m_max = 0;
  int n_max = 0;
  int m_stride = 0;
  std::vector<double> re;  // index n * m_stride + (m - 1), n = 0 .. n_max - 1 for quantum number n + 1
  std::vector<double> im;

  [[nodiscard]] std::size_t index(int m, int n) const {
    return static_cast<std::size_t>(n - 1) * static_cast<std::size_t>(m_stride) +
           static_cast<std::size_t>(m - 1);
  }
};

struct PointField {
  std::complex<double> psi;
  std::complex<double> dpsi_dx;
  std::complex<double> dpsi_dy;
};

enum class Isa { Scalar, Avx2 };

using PointFn = void (*)(const PackedModes&, double x, double y, double t, PointField& out);

// out[j * xs.size() + i] = |psi(xs[i], ys[j], t)|^2
using DensityGridFn = void (*)(const PackedModes&, std::span<const double> xs,
                               std::span<const double> ys, double t, std::span<double> out);

struct KernelTable {
  Isa isa;
  std::string_view name;
  PointFn point;
  DensityGridFn density_grid;
};

const KernelTable& scalar_kernels();

// nullptr when the variant was not compiled in or the CPU lacks AVX2/FMA.
const KernelTable* avx2_kernels();

const KernelTable& active_kernels();

// Throws ConfigError when the requested ISA is unavailable.
void select_kernels(Isa isa);
void select_kernels(std::string_view name);

}  // namespace pilotwave::kernels
