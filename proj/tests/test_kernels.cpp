#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "pilotwave/errors.hpp"
#include "pilotwave/kernels.hpp"
#include "pilotwave/sampling.hpp"
#include "pilotwave/transport.hpp"
#include "pilotwave/wavefield.hpp"

using namespace pilotwave;

namespace {

// Random unit-norm state with quantum numbers up to max_q (exercises lane padding).
ModeSuperposition random_state(Rng& rng, int max_q, int count) {
  std::uniform_int_distribution<int> q(1, max_q);
  std::uniform_real_distribution<double> u(0.1, 1.0), ph(0.0, 2 * kPi);
  std::vector<Mode> modes;
  while (static_cast<int>(modes.size()) < count) {
    Mode m{q(rng), q(rng), u(rng), ph(rng)};
    if (std::none_of(modes.begin(), modes.end(), [&](const Mode& o) { return o.m == m.m && o.n == m.n; }))
      modes.push_back(m);
  }
  double norm = 0;
  for (const Mode& m : modes) norm += m.amplitude * m.amplitude;
  for (Mode& m : modes) m.amplitude /= std::sqrt(norm);
  return ModeSuperposition(std::move(modes));
}

double field_gap(const kernels::PointField& a, const kernels::PointField& b) {
  return std::max({std::abs(a.psi - b.psi), std::abs(a.dpsi_dx - b.dpsi_dx), std::abs(a.dpsi_dy - b.dpsi_dy)});
}

}  // namespace

TEST_CASE("scalar point kernel matches the termwise reference") {
  Rng rng(11);
  const ModeSuperposition state = ModeSuperposition::box16();
  std::uniform_real_distribution<double> tt(-50.0, 50.0);
  double worst = 0;
  for (int k = 0; k < 2000; ++k) {
    const Position q = uniform_point(rng);
    const double t = tt(rng);
    kernels::PointField f;
    kernels::scalar_kernels().point(state.packed(), q.x, q.y, t, f);
    const FieldDerivatives ref = field_derivatives(state, q, t);
    worst = std::max({worst, std::abs(f.psi - ref.psi), std::abs(f.dpsi_dx - ref.psi_x),
                      std::abs(f.dpsi_dy - ref.psi_y)});
  }
  CHECK(worst < 1e-11);
}

TEST_CASE("AVX2 point kernel is equivalent to scalar") {
  const kernels::KernelTable* avx = kernels::avx2_kernels();
  if (!avx) {
    MESSAGE("AVX2 variant unavailable on this host");
    return;
  }
  Rng rng(12);
  std::uniform_real_distribution<double> tt(-100.0, 100.0);
  for (int trial = 0; trial < 20; ++trial) {
    const ModeSuperposition state = trial == 0 ? ModeSuperposition::box16() : random_state(rng, 1 + trial % 9, std::min(1 + trial, (1 + trial % 9) * (1 + trial % 9)));
    double worst = 0;
    for (int k = 0; k < 2000; ++k) {
      // Include points outside the box and near the walls.
      std::uniform_real_distribution<double> u(-1.0, kPi + 1.0);
      const double x = u(rng), y = u(rng), t = tt(rng);
      kernels::PointField a, b;
      kernels::scalar_kernels().point(state.packed(), x, y, t, a);
      avx->point(state.packed(), x, y, t, b);
      worst = std::max(worst, field_gap(a, b));
    }
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("AVX2 density grid is equivalent to scalar") {
  const kernels::KernelTable* avx = kernels::avx2_kernels();
  if (!avx) return;
  Rng rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const ModeSuperposition state = trial == 0 ? ModeSuperposition::box16() : random_state(rng, 2 + trial, 3 + trial);
    // Odd sizes cover the vector remainder path.
    const auto xs = cell_centered_axis(37 + trial);
    const auto ys = cell_centered_axis(29 + 2 * trial);
    std::vector<double> a(xs.size() * ys.size()), b(a.size());
    kernels::scalar_kernels().density_grid(state.packed(), xs, ys, 0.3 * trial, a);
    avx->density_grid(state.packed(), xs, ys, 0.3 * trial, b);
    double worst = 0;
    for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, std::abs(a[k] - b[k]));
    CHECK(worst < 1e-13);
  }
}

TEST_CASE("density grid agrees with pointwise |psi|^2") {
  const ModeSuperposition state = ModeSuperposition::box16();
  const auto xs = cell_centered_axis(13);
  const auto ys = cell_centered_axis(7);
  for (const kernels::KernelTable* k : {&kernels::scalar_kernels(), kernels::avx2_kernels()}) {
    if (!k) continue;
    std::vector<double> out(xs.size() * ys.size());
    k->density_grid(state.packed(), xs, ys, 1.25, out);
    for (std::size_t j = 0; j < ys.size(); ++j)
      for (std::size_t i = 0; i < xs.size(); ++i)
        CHECK(out[j * xs.size() + i] ==
              doctest::Approx(std::norm(field_derivatives(state, {xs[i], ys[j]}, 1.25).psi)).epsilon(1e-12));
  }
}

TEST_CASE("kernel selection") {
  const kernels::Isa before = kernels::active_kernels().isa;
  kernels::select_kernels("scalar");
  CHECK(kernels::active_kernels().isa == kernels::Isa::Scalar);
  CHECK_THROWS_AS(kernels::select_kernels("neon"), ConfigError);
  kernels::select_kernels("auto");
  if (kernels::avx2_kernels()) CHECK(kernels::active_kernels().isa == kernels::Isa::Avx2);
  kernels::select_kernels(before);
}
