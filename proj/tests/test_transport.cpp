#include <doctest.h>

#include <cmath>

#include "pilotwave/errors.hpp"
#include "pilotwave/transport.hpp"

using namespace pilotwave;

TEST_CASE("cell-centred lattice") {
  const auto axis = cell_centered_axis(4);
  CHECK(axis[0] == doctest::Approx(kPi / 8));
  CHECK(axis[3] == doctest::Approx(7 * kPi / 8));
  const auto lat = cell_centered_lattice({3, 2});
  REQUIRE(lat.size() == 6);
  CHECK(lat[1].x == doctest::Approx(kPi / 2));  // row-major: x varies fastest
  CHECK(lat[1].y == doctest::Approx(kPi / 4));
  CHECK(lat[3].y == doctest::Approx(3 * kPi / 4));
}

TEST_CASE("initial densities") {
  const InitialDensity g = InitialDensity::ground_state();
  CHECK(g.normalization_check == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(g.density({kPi / 2, kPi / 2}) == doctest::Approx(4 / (kPi * kPi)));
  // Gradient against central differences.
  const Position q{0.7, 2.1};
  const double h = 1e-6;
  const auto grad = g.gradient(q);
  CHECK(grad[0] == doctest::Approx((g.density({q.x + h, q.y}) - g.density({q.x - h, q.y})) / (2 * h)).epsilon(1e-7));
  CHECK(grad[1] == doctest::Approx((g.density({q.x, q.y + h}) - g.density({q.x, q.y - h})) / (2 * h)).epsilon(1e-7));

  const ModeSuperposition s = ModeSuperposition::box16();
  const InitialDensity e = InitialDensity::equilibrium(s);
  CHECK(e.normalization_check == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(e.density(q) == doctest::Approx(std::norm(psi_at(s, q, 0.0))));
  const auto ge = e.gradient(q);
  CHECK(ge[0] == doctest::Approx((e.density({q.x + h, q.y}) - e.density({q.x - h, q.y})) / (2 * h)).epsilon(1e-6));
}

TEST_CASE("backtracking from t = 0 is the identity") {
  const ModeSuperposition s = ModeSuperposition::box16();
  const OriginMap m = backtrack_lattice(s, 0.0, {10, 10}, {}, 2);
  CHECK(m.origins == m.lattice);
  CHECK(m.non_validated() == 0);
  CHECK(m.fallback_count() == 0);

  const DensityLattice d = density_at(s, InitialDensity::ground_state(), m);
  for (std::size_t k = 0; k < d.lattice.size(); ++k) {
    const double sx = std::sin(d.lattice[k].x), sy = std::sin(d.lattice[k].y);
    CHECK(d.rho_values[k] == doctest::Approx(4 / (kPi * kPi) * sx * sx * sy * sy).epsilon(1e-13));
  }
  CHECK(d.flagged_count() == 0);
}

TEST_CASE("equilibrium stays in equilibrium") {
  const ModeSuperposition s = ModeSuperposition::box16();
  const OriginMap m = backtrack_lattice(s, 1.3, {12, 12}, {});
  CHECK(m.non_validated() == 0);
  const DensityLattice d = density_at(s, InitialDensity::equilibrium(s), m);
  const auto xs = cell_centered_axis(12);
  const auto psi2 = density_grid(s, xs, xs, 1.3);
  for (std::size_t k = 0; k < d.f_values.size(); ++k) {
    CHECK(d.f_values[k] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(d.rho_values[k] == doctest::Approx(psi2[k]).epsilon(1e-12));
  }
}

TEST_CASE("origins are the t = 0 ends of the trajectories") {
  const ModeSuperposition s = ModeSuperposition::box16();
  const OriginMap m = backtrack_lattice(s, 0.9, {5, 4}, {});
  for (std::size_t k = 0; k < m.lattice.size(); ++k) {
    const TrajectoryResult fwd = integrate_validated(s, m.origins[k], 0.0, 0.9, {});
    CHECK(distance(fwd.endpoint, m.lattice[k]) < 1e-4);
  }
}

TEST_CASE("result does not depend on the worker count") {
  const ModeSuperposition s = ModeSuperposition::box16();
  const OriginMap a = backtrack_lattice(s, 0.7, {9, 7}, {}, 1);
  const OriginMap b = backtrack_lattice(s, 0.7, {9, 7}, {}, 3);
  CHECK(a.origins == b.origins);
  CHECK(a.delta_used == b.delta_used);
}

TEST_CASE("negative times integrate forward to zero") {
  const ModeSuperposition s = ModeSuperposition::box16();
  const OriginMap m = backtrack_lattice(s, -0.5, {4, 4}, {});
  for (std::size_t k = 0; k < m.lattice.size(); ++k) {
    const TrajectoryResult back = integrate_validated(s, m.origins[k], 0.0, -0.5, {});
    CHECK(distance(back.endpoint, m.lattice[k]) < 1e-4);
  }
}

TEST_CASE("nearest validated neighbour") {
  // 5 x 5, only two valid points, equidistant from the centre in ring 1.
  std::vector<std::uint8_t> valid(25, 0);
  valid[1 * 5 + 2] = 1;  // (row 1, col 2): drow = -1
  valid[2 * 5 + 3] = 1;  // (row 2, col 3): drow = 0
  CHECK(nearest_valid({5, 5}, 2 * 5 + 2, valid) == 1 * 5 + 2);
  valid[1 * 5 + 2] = 0;
  CHECK(nearest_valid({5, 5}, 2 * 5 + 2, valid) == 2 * 5 + 3);
  // Far corner is found by widening rings.
  std::vector<std::uint8_t> corner(25, 0);
  corner[24] = 1;
  CHECK(nearest_valid({5, 5}, 0, corner) == 24);
  CHECK(nearest_valid({5, 5}, 0, std::vector<std::uint8_t>(25, 0)) == 25);
}

TEST_CASE("no usable trajectory at all") {
  IntegratorConfig cfg;
  cfg.max_steps = 1;
  CHECK_THROWS_AS((void)backtrack_lattice(ModeSuperposition::box16(), 2.0, {3, 3}, cfg), FallbackUnavailable);
  CHECK_THROWS_AS((void)backtrack_lattice(ModeSuperposition::box16(), 2.0, {1, 3}, {}), ConfigError);
}

TEST_CASE("reversed state") {
  const ModeSuperposition s = ModeSuperposition::box16();
  const double tr = kPi;
  const ModeSuperposition r = reversed_state(s, tr);
  // psi'(q, s) = conj(psi(q, t_r - s)).
  for (double t : {0.0, 0.4, 2.0}) {
    const Position q{0.8, 1.9};
    CHECK(std::abs(psi_at(r, q, t) - std::conj(psi_at(s, q, tr - t))) < 1e-12);
  }
  // Reversing twice at the same time is the identity (phases mod 2 pi).
  const ModeSuperposition rr = reversed_state(r, tr);
  for (std::size_t k = 0; k < s.modes().size(); ++k) {
    const double d = std::remainder(rr.modes()[k].phase - s.modes()[k].phase, 2 * kPi);
    CHECK(std::abs(d) < 1e-12);
  }
}

TEST_CASE("reversed experiment starts from the evolved density") {
  const ModeSuperposition s = ModeSuperposition::box16();
  const InitialDensity g = InitialDensity::ground_state();
  const double tr = 1.0;
  const OriginMap m = backtrack_lattice(s, tr, {6, 6}, {});
  const DensityLattice at_tr = density_at(s, g, m);
  const ReversedExperiment ex = reverse_setup(s, g, at_tr, tr, {});
  CHECK(ex.rho_at_zero.time == 0.0);
  for (std::size_t k = 0; k < at_tr.lattice.size(); ++k)
    CHECK(ex.rho0.density(at_tr.lattice[k]) == doctest::Approx(at_tr.rho_values[k]).epsilon(1e-6));

  // Evolving the reversed system for t_r brings back the original rho0.
  const OriginMap back = backtrack_lattice(ex.state, tr, {6, 6}, {});
  const DensityLattice final_rho = density_at(ex.state, ex.rho0, back);
  for (std::size_t k = 0; k < final_rho.lattice.size(); ++k)
    CHECK(final_rho.rho_values[k] == doctest::Approx(g.density(final_rho.lattice[k])).epsilon(1e-4));
}

TEST_CASE("forward evolution agrees with backtracking") {
  const ModeSuperposition s = ModeSuperposition::box16();
  const InitialDensity g = InitialDensity::ground_state();
  const ForwardLattice fwd = forward_evolve(s, g, 0.8, {5, 5}, {});
  for (std::size_t k = 0; k < fwd.positions.size(); ++k) {
    const TrajectoryResult back = integrate_validated(s, fwd.positions[k], 0.8, 0.0, {});
    CHECK(distance(back.endpoint, fwd.initial[k]) < 1e-4);
    // rho = |psi|^2 f is carried along.
    const double f0 = g.density(fwd.initial[k]) / std::norm(psi_at(s, fwd.initial[k], 0.0));
    CHECK(fwd.rho_values[k] == doctest::Approx(std::norm(psi_at(s, fwd.positions[k], 0.8)) * f0).epsilon(1e-12));
  }
}
