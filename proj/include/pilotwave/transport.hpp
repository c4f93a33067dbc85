#pragma once

// Density transport by backtracking. f = rho / |psi|^2 is constant along
// trajectories, so rho(q, t) = |psi(q, t)|^2 * f0(q0), where q0 is the t = 0
// origin of the trajectory through q at time t.

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pilotwave/integrator.hpp"
#include "pilotwave/wavefield.hpp"

namespace pilotwave {

struct GridDims {
  std::size_t nx = 0;
  std::size_t ny = 0;

  [[nodiscard]] std::size_t size() const { return nx * ny; }
  friend bool operator==(const GridDims&, const GridDims&) = default;
};

// Cell-centred coordinates (i + 1/2) * pi / n, i = 0 .. n - 1.
[[nodiscard]] std::vector<double> cell_centered_axis(std::size_t n);
// Row-major, index j * nx + i for (x_i, y_j).
[[nodiscard]] std::vector<Position> cell_centered_lattice(GridDims dims);

struct InitialDensity {
  std::string name;
  std::function<double(Position)> density;
  // Optional direct f0 = rho0 / |psi0|^2; NaN marks an untrusted value.
  std::function<double(Position)> ratio;
  // Optional analytic gradient of rho0.
  std::function<std::array<double, 2>(Position)> gradient;
  double normalization_check = 0;  // midpoint quadrature of rho0 over the box

  // rho0 = (2/pi)^2 sin^2 x sin^2 y, the ground-state equilibrium density.
  static InitialDensity ground_state();
  // rho0 = |psi(., 0)|^2 for the given state.
  static InitialDensity equilibrium(const ModeSuperposition& state);
  // rho0 = |phi(., 0)|^2 for an arbitrary mode table (custom densities).
  static InitialDensity from_modes(std::string name, const ModeSuperposition& modes);
};

[[nodiscard]] double box_quadrature(const std::function<double(Position)>& f, std::size_t n);

struct OriginMap {
  double target_time = 0;
  GridDims dims;
  std::vector<Position> lattice;
  std::vector<Position> origins;
  std::vector<TrajectoryStatus> statuses;
  std::vector<std::uint8_t> fallback_flags;
  std::vector<double> delta_used;

  [[nodiscard]] std::size_t non_validated() const;
  [[nodiscard]] std::size_t fallback_count() const;
};

// Backtracks every cell-centred lattice point from t to 0 through the delta
// ladder. Points without a usable endpoint take the origin of the nearest
// validated neighbour (ring search, ties by (drow, dcol)) and are flagged.
// Negative t integrates forward to 0 and is allowed for derivative probes.
[[nodiscard]] OriginMap backtrack_lattice(const ModeSuperposition& state, double t, GridDims dims,
                                          const IntegratorConfig& config, unsigned workers = 0);

struct DensityLattice {
  double time = 0;
  GridDims dims;
  std::vector<Position> lattice;
  std::vector<double> f_values;
  std::vector<double> rho_values;
  std::vector<std::uint8_t> flagged;

  [[nodiscard]] std::size_t flagged_count() const;
};

[[nodiscard]] DensityLattice density_at(const ModeSuperposition& state, const InitialDensity& rho0,
                                        const OriginMap& origins, double node_floor = kDefaultNodeFloor,
                                        unsigned workers = 0);

// Nearest index with valid[k] set, ring search around idx. Returns size() if none.
[[nodiscard]] std::size_t nearest_valid(GridDims dims, std::size_t idx, const std::vector<std::uint8_t>& valid);

// Time-reversed experiment: psi'(., 0) = psi*(., t_r), rho'(., 0) = rho(., t_r).
struct ReversedExperiment {
  ModeSuperposition state;
  InitialDensity rho0;
  DensityLattice rho_at_zero;
  double t_r = 0;
};

// The reversed rho0 is evaluated exactly by backtracking in the original
// system (f'(q, 0) = f0(origin of q at t_r)), not by interpolating the lattice.
[[nodiscard]] ReversedExperiment reverse_setup(const ModeSuperposition& state, const InitialDensity& rho0,
                                               const DensityLattice& rho_at_tr, double t_r,
                                               const IntegratorConfig& config);

[[nodiscard]] ModeSuperposition reversed_state(const ModeSuperposition& state, double t_r);

// Cross-check only: evolve a uniform t = 0 lattice forward; the lattice distorts.
struct ForwardLattice {
  double time = 0;
  std::vector<Position> initial;
  std::vector<Position> positions;
  std::vector<double> rho_values;
  std::vector<TrajectoryStatus> statuses;
};

[[nodiscard]] ForwardLattice forward_evolve(const ModeSuperposition& state, const InitialDensity& rho0, double t,
                                            GridDims dims, const IntegratorConfig& config, unsigned workers = 0);

}  // namespace pilotwave
