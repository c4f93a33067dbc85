#pragma once

#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pilotwave/transport.hpp"
#include "pilotwave/wavefield.hpp"

namespace pilotwave {

enum class CoarseMode { NonOverlapping, Overlapping };

[[nodiscard]] std::string_view to_string(CoarseMode m);
[[nodiscard]] CoarseMode parse_coarse_mode(std::string_view s);

struct CoarseGrainSpec {
  double cell_side = kPi / 32;  // epsilon
  CoarseMode mode = CoarseMode::NonOverlapping;
  double overlap_shift_fraction = 0.12;
  int samples_per_cell_side = 25;

  void validate() const;
  // Number of cell centres along one axis. Non-overlapping: pi / epsilon,
  // which must be an integer. Overlapping: floor((pi - eps) / s) + 1 with
  // s = shift_fraction * eps.
  [[nodiscard]] std::size_t cells_per_side() const;
  [[nodiscard]] double center(std::size_t k) const;
  [[nodiscard]] std::size_t lattice_side() const;  // non-overlapping: cells * samples
  [[nodiscard]] nlohmann::json to_json() const;
};

struct CellGrid {
  GridDims dims;
  std::vector<Position> centers;  // row-major like the lattices
  std::vector<double> values;
  CoarseGrainSpec spec;
};

// Mean of the lattice samples inside each cell. Non-overlapping mode needs the
// lattice to tile the cells evenly (GridMismatch otherwise).
[[nodiscard]] CellGrid coarse_grain(std::span<const double> values, GridDims dims, const CoarseGrainSpec& spec);
[[nodiscard]] CellGrid coarse_grain(const DensityLattice& lattice, const CoarseGrainSpec& spec);

// Cell means of |psi(., t)|^2 sampled on each cell's own
// samples_per_cell_side^2 cell-centred sub-lattice.
[[nodiscard]] CellGrid coarse_grain_psi2(const ModeSuperposition& state, double t, const CoarseGrainSpec& spec);

// sum over cells of eps^2 rho ln(rho / psi2), both grids first renormalised to
// unit cell quadrature. Cells with rho == 0 contribute zero.
[[nodiscard]] double hbar(const CellGrid& rho_cells, const CellGrid& psi2_cells);

// Midpoint quadrature of rho0 ln(rho0 / |psi0|^2) over the box at t = 0.
[[nodiscard]] double h_finegrained(const ModeSuperposition& state, const InitialDensity& rho0, GridDims grid);

// The same integral evaluated from transported f on a lattice at its own
// time: integral of rho ln f. Constant in time for exact transport.
[[nodiscard]] double h_transported(const DensityLattice& lattice);

}  // namespace pilotwave
