#include "pilotwave/coarsegrain.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pilotwave/errors.hpp"

namespace pilotwave {

std::string_view to_string(CoarseMode m) {
  return m == CoarseMode::NonOverlapping ? "non-overlapping" : "overlapping";
}

CoarseMode parse_coarse_mode(std::string_view s) {
  if (s == "non-overlapping" || s == "nonoverlapping") return CoarseMode::NonOverlapping;
  if (s == "overlapping") return CoarseMode::Overlapping;
  throw ConfigError("unknown coarse-graining mode '" + std::string(s) + "'");
}

void CoarseGrainSpec::validate() const {
  if (!(cell_side > 0 && cell_side <= kBoxSide)) throw ConfigError("cell side must lie in (0, pi]");
  if (samples_per_cell_side < 1) throw ConfigError("samples_per_cell_side must be >= 1");
  if (mode == CoarseMode::NonOverlapping) {
    const double k = kBoxSide / cell_side;
    if (std::abs(k - std::round(k)) > 1e-9 * k)
      throw ConfigError("non-overlapping cell side must divide pi exactly (e.g. pi/32)");
  } else if (!(overlap_shift_fraction > 0 && overlap_shift_fraction <= 1)) {
    throw ConfigError("overlap shift fraction must lie in (0, 1]");
  }
}

std::size_t CoarseGrainSpec::cells_per_side() const {
  validate();
  if (mode == CoarseMode::NonOverlapping) return static_cast<std::size_t>(std::llround(kBoxSide / cell_side));
  const double shift = overlap_shift_fraction * cell_side;
  return static_cast<std::size_t>(std::floor((kBoxSide - cell_side) / shift + 1e-9)) + 1;
}

double CoarseGrainSpec::center(std::size_t k) const {
  const double step = mode == CoarseMode::NonOverlapping ? cell_side : overlap_shift_fraction * cell_side;
  return 0.5 * cell_side + static_cast<double>(k) * step;
}

std::size_t CoarseGrainSpec::lattice_side() const {
  return cells_per_side() * static_cast<std::size_t>(samples_per_cell_side);
}

nlohmann::json CoarseGrainSpec::to_json() const {
  return {{"cell_side", cell_side},
          {"mode", std::string(to_string(mode))},
          {"overlap_shift_fraction", overlap_shift_fraction},
          {"samples_per_cell_side", samples_per_cell_side},
          {"cells_per_side", cells_per_side()},
          {"quadrature", "within-cell arithmetic mean"},
          {"hbar_renormalisation", "rho and psi2 cell grids each scaled to unit cell quadrature"}};
}

namespace {

CellGrid empty_grid(const CoarseGrainSpec& spec) {
  CellGrid g;
  g.spec = spec;
  const std::size_t k = spec.cells_per_side();
  g.dims = {k, k};
  g.centers.reserve(k * k);
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t i = 0; i < k; ++i) g.centers.push_back({spec.center(i), spec.center(j)});
  g.values.assign(k * k, 0.0);
  return g;
}

// Half-open index range of cell-centred lattice points inside [lo, hi).
std::pair<std::size_t, std::size_t> lattice_range(double lo, double hi, std::size_t n) {
  const double scale = static_cast<double>(n) / kBoxSide;
  auto first_at_or_above = [&](double v) {
    const double k = std::ceil(v * scale - 0.5);
    return static_cast<std::size_t>(std::clamp(k, 0.0, static_cast<double>(n)));
  };
  return {first_at_or_above(lo), first_at_or_above(hi)};
}

}  // namespace

CellGrid coarse_grain(std::span<const double> values, GridDims dims, const CoarseGrainSpec& spec) {
  if (values.size() != dims.size()) throw ConfigError("lattice values do not match dims");
  CellGrid g = empty_grid(spec);
  const std::size_t k = g.dims.nx;

  if (spec.mode == CoarseMode::NonOverlapping) {
    if (dims.nx % k != 0 || dims.ny % k != 0)
      throw GridMismatch("lattice " + std::to_string(dims.nx) + "x" + std::to_string(dims.ny) +
                         " does not tile " + std::to_string(k) + "x" + std::to_string(k) + " cells");
    const std::size_t sx = dims.nx / k, sy = dims.ny / k;
    const double inv = 1.0 / static_cast<double>(sx * sy);
    for (std::size_t cj = 0; cj < k; ++cj) {
      for (std::size_t ci = 0; ci < k; ++ci) {
        double sum = 0;
        for (std::size_t j = cj * sy; j < (cj + 1) * sy; ++j)
          for (std::size_t i = ci * sx; i < (ci + 1) * sx; ++i) sum += values[j * dims.nx + i];
        g.values[cj * k + ci] = sum * inv;
      }
    }
    return g;
  }

  for (std::size_t cj = 0; cj < k; ++cj) {
    const double cy = spec.center(cj);
    const auto [j0, j1] = lattice_range(cy - 0.5 * spec.cell_side, cy + 0.5 * spec.cell_side, dims.ny);
    for (std::size_t ci = 0; ci < k; ++ci) {
      const double cx = spec.center(ci);
      const auto [i0, i1] = lattice_range(cx - 0.5 * spec.cell_side, cx + 0.5 * spec.cell_side, dims.nx);
      if (i1 <= i0 || j1 <= j0) throw GridMismatch("overlapping cell contains no lattice points");
      double sum = 0;
      for (std::size_t j = j0; j < j1; ++j)
        for (std::size_t i = i0; i < i1; ++i) sum += values[j * dims.nx + i];
      g.values[cj * k + ci] = sum / static_cast<double>((i1 - i0) * (j1 - j0));
    }
  }
  return g;
}

CellGrid coarse_grain(const DensityLattice& lattice, const CoarseGrainSpec& spec) {
  return coarse_grain(lattice.rho_values, lattice.dims, spec);
}

CellGrid coarse_grain_psi2(const ModeSuperposition& state, double t, const CoarseGrainSpec& spec) {
  CellGrid g = empty_grid(spec);
  const std::size_t k = g.dims.nx;
  const auto s = static_cast<std::size_t>(spec.samples_per_cell_side);

  // Every cell's sub-lattice lies on one tensor grid of k * s coordinates per axis.
  std::vector<double> axis(k * s);
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t q = 0; q < s; ++q)
      axis[c * s + q] = spec.center(c) - 0.5 * spec.cell_side +
                        (static_cast<double>(q) + 0.5) * spec.cell_side / static_cast<double>(s);

  const std::vector<double> field = density_grid(state, axis, axis, t);
  const std::size_t n = k * s;
  const double inv = 1.0 / static_cast<double>(s * s);
  for (std::size_t cj = 0; cj < k; ++cj) {
    for (std::size_t ci = 0; ci < k; ++ci) {
      double sum = 0;
      for (std::size_t j = cj * s; j < (cj + 1) * s; ++j)
        for (std::size_t i = ci * s; i < (ci + 1) * s; ++i) sum += field[j * n + i];
      g.values[cj * k + ci] = sum * inv;
    }
  }
  return g;
}

double hbar(const CellGrid& rho_cells, const CellGrid& psi2_cells) {
  if (rho_cells.spec.mode != CoarseMode::NonOverlapping || psi2_cells.spec.mode != CoarseMode::NonOverlapping)
    throw ConfigError("hbar needs non-overlapping cells");
  if (!(rho_cells.dims == psi2_cells.dims) ||
      std::abs(rho_cells.spec.cell_side - psi2_cells.spec.cell_side) > 1e-12)
    throw ConfigError("hbar: cell grids do not match");

  double rho_mass = 0, psi_mass = 0;
  for (std::size_t k = 0; k < rho_cells.values.size(); ++k) {
    const double r = rho_cells.values[k], p = psi2_cells.values[k];
    if (!std::isfinite(r) || !std::isfinite(p) || r < 0 || p < 0)
      throw DomainError("hbar: cell values must be finite and nonnegative");
    rho_mass += r;
    psi_mass += p;
  }
  if (!(rho_mass > 0) || !(psi_mass > 0)) throw DomainError("hbar: zero total mass");

  // Normalised cell values are v / (mass * eps^2); eps^2 cancels against the cell area.
  // Both grids sum to one, so adding p - r per cell leaves the total unchanged while
  // making every term p * g(r/p), g(u) = u ln u - u + 1 >= 0: no roundoff below zero.
  double h = 0;
  for (std::size_t k = 0; k < rho_cells.values.size(); ++k) {
    const double r = rho_cells.values[k] / rho_mass;
    const double p = psi2_cells.values[k] / psi_mass;
    if (r == 0) {
      h += p;
      continue;
    }
    if (p == 0) throw DomainError("hbar: psi2 cell is zero where rho is positive (under-resolved quadrature)");
    const double d = r / p - 1;
    h += p * std::max(0.0, (1 + d) * std::log1p(d) - d);
  }
  return h;
}

double h_finegrained(const ModeSuperposition& state, const InitialDensity& rho0, GridDims grid) {
  const auto xs = cell_centered_axis(grid.nx);
  const auto ys = cell_centered_axis(grid.ny);
  const std::vector<double> psi2 = density_grid(state, xs, ys, 0.0);
  double sum = 0;
  for (std::size_t j = 0; j < grid.ny; ++j) {
    for (std::size_t i = 0; i < grid.nx; ++i) {
      const double r = rho0.density({xs[i], ys[j]});
      if (r <= 0) continue;
      sum += r * std::log(r / psi2[j * grid.nx + i]);
    }
  }
  return sum * (kBoxSide / static_cast<double>(grid.nx)) * (kBoxSide / static_cast<double>(grid.ny));
}

double h_transported(const DensityLattice& lattice) {
  double sum = 0;
  for (std::size_t k = 0; k < lattice.rho_values.size(); ++k) {
    const double f = lattice.f_values[k];
    if (f > 0) sum += lattice.rho_values[k] * std::log(f);
  }
  return sum * (kBoxSide / static_cast<double>(lattice.dims.nx)) * (kBoxSide / static_cast<double>(lattice.dims.ny));
}

}  // namespace pilotwave
