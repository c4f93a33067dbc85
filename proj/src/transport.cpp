#include "pilotwave/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "pilotwave/errors.hpp"
#include "pilotwave/parallel.hpp"

namespace pilotwave {

std::vector<double> cell_centered_axis(std::size_t n) {
  std::vector<double> axis(n);
  for (std::size_t i = 0; i < n; ++i) axis[i] = (static_cast<double>(i) + 0.5) * kBoxSide / static_cast<double>(n);
  return axis;
}

std::vector<Position> cell_centered_lattice(GridDims dims) {
  const auto xs = cell_centered_axis(dims.nx);
  const auto ys = cell_centered_axis(dims.ny);
  std::vector<Position> out;
  out.reserve(dims.size());
  for (double y : ys)
    for (double x : xs) out.push_back({x, y});
  return out;
}

double box_quadrature(const std::function<double(Position)>& f, std::size_t n) {
  const auto axis = cell_centered_axis(n);
  double sum = 0;
  for (double y : axis)
    for (double x : axis) sum += f({x, y});
  const double h = kBoxSide / static_cast<double>(n);
  return sum * h * h;
}

InitialDensity InitialDensity::ground_state() {
  InitialDensity d;
  d.name = "eq15";
  constexpr double c = 4.0 / (std::numbers::pi * std::numbers::pi);
  d.density = [](Position p) {
    const double s = std::sin(p.x) * std::sin(p.y);
    return c * s * s;
  };
  d.gradient = [](Position p) -> std::array<double, 2> {
    const double sx = std::sin(p.x), sy = std::sin(p.y);
    return {c * 2 * sx * std::cos(p.x) * sy * sy, c * 2 * sy * std::cos(p.y) * sx * sx};
  };
  d.normalization_check = box_quadrature(d.density, 256);
  return d;
}

InitialDensity InitialDensity::from_modes(std::string name, const ModeSuperposition& modes) {
  InitialDensity d;
  d.name = std::move(name);
  d.density = [modes](Position p) { return std::norm(psi_at(modes, p, 0.0)); };
  d.gradient = [modes](Position p) -> std::array<double, 2> {
    kernels::PointField f;
    kernels::active_kernels().point(modes.packed(), p.x, p.y, 0.0, f);
    return {2 * std::real(std::conj(f.psi) * f.dpsi_dx), 2 * std::real(std::conj(f.psi) * f.dpsi_dy)};
  };
  d.normalization_check = box_quadrature(d.density, 256);
  return d;
}

InitialDensity InitialDensity::equilibrium(const ModeSuperposition& state) { return from_modes("equilibrium", state); }

std::size_t OriginMap::non_validated() const {
  return static_cast<std::size_t>(
      std::count_if(statuses.begin(), statuses.end(), [](TrajectoryStatus s) { return s != TrajectoryStatus::Validated; }));
}

std::size_t OriginMap::fallback_count() const {
  return static_cast<std::size_t>(std::count(fallback_flags.begin(), fallback_flags.end(), std::uint8_t{1}));
}

std::size_t DensityLattice::flagged_count() const {
  return static_cast<std::size_t>(std::count(flagged.begin(), flagged.end(), std::uint8_t{1}));
}

std::size_t nearest_valid(GridDims dims, std::size_t idx, const std::vector<std::uint8_t>& valid) {
  const auto row = static_cast<long>(idx / dims.nx);
  const auto col = static_cast<long>(idx % dims.nx);
  const long nrows = static_cast<long>(dims.ny), ncols = static_cast<long>(dims.nx);
  const long max_ring = std::max(nrows, ncols);
  for (long r = 1; r <= max_ring; ++r) {
    std::size_t best = valid.size();
    long best_d2 = std::numeric_limits<long>::max();
    for (long dr = -r; dr <= r; ++dr) {
      const long rr = row + dr;
      if (rr < 0 || rr >= nrows) continue;
      const bool edge_row = std::abs(dr) == r;
      for (long dc = -r; dc <= r; dc += edge_row ? 1 : 2 * r) {
        const long cc = col + dc;
        if (cc < 0 || cc >= ncols) continue;
        const auto k = static_cast<std::size_t>(rr * ncols + cc);
        const long d2 = dr * dr + dc * dc;
        if (valid[k] && d2 < best_d2) {
          best = k;
          best_d2 = d2;
        }
      }
    }
    if (best != valid.size()) return best;
  }
  return valid.size();
}

OriginMap backtrack_lattice(const ModeSuperposition& state, double t, GridDims dims, const IntegratorConfig& config,
                            unsigned workers) {
  if (dims.nx < 2 || dims.ny < 2) throw ConfigError("lattice must be at least 2x2");
  config.validate();
  OriginMap map;
  map.target_time = t;
  map.dims = dims;
  map.lattice = cell_centered_lattice(dims);
  const std::size_t n = map.lattice.size();
  map.origins.resize(n);
  map.statuses.resize(n);
  map.delta_used.resize(n);
  map.fallback_flags.assign(n, 0);
  std::vector<std::uint8_t> usable(n, 0);

  parallel_for(n, workers, [&](std::size_t k) {
    const TrajectoryResult r = integrate_validated(state, map.lattice[k], t, 0.0, config);
    map.origins[k] = r.endpoint;
    map.statuses[k] = r.status;
    map.delta_used[k] = r.delta_used;
    usable[k] = r.has_endpoint ? 1 : 0;
  });

  std::vector<std::uint8_t> validated(n, 0);
  for (std::size_t k = 0; k < n; ++k) validated[k] = map.statuses[k] == TrajectoryStatus::Validated;
  for (std::size_t k = 0; k < n; ++k) {
    if (usable[k]) continue;
    const std::size_t src = nearest_valid(dims, k, validated);
    if (src == n) throw FallbackUnavailable("no lattice point could be integrated; check the integrator configuration");
    map.origins[k] = map.origins[src];
    map.fallback_flags[k] = 1;
  }
  return map;
}

DensityLattice density_at(const ModeSuperposition& state, const InitialDensity& rho0, const OriginMap& origins,
                          double node_floor, unsigned workers) {
  DensityLattice out;
  out.time = origins.target_time;
  out.dims = origins.dims;
  out.lattice = origins.lattice;
  const std::size_t n = origins.origins.size();
  out.f_values.resize(n);
  out.flagged.assign(origins.fallback_flags.begin(), origins.fallback_flags.end());

  std::vector<std::uint8_t> good(n, 0);
  parallel_for(n, workers, [&](std::size_t k) {
    const Position q0 = origins.origins[k];
    double f;
    if (rho0.ratio) {
      f = rho0.ratio(q0);
    } else {
      const double psi2 = std::norm(psi_at(state, q0, 0.0));
      f = psi2 >= node_floor ? rho0.density(q0) / psi2 : std::numeric_limits<double>::quiet_NaN();
    }
    out.f_values[k] = f;
    good[k] = std::isfinite(f) && f >= 0.0;
  });

  std::vector<std::uint8_t> valid(n);
  for (std::size_t k = 0; k < n; ++k) valid[k] = good[k] && !out.flagged[k];
  for (std::size_t k = 0; k < n; ++k) {
    if (good[k]) continue;
    const std::size_t src = nearest_valid(out.dims, k, valid);
    if (src == n) throw FallbackUnavailable("no lattice point has a finite f value");
    out.f_values[k] = out.f_values[src];
    out.flagged[k] = 1;
  }

  const auto xs = cell_centered_axis(out.dims.nx);
  const auto ys = cell_centered_axis(out.dims.ny);
  out.rho_values = density_grid(state, xs, ys, out.time);
  for (std::size_t k = 0; k < n; ++k) out.rho_values[k] *= out.f_values[k];
  return out;
}

ModeSuperposition reversed_state(const ModeSuperposition& state, double t_r) {
  std::vector<Mode> modes(state.modes().begin(), state.modes().end());
  constexpr double two_pi = 2 * std::numbers::pi;
  for (Mode& md : modes) {
    double phase = std::fmod(-(md.phase - md.energy() * t_r), two_pi);
    if (phase < 0) phase += two_pi;
    md.phase = phase;
  }
  return ModeSuperposition(std::move(modes));
}

ReversedExperiment reverse_setup(const ModeSuperposition& state, const InitialDensity& rho0,
                                 const DensityLattice& rho_at_tr, double t_r, const IntegratorConfig& config) {
  ReversedExperiment ex{reversed_state(state, t_r), {}, rho_at_tr, t_r};
  ex.rho_at_zero.time = 0.0;

  const double floor = config.node_floor;
  auto f_at_tr = [state, rho0, t_r, config, floor](Position q) {
    const TrajectoryResult r = integrate_validated(state, q, t_r, 0.0, config);
    if (!r.has_endpoint) return std::numeric_limits<double>::quiet_NaN();
    if (rho0.ratio) return rho0.ratio(r.endpoint);
    const double psi2 = std::norm(psi_at(state, r.endpoint, 0.0));
    return psi2 >= floor ? rho0.density(r.endpoint) / psi2 : std::numeric_limits<double>::quiet_NaN();
  };
  ex.rho0.name = "reversed(" + rho0.name + ")";
  ex.rho0.ratio = f_at_tr;
  ex.rho0.density = [state, t_r, f_at_tr](Position q) { return std::norm(psi_at(state, q, t_r)) * f_at_tr(q); };
  // Total probability is conserved by the flow.
  ex.rho0.normalization_check = rho0.normalization_check;
  return ex;
}

ForwardLattice forward_evolve(const ModeSuperposition& state, const InitialDensity& rho0, double t, GridDims dims,
                              const IntegratorConfig& config, unsigned workers) {
  ForwardLattice out;
  out.time = t;
  out.initial = cell_centered_lattice(dims);
  const std::size_t n = out.initial.size();
  out.positions.resize(n);
  out.rho_values.resize(n);
  out.statuses.resize(n);
  parallel_for(n, workers, [&](std::size_t k) {
    const Position q0 = out.initial[k];
    const TrajectoryResult r = integrate_validated(state, q0, 0.0, t, config);
    out.positions[k] = r.endpoint;
    out.statuses[k] = r.status;
    const double psi0 = std::norm(psi_at(state, q0, 0.0));
    const double f0 = rho0.ratio ? rho0.ratio(q0) : rho0.density(q0) / psi0;
    out.rho_values[k] = r.has_endpoint ? std::norm(psi_at(state, r.endpoint, t)) * f0
                                       : std::numeric_limits<double>::quiet_NaN();
  });
  return out;
}

}  // namespace pilotwave
