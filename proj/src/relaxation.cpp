#include "pilotwave/relaxation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pilotwave/errors.hpp"
#include "pilotwave/parallel.hpp"

namespace pilotwave {

std::vector<double> sample_times(double horizon, double interval) {
  if (!(interval > 0) || !(horizon >= 0)) throw ConfigError("horizon must be >= 0 and interval > 0");
  const auto count = static_cast<std::size_t>(std::floor(horizon / interval + 1e-9)) + 1;
  std::vector<double> t(count);
  for (std::size_t k = 0; k < count; ++k) t[k] = static_cast<double>(k) * interval;
  return t;
}

namespace {

struct HbarRun {
  double value;
  std::size_t non_validated;
  std::size_t flagged;
};

HbarRun hbar_run(const ModeSuperposition& state, const InitialDensity& rho0, double t, const CoarseGrainSpec& spec,
                 const IntegratorConfig& config, unsigned workers,
                 const std::function<void(const HSeriesSample&)>* observer) {
  const std::size_t side = spec.lattice_side();
  const OriginMap origins = backtrack_lattice(state, t, {side, side}, config, workers);
  const DensityLattice lattice = density_at(state, rho0, origins, config.node_floor, workers);
  const CellGrid rho_cells = coarse_grain(lattice, spec);
  const CellGrid psi2_cells = coarse_grain_psi2(state, t, spec);
  const double h = hbar(rho_cells, psi2_cells);
  if (observer && *observer) (*observer)(HSeriesSample{t, lattice, rho_cells, psi2_cells, origins});
  return {h, origins.non_validated(), lattice.flagged_count()};
}

void require_non_overlapping(const CoarseGrainSpec& spec) {
  spec.validate();
  if (spec.mode != CoarseMode::NonOverlapping) throw ConfigError("hbar series needs non-overlapping cells");
}

}  // namespace

double hbar_at(const ModeSuperposition& state, const InitialDensity& rho0, double t, const CoarseGrainSpec& spec,
               const IntegratorConfig& config, unsigned workers) {
  require_non_overlapping(spec);
  return hbar_run(state, rho0, t, spec, config, workers, nullptr).value;
}

HSeries hseries(const ModeSuperposition& state, const InitialDensity& rho0, const HSeriesOptions& options,
                const std::function<void(const HSeriesSample&)>& observer) {
  require_non_overlapping(options.spec);
  options.integrator.validate();

  CoarseGrainSpec resample = options.spec;
  resample.samples_per_cell_side = options.resample_samples_per_cell_side > 0
                                       ? options.resample_samples_per_cell_side
                                       : options.spec.samples_per_cell_side + 2;

  HSeries out;
  out.times = sample_times(options.horizon, options.interval);
  const std::size_t side = options.spec.lattice_side();
  const double points = static_cast<double>(side * side);

  for (double t : out.times) {
    const HbarRun run = hbar_run(state, rho0, t, options.spec, options.integrator, options.workers, &observer);
    out.hbar_values.push_back(run.value);
    out.non_validated_fraction.push_back(static_cast<double>(run.non_validated) / points);
    out.flagged_fraction.push_back(static_cast<double>(run.flagged) / points);
    if (options.error_bars) {
      const HbarRun alt = hbar_run(state, rho0, t, resample, options.integrator, options.workers, nullptr);
      out.hbar_resampled.push_back(alt.value);
      out.error_bars.push_back(std::abs(alt.value - run.value));
    } else {
      out.error_bars.push_back(0.0);
    }
  }

  out.run_metadata = {
      {"state_sha256", state.hash()},
      {"rho0", rho0.name},
      {"coarse_graining", options.spec.to_json()},
      {"lattice_side", side},
      {"error_bars", options.error_bars},
      {"integrator", options.integrator.to_json()},
      {"tableau", std::string(kTableauId)},
      {"kernel", std::string(kernels::active_kernels().name)},
  };
  if (options.error_bars) out.run_metadata["resample_samples_per_cell_side"] = resample.samples_per_cell_side;
  return out;
}

ExponentialFit fit_exponential(std::span<const double> times, std::span<const double> values) {
  if (times.size() != values.size()) throw ConfigError("fit: times and values differ in length");
  if (times.size() < 2) throw ConfigError("fit: need at least two points");
  const auto n = static_cast<double>(times.size());
  double st = 0, sy = 0;
  std::vector<double> y(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!(values[k] > 0) || !std::isfinite(values[k])) throw DomainError("fit: hbar values must be positive");
    y[k] = std::log(values[k]);
    st += times[k];
    sy += y[k];
  }
  const double tm = st / n, ym = sy / n;
  double stt = 0, sty = 0, syy = 0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    const double dt = times[k] - tm, dy = y[k] - ym;
    stt += dt * dt;
    sty += dt * dy;
    syy += dy * dy;
  }
  if (!(stt > 0)) throw ConfigError("fit: times are all equal");

  ExponentialFit fit;
  fit.slope = sty / stt;
  fit.intercept = ym - fit.slope * tm;
  double ss_res = 0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    const double r = y[k] - (fit.intercept + fit.slope * times[k]);
    ss_res += r * r;
  }
  fit.r_squared = syy > 0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 0.0;
  fit.degenerate = !(fit.slope < 0);
  fit.t_c = fit.degenerate ? std::numeric_limits<double>::infinity() : -1.0 / fit.slope;
  return fit;
}

ExponentialFit fit_exponential(const HSeries& series) { return fit_exponential(series.times, series.hbar_values); }

double tau_rough(double epsilon, double delta_e) {
  if (!(epsilon > 0) || !(delta_e > 0)) throw ConfigError("tau_rough needs epsilon > 0 and energy spread > 0");
  return 1.0 / (epsilon * delta_e * std::sqrt(delta_e));
}

CellGrid coarse_grain_function(const std::function<double(Position)>& f, const CoarseGrainSpec& spec) {
  require_non_overlapping(spec);
  const std::size_t k = spec.cells_per_side();
  const auto s = static_cast<std::size_t>(spec.samples_per_cell_side);
  const auto axis = cell_centered_axis(k * s);
  std::vector<double> field(axis.size() * axis.size());
  for (std::size_t j = 0; j < axis.size(); ++j)
    for (std::size_t i = 0; i < axis.size(); ++i) field[j * axis.size() + i] = f({axis[i], axis[j]});
  return coarse_grain(field, {axis.size(), axis.size()}, spec);
}

namespace {

struct LocalField {
  double psi2;
  double vx, vy;
  double gx, gy;  // grad |psi|^2
};

LocalField local_field(const kernels::KernelTable& k, const kernels::PackedModes& pm, Position q) {
  kernels::PointField f;
  k.point(pm, q.x, q.y, 0.0, f);
  const double pr = f.psi.real(), pi = f.psi.imag();
  LocalField out{};
  out.psi2 = pr * pr + pi * pi;
  out.gx = 2 * (pr * f.dpsi_dx.real() + pi * f.dpsi_dx.imag());
  out.gy = 2 * (pr * f.dpsi_dy.real() + pi * f.dpsi_dy.imag());
  if (out.psi2 > 0) {
    out.vx = (pr * f.dpsi_dx.imag() - pi * f.dpsi_dx.real()) / out.psi2;
    out.vy = (pr * f.dpsi_dy.imag() - pi * f.dpsi_dy.real()) / out.psi2;
  }
  return out;
}

}  // namespace

CurvatureTau tau_curvature(const ModeSuperposition& state, const InitialDensity& rho0, double epsilon,
                           GridDims fine_grid, const CurvatureOptions& options) {
  if (fine_grid.nx < 2 || fine_grid.ny < 2) throw ConfigError("tau_curvature needs at least a 2x2 grid");
  const CoarseGrainSpec spec{epsilon, CoarseMode::NonOverlapping, 0.12, options.samples_per_cell_side};
  require_non_overlapping(spec);

  const auto& kt = kernels::active_kernels();
  const auto& pm = state.packed();
  const auto xs = cell_centered_axis(fine_grid.nx);
  const auto ys = cell_centered_axis(fine_grid.ny);
  const std::vector<double> psi2 = density_grid(state, xs, ys, 0.0);
  double psi2_max = 0;
  for (double v : psi2) psi2_max = std::max(psi2_max, v);
  const double cut = options.node_exclusion * psi2_max;
  const double h = options.fd_step;

  auto f0_at = [&](Position q, const LocalField& lf) { return rho0.density(q) / lf.psi2; };

  // D = v0 . grad f0; nullopt-like NaN when undefined.
  auto d_at = [&](Position q) {
    const LocalField lf = local_field(kt, pm, q);
    if (!(lf.psi2 >= options.node_floor)) return std::numeric_limits<double>::quiet_NaN();
    double fx, fy;
    if (rho0.gradient) {
      const auto gr = rho0.gradient(q);
      const double f0 = f0_at(q, lf);
      fx = (gr[0] - f0 * lf.gx) / lf.psi2;
      fy = (gr[1] - f0 * lf.gy) / lf.psi2;
    } else {
      auto f = [&](Position p) {
        const LocalField l = local_field(kt, pm, p);
        return l.psi2 >= options.node_floor ? f0_at(p, l) : std::numeric_limits<double>::quiet_NaN();
      };
      fx = (-f({q.x + 2 * h, q.y}) + 8 * f({q.x + h, q.y}) - 8 * f({q.x - h, q.y}) + f({q.x - 2 * h, q.y})) / (12 * h);
      fy = (-f({q.x, q.y + 2 * h}) + 8 * f({q.x, q.y + h}) - 8 * f({q.x, q.y - h}) + f({q.x, q.y - 2 * h})) / (12 * h);
    }
    return lf.vx * fx + lf.vy * fy;
  };

  std::vector<double> row_sum(fine_grid.ny, 0.0);
  std::vector<std::size_t> row_excluded(fine_grid.ny, 0);
  parallel_for(fine_grid.ny, 0, [&](std::size_t j) {
    double sum = 0;
    std::size_t excluded = 0;
    for (std::size_t i = 0; i < fine_grid.nx; ++i) {
      const double p2 = psi2[j * fine_grid.nx + i];
      const Position q{xs[i], ys[j]};
      const double r0 = p2 >= cut && p2 > 0 ? rho0.density(q) : 0.0;
      if (!(r0 > 0)) {
        ++excluded;
        continue;
      }
      const double dx = (-d_at({q.x + 2 * h, q.y}) + 8 * d_at({q.x + h, q.y}) - 8 * d_at({q.x - h, q.y}) +
                         d_at({q.x - 2 * h, q.y})) / (12 * h);
      const double dy = (-d_at({q.x, q.y + 2 * h}) + 8 * d_at({q.x, q.y + h}) - 8 * d_at({q.x, q.y - h}) +
                         d_at({q.x, q.y - 2 * h})) / (12 * h);
      const double term = p2 * p2 / r0 * (dx * dx + dy * dy);  // |psi0|^2 / f0 = |psi0|^4 / rho0
      if (!std::isfinite(term)) {
        ++excluded;
        continue;
      }
      sum += term;
    }
    row_sum[j] = sum;
    row_excluded[j] = excluded;
  });

  double total = 0;
  std::size_t excluded = 0;
  for (std::size_t j = 0; j < fine_grid.ny; ++j) {
    total += row_sum[j];
    excluded += row_excluded[j];
  }

  CurvatureTau out;
  out.excluded_fraction = static_cast<double>(excluded) / static_cast<double>(fine_grid.size());
  if (out.excluded_fraction > options.max_excluded_fraction)
    throw SingularField("tau_curvature: " + std::to_string(out.excluded_fraction * 100) +
                        "% of the grid lies at nodes of psi0 or of rho0");
  out.I_value = total * (kBoxSide / static_cast<double>(fine_grid.nx)) * (kBoxSide / static_cast<double>(fine_grid.ny));
  out.hbar0 = hbar(coarse_grain_function(rho0.density, spec), coarse_grain_psi2(state, 0.0, spec));
  out.d2h_check = -epsilon * epsilon * out.I_value / 12.0;
  out.tau = out.I_value > 0 ? std::sqrt(12.0 * out.hbar0 / out.I_value) / epsilon
                            : std::numeric_limits<double>::infinity();
  return out;
}

double first_derivative_check(const ModeSuperposition& state, const InitialDensity& rho0, const CoarseGrainSpec& spec,
                              const IntegratorConfig& config, double dt, unsigned workers) {
  if (!(dt > 0)) throw ConfigError("derivative step must be positive");
  const double plus = hbar_at(state, rho0, dt, spec, config, workers);
  const double minus = hbar_at(state, rho0, -dt, spec, config, workers);
  return (plus - minus) / (2 * dt);
}

ReversalResult reversal_experiment(const ModeSuperposition& state, const InitialDensity& rho0, double t_r,
                                   HSeriesOptions options, const std::function<void(const HSeriesSample&)>& observer) {
  if (!(t_r > 0)) throw ConfigError("reversal time must be positive");
  require_non_overlapping(options.spec);
  if (!(options.horizon > 0)) options.horizon = t_r;

  // The t' = 0 density is evaluated through its ratio function, so the
  // reversed setup does not need a precomputed lattice at t_r.
  const ReversedExperiment ex = reverse_setup(state, rho0, DensityLattice{}, t_r, options.integrator);

  ReversalResult out;
  out.t_r = t_r;
  bool have_final = false;
  out.series = hseries(ex.state, ex.rho0, options, [&](const HSeriesSample& s) {
    if (std::abs(s.time - t_r) <= 1e-9 * t_r) {
      out.final_rho_cells = s.rho_cells;
      have_final = true;
    }
    if (observer) observer(s);
  });
  if (!have_final) {
    const std::size_t side = options.spec.lattice_side();
    const OriginMap origins = backtrack_lattice(ex.state, t_r, {side, side}, options.integrator, options.workers);
    out.final_rho_cells =
        coarse_grain(density_at(ex.state, ex.rho0, origins, options.integrator.node_floor, options.workers), options.spec);
  }
  out.fit = fit_exponential(out.series);
  out.target_cells = coarse_grain_function(rho0.density, options.spec);

  out.cell_relative_error.resize(out.target_cells.values.size());
  for (std::size_t k = 0; k < out.cell_relative_error.size(); ++k) {
    const double target = out.target_cells.values[k];
    out.cell_relative_error[k] = target > 0 ? std::abs(out.final_rho_cells.values[k] - target) / target
                                            : std::numeric_limits<double>::infinity();
  }
  std::vector<double> sorted = out.cell_relative_error;
  const std::size_t mid = sorted.size() / 2;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(mid), sorted.end());
  out.median_relative_error = sorted[mid];
  if (sorted.size() % 2 == 0) {
    const double lower = *std::max_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(mid));
    out.median_relative_error = 0.5 * (out.median_relative_error + lower);
  }
  return out;
}

nlohmann::json RelaxationReport::to_json() const {
  auto num = [](double v) -> nlohmann::json {
    if (std::isfinite(v)) return v;
    return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
  };
  nlohmann::json doc = {
      {"t_c", num(fit.t_c)},
      {"slope", fit.slope},
      {"intercept", fit.intercept},
      {"r_squared", fit.r_squared},
      {"degenerate_fit", fit.degenerate},
      {"tau_rough", num(tau_rough)},
      {"energy_spread", energy_spread},
      {"epsilon", epsilon},
      {"hbar0", hbar0},
  };
  if (has_tau_curvature) {
    doc["tau_curvature"] = num(tau_curvature);
    doc["I"] = I_value;
  }
  return doc;
}

}  // namespace pilotwave
