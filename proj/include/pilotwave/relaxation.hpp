#pragma once

#include <functional>
#include <vector>

#include <json.hpp>

#include "pilotwave/coarsegrain.hpp"
#include "pilotwave/integrator.hpp"
#include "pilotwave/transport.hpp"

namespace pilotwave {

struct HSeriesOptions {
  double horizon = 2 * kPi;
  double interval = kPi / 4;
  CoarseGrainSpec spec;  // must be non-overlapping
  IntegratorConfig integrator;
  bool error_bars = true;
  // Sub-lattice used for the error-bar rerun; 0 means samples_per_cell_side + 2.
  int resample_samples_per_cell_side = 0;
  unsigned workers = 0;
};

struct HSeriesSample {
  double time;
  const DensityLattice& lattice;
  const CellGrid& rho_cells;
  const CellGrid& psi2_cells;
  const OriginMap& origins;
};

struct HSeries {
  std::vector<double> times;
  std::vector<double> hbar_values;
  std::vector<double> error_bars;      // |hbar(resampled) - hbar|, zero when disabled
  std::vector<double> hbar_resampled;  // empty when error bars are disabled
  std::vector<double> non_validated_fraction;
  std::vector<double> flagged_fraction;
  nlohmann::json run_metadata;
};

[[nodiscard]] std::vector<double> sample_times(double horizon, double interval);

// For each sample time: backtrack the lattice, transport f, coarse-grain rho
// and the analytic |psi|^2 on the same sub-lattice, evaluate hbar. The
// optional observer sees each primary-resolution sample (for dumps).
[[nodiscard]] HSeries hseries(const ModeSuperposition& state, const InitialDensity& rho0,
                              const HSeriesOptions& options,
                              const std::function<void(const HSeriesSample&)>& observer = {});

// hbar at a single time on the given spec (one backtracking run).
[[nodiscard]] double hbar_at(const ModeSuperposition& state, const InitialDensity& rho0, double t,
                             const CoarseGrainSpec& spec, const IntegratorConfig& config, unsigned workers = 0);

struct ExponentialFit {
  double t_c = 0;  // -1 / slope, +inf when degenerate
  double slope = 0;
  double intercept = 0;  // ln hbar0 of the fitted line
  double r_squared = 0;
  bool degenerate = false;  // slope >= 0
};

// Ordinary least squares on (t, ln hbar). All values must be positive.
[[nodiscard]] ExponentialFit fit_exponential(std::span<const double> times, std::span<const double> values);
[[nodiscard]] ExponentialFit fit_exponential(const HSeries& series);

// (1 / eps) * dE^(-3/2) in units hbar = m = 1.
[[nodiscard]] double tau_rough(double epsilon, double delta_e);

struct CurvatureOptions {
  double node_exclusion = 1e-6;  // relative to max |psi0|^2 on the grid
  double fd_step = kPi / 4096;
  int samples_per_cell_side = 25;  // for hbar0
  double node_floor = kDefaultNodeFloor;
  double max_excluded_fraction = 0.01;
};

struct CurvatureTau {
  double tau = 0;  // +inf when I == 0
  double I_value = 0;
  double hbar0 = 0;
  double d2h_check = 0;  // -eps^2 I / 12, leading-order (d^2 hbar / dt^2) at t = 0
  double excluded_fraction = 0;
};

// Leading-order curvature timescale tau = (1/eps) sqrt(12 hbar0 / I), with
// I = integral of (|psi0|^2 / f0) |grad(v0 . grad f0)|^2 by midpoint
// quadrature on fine_grid. Throws SingularField if more than 1% of the grid
// is excluded near nodes.
[[nodiscard]] CurvatureTau tau_curvature(const ModeSuperposition& state, const InitialDensity& rho0, double epsilon,
                                         GridDims fine_grid, const CurvatureOptions& options = {});

// Central difference (hbar(dt) - hbar(-dt)) / (2 dt).
[[nodiscard]] double first_derivative_check(const ModeSuperposition& state, const InitialDensity& rho0,
                                            const CoarseGrainSpec& spec, const IntegratorConfig& config,
                                            double dt = 0.01, unsigned workers = 0);

// Cell means of an analytic density on each cell's sub-lattice.
[[nodiscard]] CellGrid coarse_grain_function(const std::function<double(Position)>& f, const CoarseGrainSpec& spec);

// Time-reversed run: psi' = psi*(., t_r) and rho' = rho(., t_r) at t' = 0,
// evolved to t' = t_r where rho' should return to rho0.
struct ReversalResult {
  double t_r = 0;
  HSeries series;
  ExponentialFit fit;
  CellGrid final_rho_cells;  // rho' at t' = t_r
  CellGrid target_cells;     // coarse-grained rho0
  std::vector<double> cell_relative_error;
  double median_relative_error = 0;
};

// The series runs from 0 to options.horizon (t_r when horizon <= 0).
[[nodiscard]] ReversalResult reversal_experiment(const ModeSuperposition& state, const InitialDensity& rho0, double t_r,
                                                 HSeriesOptions options,
                                                 const std::function<void(const HSeriesSample&)>& observer = {});

struct RelaxationReport {
  ExponentialFit fit;
  double tau_rough = 0;
  double tau_curvature = 0;  // 0 when not computed
  bool has_tau_curvature = false;
  double hbar0 = 0;
  double I_value = 0;
  double energy_spread = 0;
  double epsilon = 0;

  [[nodiscard]] nlohmann::json to_json() const;
};

}  // namespace pilotwave
