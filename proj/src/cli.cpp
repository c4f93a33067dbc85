#include "pilotwave/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "pilotwave/coarsegrain.hpp"
#include "pilotwave/errors.hpp"
#include "pilotwave/integrator.hpp"
#include "pilotwave/io.hpp"
#include "pilotwave/kernels.hpp"
#include "pilotwave/literals.hpp"
#include "pilotwave/relaxation.hpp"
#include "pilotwave/sampling.hpp"
#include "pilotwave/transport.hpp"
#include "pilotwave/wavefield.hpp"

#ifndef PILOTWAVE_DEFAULT_STATE_FILE
#define PILOTWAVE_DEFAULT_STATE_FILE ""
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace pilotwave {
namespace {

// Flags shared by every subcommand. Reals are kept as text so that "pi/32"
// style literals resolve exactly.
struct Options {
  std::string config_file;
  std::string state_file;
  std::string rho0 = "eq15";
  std::string out;
  unsigned workers = 0;
  std::string kernel = "auto";
  std::uint64_t seed = 1;
  bool quiet = false;

  std::string delta_start = "1e-6";
  std::string delta_min = "1e-12";
  std::int64_t max_steps = IntegratorConfig{}.max_steps;
  std::string node_floor = "1e-12";

  // trajectory / diverge
  std::string x, y, t0 = "0", t1 = "4pi", delta;
  std::size_t count = 1;
  std::size_t samples = 0;
  std::size_t pairs = 20;
  std::string separation = "0.005";
  std::string a, b;

  // density / hseries / reverse / tau
  std::string time = "0";
  std::string grid;
  std::string epsilon;
  std::string coarse = "non-overlapping";
  std::string shift = "0.12";
  int samples_per_cell = 0;
  int resample_per_cell = 0;
  std::string horizon;
  std::string interval = "pi/4";
  bool no_error_bars = false;
  bool dump_cells = false;
  std::size_t curvature_grid = 0;
  std::string t_r = "pi";
  std::string energy_spread = "4";
};

void log_line(const Options& o, const std::string& msg) {
  if (!o.quiet) std::cerr << msg << '\n';
}

std::string fmt(double v) { return format_double(v); }

ModeSuperposition load_state(const Options& o) {
  if (!o.state_file.empty()) return ModeSuperposition::load(o.state_file);
  const fs::path def = PILOTWAVE_DEFAULT_STATE_FILE;
  if (!def.empty() && fs::exists(def)) return ModeSuperposition::load(def.string());
  return ModeSuperposition::box16();
}

InitialDensity load_rho0(const std::string& which, const ModeSuperposition& state) {
  if (which == "eq15" || which == "ground") return InitialDensity::ground_state();
  if (which == "equilibrium") return InitialDensity::equilibrium(state);
  if (!fs::exists(which)) throw ConfigError("--rho0 must be equilibrium, eq15 or a mode-table file: " + which);
  return InitialDensity::from_modes(fs::path(which).filename().string(), ModeSuperposition::load(which));
}

IntegratorConfig integrator_config(const Options& o) {
  IntegratorConfig c;
  c.delta_start = parse_real(o.delta_start);
  c.delta_min = parse_real(o.delta_min);
  c.max_steps = o.max_steps;
  c.node_floor = parse_real(o.node_floor);
  c.validate();
  return c;
}

Position parse_point(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw ConfigError("expected a point 'x,y', got '" + text + "'");
  const Position p{parse_real(text.substr(0, comma)), parse_real(text.substr(comma + 1))};
  if (!in_box(p)) throw ConfigError("point '" + text + "' lies outside the box");
  return p;
}

// Output directory plus manifest bookkeeping.
class Outputs {
 public:
  Outputs(const Options& o, std::string command, json config)
      : dir_(o.out.empty() ? default_dir() : fs::path(o.out)), manifest_(std::move(command), std::move(config)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw ConfigError("cannot create output directory " + dir_.string() + ": " + ec.message());
  }

  fs::path path(const std::string& name) const { return dir_ / name; }

  void csv(const std::string& name, const CsvWriter& w) {
    w.save(path(name));
    manifest_.add_output(path(name));
  }
  void matrix(const std::string& name, std::span<const double> values, std::size_t cols) {
    write_matrix(path(name), values, cols);
    manifest_.add_output(path(name));
  }
  void json_file(const std::string& name, const json& doc) {
    write_json(path(name), doc);
    manifest_.add_output(path(name));
  }
  RunManifest& manifest() { return manifest_; }

  void finish() {
    manifest_.set("tableau", std::string(kTableauId));
    manifest_.set("kernel", std::string(kernels::active_kernels().name));
    manifest_.save(path("manifest.json"));
  }

 private:
  static fs::path default_dir() {
    const char* env = std::getenv("PILOTWAVE_OUTPUT_DIR");
    return env && *env ? fs::path(env) : fs::path("pilotwave_out");
  }

  fs::path dir_;
  RunManifest manifest_;
};

json base_config(const Options& o, const ModeSuperposition& state) {
  return {{"state_sha256", state.hash()},
          {"state_file", o.state_file.empty() ? std::string(PILOTWAVE_DEFAULT_STATE_FILE) : o.state_file},
          {"seed", o.seed}};
}

CsvWriter cell_csv(const CellGrid& g) {
  CsvWriter w({"cx", "cy", "value"});
  for (std::size_t k = 0; k < g.values.size(); ++k) w.row({g.centers[k].x, g.centers[k].y, g.values[k]});
  return w;
}

// ---------------------------------------------------------------- trajectory

CsvWriter trajectory_csv(const TrajectoryResult& r) {
  CsvWriter w({"t", "x", "y", "h", "delta_used"});
  for (const TrajectorySample& s : r.samples) w.row({s.t, s.pos.x, s.pos.y, s.h, r.delta_used});
  return w;
}

int run_trajectory(const Options& o) {
  const ModeSuperposition state = load_state(o);
  const IntegratorConfig cfg = integrator_config(o);
  const double t0 = parse_real(o.t0), t1 = parse_real(o.t1);
  if (t0 == t1) throw ConfigError("--t0 and --t1 must differ");

  std::vector<Position> starts;
  if (!o.x.empty() || !o.y.empty()) {
    if (o.x.empty() || o.y.empty()) throw ConfigError("--x and --y go together");
    starts.push_back(parse_point(o.x + "," + o.y));
  } else {
    if (o.count == 0) throw ConfigError("--count must be positive");
    Rng rng(o.seed);
    starts = born_samples(state, t0, o.count, rng);
  }

  Sampling sampling = Sampling::every_step();
  if (o.samples >= 2) {
    std::vector<double> times(o.samples);
    for (std::size_t k = 0; k < o.samples; ++k)
      times[k] = t0 + (t1 - t0) * static_cast<double>(k) / static_cast<double>(o.samples - 1);
    sampling = Sampling::at(std::move(times));
  }

  json config = base_config(o, state);
  config.update({{"t0", t0}, {"t1", t1}, {"integrator", cfg.to_json()}, {"samples", o.samples}});
  if (!o.delta.empty()) config["fixed_delta"] = parse_real(o.delta);
  Outputs out(o, "trajectory", config);

  json summary = json::array();
  for (std::size_t k = 0; k < starts.size(); ++k) {
    const TrajectoryResult r = o.delta.empty() ? integrate_validated(state, starts[k], t0, t1, cfg, sampling)
                                               : integrate(state, starts[k], t0, t1, parse_real(o.delta), cfg, sampling);
    char name[64];
    std::snprintf(name, sizeof name, starts.size() == 1 ? "trajectory.csv" : "trajectory_%03zu.csv", k);
    out.csv(name, trajectory_csv(r));
    summary.push_back({{"file", name},
                       {"start", {starts[k].x, starts[k].y}},
                       {"end", {r.endpoint.x, r.endpoint.y}},
                       {"status", std::string(to_string(r.status))},
                       {"has_endpoint", r.has_endpoint},
                       {"delta_used", r.delta_used},
                       {"steps", r.steps_taken}});
    log_line(o, "trajectory " + std::to_string(k) + ": " + std::string(to_string(r.status)) + ", " +
                    std::to_string(r.steps_taken) + " steps");
  }
  out.json_file("trajectories.json", {{"trajectories", summary}});
  out.finish();
  return kExitOk;
}

// ------------------------------------------------------------------ diverge

int run_diverge(const Options& o) {
  const ModeSuperposition state = load_state(o);
  const IntegratorConfig cfg = integrator_config(o);
  const double horizon = parse_real(o.horizon.empty() ? "4pi" : o.horizon);
  const std::size_t samples = o.samples >= 2 ? o.samples : 201;

  std::vector<PointPair> pairs;
  if (!o.a.empty() || !o.b.empty()) {
    if (o.a.empty() || o.b.empty()) throw ConfigError("--a and --b go together");
    pairs.push_back({parse_point(o.a), parse_point(o.b)});
  } else {
    if (o.pairs == 0) throw ConfigError("--pairs must be positive");
    Rng rng(o.seed);
    const double sep = parse_real(o.separation);
    for (std::size_t k = 0; k < o.pairs; ++k) pairs.push_back(random_pair(rng, sep));
  }

  json config = base_config(o, state);
  config.update({{"horizon", horizon}, {"samples", samples}, {"integrator", cfg.to_json()}});
  Outputs out(o, "diverge", config);

  CsvWriter csv({"pair", "t", "separation"});
  json list = json::array();
  std::vector<double> finals;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    json entry = {{"pair", k}, {"a", {pairs[k].a.x, pairs[k].a.y}}, {"b", {pairs[k].b.x, pairs[k].b.y}}};
    try {
      const DivergenceSeries s = pair_divergence(state, pairs[k].a, pairs[k].b, horizon, samples, cfg);
      for (std::size_t i = 0; i < s.times.size(); ++i)
        csv.row({static_cast<double>(k), s.times[i], s.separations[i]});
      entry["initial_separation"] = s.separations.front();
      entry["final_separation"] = s.separations.back();
      finals.push_back(s.separations.back());
    } catch (const NumericalError& e) {
      entry["error"] = e.what();
    }
    list.push_back(entry);
  }
  if (finals.empty()) throw NumericalError("no trajectory pair could be integrated");
  std::vector<double> sorted = finals;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t m = sorted.size();
  const double median = m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);

  out.csv("divergence.csv", csv);
  out.json_file("divergence.json", {{"pairs", list}, {"median_final_separation", median}, {"horizon", horizon}});
  out.finish();
  log_line(o, "median final separation " + fmt(median));
  return kExitOk;
}

// ------------------------------------------------------------------ density

CoarseGrainSpec spec_from(const Options& o) {
  CoarseGrainSpec spec;
  spec.cell_side = parse_real(o.epsilon.empty() ? "pi/32" : o.epsilon);
  spec.mode = parse_coarse_mode(o.coarse);
  spec.overlap_shift_fraction = parse_real(o.shift);
  spec.validate();
  return spec;
}

int run_density(const Options& o) {
  const ModeSuperposition state = load_state(o);
  const InitialDensity rho0 = load_rho0(o.rho0, state);
  const IntegratorConfig cfg = integrator_config(o);
  const double t = parse_real(o.time);
  const auto [nx, ny] = parse_grid(o.grid.empty() ? "200x200" : o.grid);
  const GridDims dims{nx, ny};

  json config = base_config(o, state);
  config.update({{"time", t}, {"grid", {nx, ny}}, {"rho0", rho0.name}, {"integrator", cfg.to_json()}});
  std::optional<CoarseGrainSpec> spec;
  if (!o.epsilon.empty()) {
    spec = spec_from(o);
    if (spec->mode == CoarseMode::NonOverlapping && nx % spec->cells_per_side() == 0)
      spec->samples_per_cell_side = static_cast<int>(nx / spec->cells_per_side());
    config["coarse_graining"] = spec->to_json();
  }
  Outputs out(o, "density", config);

  const OriginMap origins = backtrack_lattice(state, t, dims, cfg, o.workers);
  const DensityLattice lat = density_at(state, rho0, origins, cfg.node_floor, o.workers);

  CsvWriter csv({"x", "y", "f", "rho", "flagged"});
  for (std::size_t k = 0; k < lat.lattice.size(); ++k)
    csv.row({lat.lattice[k].x, lat.lattice[k].y, lat.f_values[k], lat.rho_values[k], static_cast<double>(lat.flagged[k])});
  out.csv("density.csv", csv);

  const std::vector<double> psi2 = density_grid(state, cell_centered_axis(nx), cell_centered_axis(ny), t);
  out.matrix("rho.txt", lat.rho_values, nx);
  out.matrix("psi2.txt", psi2, nx);
  out.matrix("f.txt", lat.f_values, nx);

  json sidecar = {{"time", t},
                  {"grid", {nx, ny}},
                  {"state_sha256", state.hash()},
                  {"rho0", rho0.name},
                  {"integrator", cfg.to_json()},
                  {"tableau", std::string(kTableauId)},
                  {"non_validated", origins.non_validated()},
                  {"fallback_origins", origins.fallback_count()},
                  {"flagged", lat.flagged_count()},
                  {"h_transported", h_transported(lat)}};

  if (spec) {
    const CellGrid rho_cells = coarse_grain(lat, *spec);
    const CellGrid psi_cells = coarse_grain(psi2, dims, *spec);
    out.csv("cells_rho.csv", cell_csv(rho_cells));
    out.csv("cells_psi2.csv", cell_csv(psi_cells));
    out.matrix("cells_rho.txt", rho_cells.values, rho_cells.dims.nx);
    out.matrix("cells_psi2.txt", psi_cells.values, psi_cells.dims.nx);
    if (spec->mode == CoarseMode::NonOverlapping) sidecar["hbar"] = hbar(rho_cells, psi_cells);
  }
  out.json_file("density.json", sidecar);
  out.finish();
  log_line(o, "density: " + std::to_string(origins.non_validated()) + " non-validated, " +
                  std::to_string(lat.flagged_count()) + " flagged of " + std::to_string(dims.size()));
  return kExitOk;
}

// ------------------------------------------------------------------ hseries

// Lattice per cell side: explicit --samples-per-cell, else derived from
// --grid (rounded up so the lattice tiles the cells), else 25.
int samples_per_cell(const Options& o, const CoarseGrainSpec& spec, json& config) {
  if (o.samples_per_cell > 0) return o.samples_per_cell;
  if (o.grid.empty()) return 25;
  const auto [nx, ny] = parse_grid(o.grid);
  if (nx != ny) throw ConfigError("hseries needs a square --grid");
  const std::size_t cells = spec.cells_per_side();
  const std::size_t s = std::max<std::size_t>(1, (nx + cells - 1) / cells);
  if (s * cells != nx) config["grid_rounded_from"] = nx;
  return static_cast<int>(s);
}

HSeriesOptions series_options(const Options& o, json& config, double default_horizon) {
  HSeriesOptions so;
  so.spec = spec_from(o);
  if (so.spec.mode != CoarseMode::NonOverlapping) throw ConfigError("hbar needs --coarse non-overlapping");
  so.spec.samples_per_cell_side = samples_per_cell(o, so.spec, config);
  so.horizon = o.horizon.empty() ? default_horizon : parse_real(o.horizon);
  so.interval = parse_real(o.interval);
  so.integrator = integrator_config(o);
  so.error_bars = !o.no_error_bars;
  so.resample_samples_per_cell_side = o.resample_per_cell;
  so.workers = o.workers;
  config.update({{"coarse_graining", so.spec.to_json()},
                 {"lattice_side", so.spec.lattice_side()},
                 {"horizon", so.horizon},
                 {"interval", so.interval},
                 {"error_bars", so.error_bars},
                 {"integrator", so.integrator.to_json()}});
  return so;
}

CsvWriter series_csv(const HSeries& s) {
  CsvWriter w({"t", "hbar", "err"});
  for (std::size_t k = 0; k < s.times.size(); ++k) w.row({s.times[k], s.hbar_values[k], s.error_bars[k]});
  return w;
}

std::function<void(const HSeriesSample&)> sample_observer(const Options& o, Outputs& out, const std::string& prefix) {
  return [&o, &out, prefix](const HSeriesSample& s) {
    log_line(o, prefix + " t=" + fmt(s.time) + " hbar=" + fmt(hbar(s.rho_cells, s.psi2_cells)) + " non-validated=" +
                    std::to_string(s.origins.non_validated()));
    if (!o.dump_cells) return;
    const long k = std::lround(s.time / parse_real(o.interval));
    char name[64];
    std::snprintf(name, sizeof name, "%s_cells_%02ld_rho.csv", prefix.c_str(), k);
    out.csv(name, cell_csv(s.rho_cells));
    std::snprintf(name, sizeof name, "%s_cells_%02ld_psi2.csv", prefix.c_str(), k);
    out.csv(name, cell_csv(s.psi2_cells));
    std::snprintf(name, sizeof name, "%s_rho_%02ld.txt", prefix.c_str(), k);
    out.matrix(name, s.lattice.rho_values, s.lattice.dims.nx);
  };
}

json series_json(const HSeries& s) {
  return {{"times", s.times},
          {"hbar", s.hbar_values},
          {"err", s.error_bars},
          {"hbar_resampled", s.hbar_resampled},
          {"non_validated_fraction", s.non_validated_fraction},
          {"flagged_fraction", s.flagged_fraction},
          {"metadata", s.run_metadata}};
}

int run_hseries(const Options& o) {
  const ModeSuperposition state = load_state(o);
  const InitialDensity rho0 = load_rho0(o.rho0, state);
  json config = base_config(o, state);
  const HSeriesOptions so = series_options(o, config, 2 * kPi);
  config["rho0"] = rho0.name;
  Outputs out(o, "hseries", config);

  const HSeries series = hseries(state, rho0, so, sample_observer(o, out, "hseries"));

  RelaxationReport report;
  report.fit = fit_exponential(series);
  report.epsilon = so.spec.cell_side;
  report.energy_spread = energy_spread(state);
  report.tau_rough = tau_rough(report.epsilon, report.energy_spread);
  report.hbar0 = series.hbar_values.front();
  if (o.curvature_grid > 0) {
    const CurvatureTau tc = tau_curvature(state, rho0, so.spec.cell_side, {o.curvature_grid, o.curvature_grid});
    report.has_tau_curvature = true;
    report.tau_curvature = tc.tau;
    report.I_value = tc.I_value;
  }
  json doc = report.to_json();
  doc["series"] = series_json(series);

  out.csv("hseries.csv", series_csv(series));
  out.json_file("hseries_report.json", doc);
  out.finish();
  log_line(o, "t_c = " + fmt(report.fit.t_c) + ", r^2 = " + fmt(report.fit.r_squared));
  return kExitOk;
}

// ------------------------------------------------------------------ reverse

int run_reverse(const Options& o) {
  const ModeSuperposition state = load_state(o);
  const InitialDensity rho0 = load_rho0(o.rho0, state);
  const double t_r = parse_real(o.t_r);
  json config = base_config(o, state);
  HSeriesOptions so = series_options(o, config, t_r);
  config.update({{"rho0", rho0.name}, {"t_r", t_r}});
  Outputs out(o, "reverse", config);

  const ReversalResult r = reversal_experiment(state, rho0, t_r, so, sample_observer(o, out, "reverse"));

  CsvWriter cells({"cx", "cy", "value"});
  for (std::size_t k = 0; k < r.cell_relative_error.size(); ++k)
    cells.row({r.target_cells.centers[k].x, r.target_cells.centers[k].y, r.cell_relative_error[k]});
  out.csv("reverse_hseries.csv", series_csv(r.series));
  out.csv("reverse_cells_rho.csv", cell_csv(r.final_rho_cells));
  out.csv("reverse_cells_target.csv", cell_csv(r.target_cells));
  out.csv("reverse_cells_relerr.csv", cells);
  out.json_file("reverse_report.json", {{"t_r", t_r},
                                        {"median_relative_error", r.median_relative_error},
                                        {"slope", r.fit.slope},
                                        {"r_squared", r.fit.r_squared},
                                        {"reversed_state", reversed_state(state, t_r).to_json()},
                                        {"series", series_json(r.series)}});
  out.finish();
  log_line(o, "median cell relative error " + fmt(r.median_relative_error) + ", slope " + fmt(r.fit.slope));
  return kExitOk;
}

// ---------------------------------------------------------------------- tau

int run_tau(const Options& o) {
  const ModeSuperposition state = load_state(o);
  const double eps = parse_real(o.epsilon.empty() ? "pi/32" : o.epsilon);
  const double exact = energy_spread(state);
  const double de = o.energy_spread == "exact" ? exact : parse_real(o.energy_spread);
  json doc = {{"epsilon", eps},
              {"energy_spread", de},
              {"energy_spread_exact", exact},
              {"tau_rough", tau_rough(eps, de)},
              {"tau_rough_exact_spread", tau_rough(eps, exact)}};
  json config = base_config(o, state);
  config.update({{"epsilon", eps}, {"energy_spread", de}, {"curvature_grid", o.curvature_grid}});

  if (o.curvature_grid > 0) {
    const InitialDensity rho0 = load_rho0(o.rho0, state);
    const CurvatureTau tc = tau_curvature(state, rho0, eps, {o.curvature_grid, o.curvature_grid});
    config["rho0"] = rho0.name;
    doc.update({{"tau_curvature", std::isfinite(tc.tau) ? json(tc.tau) : json("inf")},
                {"I", tc.I_value},
                {"hbar0", tc.hbar0},
                {"d2hbar_dt2_at_0", tc.d2h_check},
                {"excluded_fraction", tc.excluded_fraction}});
  }
  Outputs out(o, "tau", config);
  out.json_file("tau.json", doc);
  out.finish();
  std::cout << doc.dump(2) << '\n';
  return kExitOk;
}

// ----------------------------------------------------------------- selftest

int run_selftest(const Options& o) {
  const ModeSuperposition state = ModeSuperposition::box16();
  const IntegratorConfig cfg;
  struct Check {
    std::string name;
    std::function<bool(std::string&)> fn;
  };
  std::vector<Check> checks = {
      {"energy spread of the 16-mode state",
       [&](std::string& d) {
         const double de = energy_spread(state);
         d = fmt(de);
         return std::abs(de - std::sqrt(16.125)) < 1e-12;
       }},
      {"psi periodic in 4pi",
       [&](std::string& d) {
         double worst = 0;
         for (double x : cell_centered_axis(16))
           for (double y : cell_centered_axis(16))
             worst = std::max(worst, std::abs(psi_at(state, {x, y}, 4 * kPi) - psi_at(state, {x, y}, 0.0)));
         d = fmt(worst);
         return worst < 1e-10;
       }},
      {"tau_rough(pi/32, 4) = 4/pi",
       [&](std::string& d) {
         const double t = tau_rough(kPi / 32, 4.0);
         d = fmt(t);
         return std::abs(t - 4 / kPi) < 1e-12;
       }},
      {"density at t = 0 equals the ground-state density",
       [&](std::string& d) {
         const InitialDensity rho0 = InitialDensity::ground_state();
         const OriginMap om = backtrack_lattice(state, 0.0, {24, 24}, cfg, o.workers);
         const DensityLattice lat = density_at(state, rho0, om, cfg.node_floor, o.workers);
         double worst = 0;
         for (std::size_t k = 0; k < lat.lattice.size(); ++k) {
           const double s = std::sin(lat.lattice[k].x) * std::sin(lat.lattice[k].y);
           worst = std::max(worst, std::abs(lat.rho_values[k] - 4 / (kPi * kPi) * s * s));
         }
         d = fmt(worst);
         return worst < 1e-12;
       }},
      {"equilibrium ratio stays 1 under transport",
       [&](std::string& d) {
         const InitialDensity rho0 = InitialDensity::equilibrium(state);
         const OriginMap om = backtrack_lattice(state, 0.25, {8, 8}, cfg, o.workers);
         const DensityLattice lat = density_at(state, rho0, om, cfg.node_floor, o.workers);
         double worst = 0;
         for (double f : lat.f_values) worst = std::max(worst, std::abs(f - 1));
         d = fmt(worst);
         return worst < 1e-9;
       }},
      {"hbar of identical grids is zero",
       [&](std::string& d) {
         CoarseGrainSpec spec;
         spec.cell_side = kPi / 8;
         spec.samples_per_cell_side = 4;
         const CellGrid g = coarse_grain_psi2(state, 0.3, spec);
         const double h = hbar(g, g);
         d = fmt(h);
         return h == 0.0;
       }},
      {"single eigenmode is stationary",
       [&](std::string& d) {
         const ModeSuperposition one({Mode{1, 1, 1.0, 0.3}});
         const TrajectoryResult r = integrate_validated(one, {1.0, 2.0}, 0.0, 3.0, cfg);
         const double moved = distance(r.endpoint, {1.0, 2.0});
         d = fmt(moved);
         return r.status == TrajectoryStatus::Validated && moved < 1e-12;
       }},
      {"symbolic literal pi/32",
       [&](std::string& d) {
         const double v = parse_real("pi/32");
         d = fmt(v);
         return v == kPi / 32;
       }},
  };
  if (const auto* avx = kernels::avx2_kernels()) {
    checks.push_back({"scalar and AVX2 kernels agree", [&, avx](std::string& d) {
                        Rng rng(o.seed);
                        double worst = 0;
                        for (int k = 0; k < 200; ++k) {
                          const Position q = uniform_point(rng);
                          kernels::PointField a, b;
                          kernels::scalar_kernels().point(state.packed(), q.x, q.y, 1.7 * k, a);
                          avx->point(state.packed(), q.x, q.y, 1.7 * k, b);
                          worst = std::max({worst, std::abs(a.psi - b.psi), std::abs(a.dpsi_dx - b.dpsi_dx),
                                            std::abs(a.dpsi_dy - b.dpsi_dy)});
                        }
                        d = fmt(worst);
                        return worst < 1e-12;
                      }});
  }

  int failed = 0;
  json results = json::array();
  for (const Check& c : checks) {
    std::string detail;
    bool ok = false;
    try {
      ok = c.fn(detail);
    } catch (const std::exception& e) {
      detail = e.what();
    }
    failed += ok ? 0 : 1;
    std::cout << (ok ? "PASS " : "FAIL ") << c.name << " (" << detail << ")\n";
    results.push_back({{"check", c.name}, {"pass", ok}, {"detail", detail}});
  }
  if (!o.out.empty() || std::getenv("PILOTWAVE_OUTPUT_DIR")) {
    Outputs out(o, "selftest", {{"kernel", std::string(kernels::active_kernels().name)}});
    out.json_file("selftest.json", {{"checks", results}});
    out.finish();
  }
  return failed == 0 ? kExitOk : kExitNumerical;
}

// ------------------------------------------------------------------ parsing

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config_file, "JSON run configuration; keys are flag names");
  sub->add_option("--state", o.state_file, "Mode table JSON (default: bundled 16-mode state)");
  sub->add_option("--rho0", o.rho0, "Initial density: equilibrium | eq15 | mode-table path");
  sub->add_option("--out", o.out, "Output directory (default: $PILOTWAVE_OUTPUT_DIR or ./pilotwave_out)");
  sub->add_option("--workers", o.workers, "Worker threads, 0 = hardware concurrency");
  sub->add_option("--kernel", o.kernel, "Field kernel: auto | scalar | avx2");
  sub->add_option("--seed", o.seed, "Seed for random probe points");
  sub->add_option("--delta-start", o.delta_start, "Loosest tolerance of the delta ladder");
  sub->add_option("--delta-min", o.delta_min, "Tightest tolerance of the delta ladder");
  sub->add_option("--max-steps", o.max_steps, "Attempted-step cap per integration");
  sub->add_option("--node-floor", o.node_floor, "|psi|^2 below which the velocity is undefined");
  sub->add_flag("--quiet", o.quiet, "No progress output on stderr");
}

void add_series(CLI::App* sub, Options& o) {
  sub->add_option("--epsilon", o.epsilon, "Cell side, e.g. pi/32");
  sub->add_option("--grid", o.grid, "Lattice, e.g. 400x400 (rounded up to tile the cells)");
  sub->add_option("--samples-per-cell", o.samples_per_cell, "Lattice points per cell side (overrides --grid)");
  sub->add_option("--resample-per-cell", o.resample_per_cell, "Error-bar lattice per cell side (default +2)");
  sub->add_option("--horizon", o.horizon, "Last sample time");
  sub->add_option("--interval", o.interval, "Sample spacing");
  sub->add_flag("--no-error-bars", o.no_error_bars, "Skip the resampled rerun");
  sub->add_flag("--dump-cells", o.dump_cells, "Write cell grids and lattice densities per sample");
  sub->add_option("--coarse", o.coarse, "Cell layout (must be non-overlapping here)");
}

// --config entries become flags placed right after the subcommand name, so
// anything given on the command line wins.
std::vector<std::string> expand_config(const std::vector<std::string>& args, const CLI::App& app) {
  std::string path;
  std::size_t sub_at = args.size();
  for (std::size_t k = 1; k < args.size(); ++k) {
    if (sub_at == args.size()) {
      for (const CLI::App* s : app.get_subcommands([](const CLI::App*) { return true; }))
        if (s->get_name() == args[k]) sub_at = k;
    }
    if (args[k] == "--config" && k + 1 < args.size()) path = args[k + 1];
    if (args[k].rfind("--config=", 0) == 0) path = args[k].substr(9);
  }
  if (path.empty() || sub_at == args.size()) return args;

  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path + ": " + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config file must hold a JSON object");
  // Nested "integrator" objects are flattened onto the top level.
  if (doc.contains("integrator") && doc["integrator"].is_object()) {
    json inner = doc["integrator"];
    doc.erase("integrator");
    for (auto it = inner.begin(); it != inner.end(); ++it) doc.emplace(it.key(), it.value());
  }

  const CLI::App* sub = app.get_subcommand_no_throw(args[sub_at]);
  std::vector<std::string> injected;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    std::string flag = "--" + it.key();
    std::replace(flag.begin(), flag.end(), '_', '-');
    if (flag == "--config" || !sub || !sub->get_option_no_throw(flag)) continue;
    const json& v = it.value();
    if (v.is_boolean()) {
      if (v.get<bool>()) injected.push_back(flag);
    } else if (v.is_string()) {
      injected.insert(injected.end(), {flag, v.get<std::string>()});
    } else if (v.is_number_integer()) {
      injected.insert(injected.end(), {flag, std::to_string(v.get<long long>())});
    } else if (v.is_number()) {
      injected.insert(injected.end(), {flag, fmt(v.get<double>())});
    } else {
      throw ConfigError("config key '" + it.key() + "' must be a scalar");
    }
  }
  std::vector<std::string> out(args.begin(), args.begin() + static_cast<std::ptrdiff_t>(sub_at + 1));
  out.insert(out.end(), injected.begin(), injected.end());
  out.insert(out.end(), args.begin() + static_cast<std::ptrdiff_t>(sub_at + 1), args.end());
  return out;
}

}  // namespace

int cmd_dispatch(const std::vector<std::string>& raw_args) {
  Options o;
  CLI::App app{"Pilot-wave relaxation simulator for a particle in a 2D box", "pilotwave"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  auto* traj = app.add_subcommand("trajectory", "Integrate trajectories and dump samples (t, x, y, h, delta_used)");
  add_common(traj, o);
  traj->add_option("--x", o.x, "Start x");
  traj->add_option("--y", o.y, "Start y");
  traj->add_option("--count", o.count, "Number of |psi|^2-distributed random starts when --x/--y are absent");
  traj->add_option("--t0", o.t0, "Start time");
  traj->add_option("--t1", o.t1, "End time");
  traj->add_option("--delta", o.delta, "Fixed tolerance (default: validated ladder)");
  traj->add_option("--samples", o.samples, "Uniform sample count (default: every accepted step)");

  auto* div = app.add_subcommand("diverge", "Separation of nearby trajectory pairs");
  add_common(div, o);
  div->add_option("--pairs", o.pairs, "Number of random pairs");
  div->add_option("--separation", o.separation, "Initial separation of random pairs");
  div->add_option("--a", o.a, "First point 'x,y' (with --b instead of random pairs)");
  div->add_option("--b", o.b, "Second point 'x,y'");
  div->add_option("--horizon", o.horizon, "End time (default 4pi)");
  div->add_option("--samples", o.samples, "Samples per pair (default 201)");

  auto* dens = app.add_subcommand("density", "Backtracked density snapshot on a lattice");
  add_common(dens, o);
  dens->add_option("--time", o.time, "Snapshot time");
  dens->add_option("--grid", o.grid, "Lattice, e.g. 200x200");
  dens->add_option("--epsilon", o.epsilon, "Also coarse-grain with this cell side");
  dens->add_option("--coarse", o.coarse, "non-overlapping | overlapping");
  dens->add_option("--shift", o.shift, "Overlapping-cell shift as a fraction of epsilon");

  auto* hs = app.add_subcommand("hseries", "Coarse-grained H-function series and exponential fit");
  add_common(hs, o);
  add_series(hs, o);
  hs->add_option("--curvature-grid", o.curvature_grid, "Also report the curvature timescale on this grid");

  auto* rev = app.add_subcommand("reverse", "Time-reversed experiment");
  add_common(rev, o);
  add_series(rev, o);
  rev->add_option("--tr", o.t_r, "Reversal time");

  auto* tau = app.add_subcommand("tau", "Relaxation timescale estimates");
  add_common(tau, o);
  tau->add_option("--epsilon", o.epsilon, "Cell side");
  tau->add_option("--curvature-grid", o.curvature_grid, "Quadrature grid for the curvature estimate (0 = skip)");
  tau->add_option("--energy-spread", o.energy_spread, "Energy spread for the rough estimate: a number or 'exact'");

  auto* self = app.add_subcommand("selftest", "Quick end-to-end checks");
  add_common(self, o);

  try {
    std::vector<std::string> args = expand_config(raw_args, app);
    std::vector<std::string> rev_args(args.rbegin(), args.rend() - 1);
    app.parse(rev_args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    kernels::select_kernels(o.kernel);
    if (*traj) return run_trajectory(o);
    if (*div) return run_diverge(o);
    if (*dens) return run_density(o);
    if (*hs) return run_hseries(o);
    if (*rev) return run_reverse(o);
    if (*tau) return run_tau(o);
    if (*self) return run_selftest(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  std::cerr << app.help();
  return kExitConfig;
}

int cmd_dispatch(int argc, const char* const* argv) {
  std::vector<std::string> args(argv, argv + argc);
  if (args.empty()) args.emplace_back("pilotwave");
  return cmd_dispatch(args);
}

}  // namespace pilotwave
