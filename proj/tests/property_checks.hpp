#pragma once

// Randomised property checks over hand-rolled generators. Shared by the
// doctest property suite and the acceptance gate so both exercise the same code.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "pilotwave/coarsegrain.hpp"
#include "pilotwave/integrator.hpp"
#include "pilotwave/sampling.hpp"
#include "pilotwave/wavefield.hpp"

namespace pilotwave::checks {

struct Outcome {
  bool pass = false;
  std::string detail;
};

inline std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

inline CellGrid make_cells(std::size_t k, std::vector<double> values) {
  CellGrid g;
  g.spec.cell_side = kPi / static_cast<double>(k);
  g.spec.mode = CoarseMode::NonOverlapping;
  g.dims = {k, k};
  g.centers.resize(k * k);
  g.values = std::move(values);
  return g;
}

// hbar >= 0 over random normalised grid pairs; zero for identical grids;
// strictly positive whenever some cell differs by more than 1e-12.
inline Outcome hbar_gibbs(std::size_t pairs, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> side(1, 12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::bernoulli_distribution zero(0.1), same(0.25);
  double min_h = 1e300, min_h_unequal = 1e300, max_h_equal = 0;
  for (std::size_t p = 0; p < pairs; ++p) {
    const std::size_t k = side(rng);
    std::vector<double> rho(k * k), psi(k * k);
    for (auto& v : rho) v = zero(rng) ? 0.0 : u(rng);
    for (auto& v : psi) v = 0.01 + u(rng);
    if (std::all_of(rho.begin(), rho.end(), [](double v) { return v == 0; })) rho[0] = 1.0;
    const bool equal = same(rng);
    if (equal) rho = psi;
    const double h = hbar(make_cells(k, rho), make_cells(k, psi));
    min_h = std::min(min_h, h);
    // Cell equality after both grids are normalised.
    double rs = 0, ps = 0;
    for (std::size_t i = 0; i < rho.size(); ++i) rs += rho[i], ps += psi[i];
    double diff = 0;
    for (std::size_t i = 0; i < rho.size(); ++i) diff = std::max(diff, std::abs(rho[i] / rs - psi[i] / ps));
    if (diff <= 1e-12) max_h_equal = std::max(max_h_equal, std::abs(h));
    else min_h_unequal = std::min(min_h_unequal, h);
  }
  const bool ok = min_h >= 0 && max_h_equal == 0 && min_h_unequal > 0;
  return {ok, "min hbar " + num(min_h) + ", max |hbar| equal grids " + num(max_h_equal) +
                  ", min hbar unequal grids " + num(min_h_unequal)};
}

// Every coarse cell mean lies within [min, max] of the samples it averages,
// in both cell layouts.
inline Outcome coarse_mean_bounds(std::size_t trials, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_int_distribution<int> cells(1, 8), per(1, 6);
  std::uniform_real_distribution<double> u(-1.0, 3.0), shift(0.05, 1.0);
  std::size_t violations = 0, checked = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    CoarseGrainSpec spec;
    const int k = cells(rng), s = per(rng);
    spec.cell_side = kPi / k;
    const std::size_t n = static_cast<std::size_t>(k * s);
    std::vector<double> values(n * n);
    for (auto& v : values) v = u(rng);
    const double lo = *std::min_element(values.begin(), values.end());
    const double hi = *std::max_element(values.begin(), values.end());

    const CellGrid g = coarse_grain(values, {n, n}, spec);
    for (std::size_t cj = 0; cj < g.dims.ny; ++cj) {
      for (std::size_t ci = 0; ci < g.dims.nx; ++ci) {
        double clo = 1e300, chi = -1e300;
        for (std::size_t j = cj * s; j < (cj + 1) * s; ++j)
          for (std::size_t i = ci * s; i < (ci + 1) * s; ++i) {
            clo = std::min(clo, values[j * n + i]);
            chi = std::max(chi, values[j * n + i]);
          }
        const double v = g.values[cj * g.dims.nx + ci];
        ++checked;
        if (v < clo - 1e-12 || v > chi + 1e-12) ++violations;
      }
    }

    spec.mode = CoarseMode::Overlapping;
    spec.overlap_shift_fraction = shift(rng);
    if (static_cast<int>(n) >= k) {
      const CellGrid o = coarse_grain(values, {n, n}, spec);
      for (double v : o.values) {
        ++checked;
        if (v < lo - 1e-12 || v > hi + 1e-12) ++violations;
      }
    }
  }
  return {violations == 0, std::to_string(violations) + " violations in " + std::to_string(checked) + " cells"};
}

// Forward 0 -> t then backward t -> 0 returns within 0.01 for at least 99% of
// |psi0|^2-distributed starts.
inline Outcome roundtrip(const ModeSuperposition& state, std::size_t count, double t, std::uint64_t seed,
                         const IntegratorConfig& cfg = {}) {
  Rng rng(seed);
  const std::vector<Position> starts = born_samples(state, 0.0, count, rng);
  std::size_t good = 0;
  double worst = 0;
  for (const Position& q : starts) {
    const TrajectoryResult fwd = integrate_validated(state, q, 0.0, t, cfg);
    if (!fwd.has_endpoint) continue;
    const TrajectoryResult back = integrate_validated(state, fwd.endpoint, t, 0.0, cfg);
    if (!back.has_endpoint) continue;
    const double d = distance(back.endpoint, q);
    worst = std::max(worst, d);
    if (d < 0.01) ++good;
  }
  const double frac = static_cast<double>(good) / static_cast<double>(count);
  return {frac >= 0.99, num(100 * frac) + "% within 0.01, worst " + num(worst)};
}

// Velocity from the analytic gradient against central differences of psi.
inline Outcome velocity_vs_fd(const ModeSuperposition& state, std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> tt(0.0, 4 * kPi);
  const double h = 1e-6;
  double worst = 0;
  std::size_t done = 0;
  while (done < count) {
    const Position q = uniform_point(rng, 1e-3);
    const double t = tt(rng);
    const FieldSample s = field_sample(state, q, t, 0.0);
    if (s.density <= 1e-3) continue;
    const auto dx = (psi_at(state, {q.x + h, q.y}, t) - psi_at(state, {q.x - h, q.y}, t)) / (2 * h);
    const auto dy = (psi_at(state, {q.x, q.y + h}, t) - psi_at(state, {q.x, q.y - h}, t)) / (2 * h);
    const double vx = std::imag(dx / s.psi), vy = std::imag(dy / s.psi);
    const double speed = std::hypot(s.velocity[0], s.velocity[1]);
    const double err = std::hypot(vx - s.velocity[0], vy - s.velocity[1]) / std::max(speed, 1e-12);
    worst = std::max(worst, err);
    ++done;
  }
  return {worst < 1e-4, "worst relative difference " + num(worst)};
}

// d|psi|^2/dt + div(|psi|^2 v) from analytic first and second derivatives.
inline Outcome continuity(const ModeSuperposition& state, std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> tt(0.0, 4 * kPi);
  double worst = 0;
  std::size_t done = 0;
  while (done < count) {
    const Position q = uniform_point(rng, 1e-3);
    const double t = tt(rng);
    const FieldDerivatives d = field_derivatives(state, q, t);
    const double rho = std::norm(d.psi);
    if (rho <= 1e-3) continue;
    const double drho_dt = 2 * std::real(std::conj(d.psi) * d.psi_t);
    // rho v = Im(psi* grad psi); its divergence by the product rule.
    const double div = std::imag(std::conj(d.psi_x) * d.psi_x + std::conj(d.psi) * d.psi_xx) +
                       std::imag(std::conj(d.psi_y) * d.psi_y + std::conj(d.psi) * d.psi_yy);
    worst = std::max(worst, std::abs(drho_dt + div));
    ++done;
  }
  return {worst < 1e-5, "worst residual " + num(worst)};
}

}  // namespace pilotwave::checks
