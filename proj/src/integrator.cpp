#include "pilotwave/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pilotwave/errors.hpp"

namespace pilotwave {

namespace {

// Fehlberg 4(5) tableau.
constexpr double c2 = 1.0 / 4, c3 = 3.0 / 8, c4 = 12.0 / 13, c5 = 1.0, c6 = 1.0 / 2;
constexpr double a21 = 1.0 / 4;
constexpr double a31 = 3.0 / 32, a32 = 9.0 / 32;
constexpr double a41 = 1932.0 / 2197, a42 = -7200.0 / 2197, a43 = 7296.0 / 2197;
constexpr double a51 = 439.0 / 216, a52 = -8.0, a53 = 3680.0 / 513, a54 = -845.0 / 4104;
constexpr double a61 = -8.0 / 27, a62 = 2.0, a63 = -3544.0 / 2565, a64 = 1859.0 / 4104, a65 = -11.0 / 40;
// fifth-order weights
constexpr double b1 = 16.0 / 135, b3 = 6656.0 / 12825, b4 = 28561.0 / 56430, b5 = -9.0 / 50, b6 = 2.0 / 55;
// fifth minus fourth order
constexpr double e1 = 1.0 / 360, e3 = -128.0 / 4275, e4 = -2197.0 / 75240, e5 = 1.0 / 50, e6 = 2.0 / 55;

}  // namespace

void IntegratorConfig::validate() const {
  auto positive = [](double v) { return v > 0 && std::isfinite(v); };
  if (!positive(delta_start) || !positive(delta_min) || !positive(global_error_threshold) ||
      !positive(safety_factor) || !positive(initial_step_fraction) || !positive(min_step) || node_floor < 0)
    throw ConfigError("integrator thresholds must be positive and finite");
  if (delta_min > delta_start) throw ConfigError("delta_min must not exceed delta_start");
  if (!(delta_ladder_factor > 1.0)) throw ConfigError("delta_ladder_factor must be > 1");
  if (max_steps <= 0) throw ConfigError("max_steps must be positive");
}

std::vector<double> IntegratorConfig::ladder() const {
  std::vector<double> out;
  for (int k = 0;; ++k) {
    const double d = delta_start / std::pow(delta_ladder_factor, k);
    if (d < delta_min * (1 - 1e-9)) break;
    out.push_back(d);
  }
  return out;
}

nlohmann::json IntegratorConfig::to_json() const {
  return {{"delta_start", delta_start},
          {"delta_min", delta_min},
          {"delta_ladder_factor", delta_ladder_factor},
          {"global_error_threshold", global_error_threshold},
          {"max_steps", max_steps},
          {"node_floor", node_floor},
          {"safety_factor", safety_factor},
          {"initial_step_fraction", initial_step_fraction},
          {"min_step", min_step},
          {"tableau", std::string(kTableauId)},
          {"step_controller", "safety*(|h|*delta/err)^(1/5), clamp [h/10, 10h]"}};
}

IntegratorConfig IntegratorConfig::from_json(const nlohmann::json& doc) {
  IntegratorConfig c;
  c.delta_start = doc.value("delta_start", c.delta_start);
  c.delta_min = doc.value("delta_min", c.delta_min);
  c.delta_ladder_factor = doc.value("delta_ladder_factor", c.delta_ladder_factor);
  c.global_error_threshold = doc.value("global_error_threshold", c.global_error_threshold);
  c.max_steps = doc.value("max_steps", c.max_steps);
  c.node_floor = doc.value("node_floor", c.node_floor);
  c.safety_factor = doc.value("safety_factor", c.safety_factor);
  c.initial_step_fraction = doc.value("initial_step_fraction", c.initial_step_fraction);
  c.min_step = doc.value("min_step", c.min_step);
  c.validate();
  return c;
}

std::string_view to_string(TrajectoryStatus s) {
  switch (s) {
    case TrajectoryStatus::Completed: return "Completed";
    case TrajectoryStatus::Validated: return "Validated";
    case TrajectoryStatus::ToleranceFloorReached: return "ToleranceFloorReached";
    case TrajectoryStatus::StepLimitExceeded: return "StepLimitExceeded";
    case TrajectoryStatus::NodeSingularity: return "NodeSingularity";
  }
  return "?";
}

TrajectoryResult integrate(const ModeSuperposition& state, Position pos0, double t0, double t1, double delta,
                           const IntegratorConfig& config, const Sampling& sampling) {
  if (!in_box(pos0)) throw ConfigError("initial position outside the box");
  if (!(delta > 0)) throw ConfigError("delta must be positive");

  const kernels::KernelTable& kern = kernels::active_kernels();
  const kernels::PackedModes& pm = state.packed();
  const double floor = config.node_floor;
  auto vel = [&](double x, double y, double t, double& vx, double& vy) {
    return guidance_velocity(kern, pm, x, y, t, floor, vx, vy);
  };

  TrajectoryResult r;
  r.delta_used = delta;
  r.endpoint = pos0;

  const double dir = t1 >= t0 ? 1.0 : -1.0;
  const bool at_times = sampling.kind == Sampling::Kind::AtTimes;
  const bool every_step = sampling.kind == Sampling::Kind::EveryStep;
  std::size_t next_sample = 0;

  double t = t0;
  double x = pos0.x, y = pos0.y;
  double h = dir * config.initial_step_fraction * std::abs(t1 - t0);
  if (every_step) r.samples.push_back({t, {x, y}, 0.0});

  double k1x = 0, k1y = 0;
  bool have_k1 = false;
  std::int64_t attempts = 0;

  auto fail = [&](TrajectoryStatus s) {
    r.status = s;
    r.has_endpoint = false;
    r.endpoint = {x, y};
  };

  for (;;) {
    if (at_times) {
      while (next_sample < sampling.times.size() && (sampling.times[next_sample] - t) * dir <= 0) {
        r.samples.push_back({sampling.times[next_sample], {x, y}, h});
        ++next_sample;
      }
    }
    if (t == t1) break;
    if (++attempts > config.max_steps) {
      fail(TrajectoryStatus::StepLimitExceeded);
      return r;
    }

    double target = t1;
    if (at_times && next_sample < sampling.times.size() && (sampling.times[next_sample] - t1) * dir < 0)
      target = sampling.times[next_sample];
    double step = h;
    bool clipped = false;
    if ((t + step - target) * dir >= 0) {
      step = target - t;
      clipped = true;
    }

    if (!have_k1) {
      if (!vel(x, y, t, k1x, k1y)) {
        fail(TrajectoryStatus::NodeSingularity);
        return r;
      }
      have_k1 = true;
    }

    double k2x, k2y, k3x, k3y, k4x, k4y, k5x, k5y, k6x, k6y;
    const bool ok =
        vel(x + step * a21 * k1x, y + step * a21 * k1y, t + c2 * step, k2x, k2y) &&
        vel(x + step * (a31 * k1x + a32 * k2x), y + step * (a31 * k1y + a32 * k2y), t + c3 * step, k3x, k3y) &&
        vel(x + step * (a41 * k1x + a42 * k2x + a43 * k3x), y + step * (a41 * k1y + a42 * k2y + a43 * k3y),
            t + c4 * step, k4x, k4y) &&
        vel(x + step * (a51 * k1x + a52 * k2x + a53 * k3x + a54 * k4x),
            y + step * (a51 * k1y + a52 * k2y + a53 * k3y + a54 * k4y), t + c5 * step, k5x, k5y) &&
        vel(x + step * (a61 * k1x + a62 * k2x + a63 * k3x + a64 * k4x + a65 * k5x),
            y + step * (a61 * k1y + a62 * k2y + a63 * k3y + a64 * k4y + a65 * k5y), t + c6 * step, k6x, k6y);
    if (!ok) {
      h = 0.5 * step;
      if (std::abs(h) < config.min_step) {
        fail(TrajectoryStatus::NodeSingularity);
        return r;
      }
      continue;
    }

    const double ex = std::abs(step * (e1 * k1x + e3 * k3x + e4 * k4x + e5 * k5x + e6 * k6x));
    const double ey = std::abs(step * (e1 * k1y + e3 * k3y + e4 * k4y + e5 * k5y + e6 * k6y));
    const double tol = std::abs(step) * delta;
    const double err = std::max(ex, ey);

    if (ex < tol && ey < tol) {
      const double nx = x + step * (b1 * k1x + b3 * k3x + b4 * k4x + b5 * k5x + b6 * k6x);
      const double ny = y + step * (b1 * k1y + b3 * k3y + b4 * k4y + b5 * k5y + b6 * k6y);
      if (!in_box({nx, ny})) {
        h = 0.5 * step;
        if (std::abs(h) < config.min_step) {
          fail(TrajectoryStatus::ToleranceFloorReached);
          return r;
        }
        continue;
      }
      t = clipped ? target : t + step;
      x = nx;
      y = ny;
      have_k1 = false;
      ++r.steps_taken;
      const double factor = err > 0 ? std::clamp(config.safety_factor * std::pow(tol / err, 0.2), 0.1, 10.0) : 10.0;
      const double proposal = step * factor;
      h = clipped ? dir * std::max(std::abs(h), std::abs(proposal)) : proposal;
      if (every_step) r.samples.push_back({t, {x, y}, step});
    } else {
      const double factor =
          std::isfinite(err) ? std::clamp(config.safety_factor * std::pow(tol / err, 0.2), 0.1, 10.0) : 0.1;
      h = step * factor;
      if (std::abs(h) < config.min_step) {
        fail(TrajectoryStatus::ToleranceFloorReached);
        return r;
      }
    }
  }

  r.endpoint = {x, y};
  r.status = TrajectoryStatus::Completed;
  return r;
}

TrajectoryResult integrate_validated(const ModeSuperposition& state, Position pos0, double t0, double t1,
                                     const IntegratorConfig& config, const Sampling& sampling) {
  config.validate();
  const std::vector<double> deltas = config.ladder();

  TrajectoryResult prev = integrate(state, pos0, t0, t1, deltas.front(), config, sampling);
  if (!prev.has_endpoint) return prev;
  if (deltas.size() == 1) {
    prev.status = TrajectoryStatus::ToleranceFloorReached;
    return prev;
  }

  for (std::size_t k = 1; k < deltas.size(); ++k) {
    TrajectoryResult cur = integrate(state, pos0, t0, t1, deltas[k], config, sampling);
    if (!cur.has_endpoint) {
      // Keep the tightest level that finished, even though it was not validated.
      prev.status = TrajectoryStatus::StepLimitExceeded;
      return prev;
    }
    if (distance(prev.endpoint, cur.endpoint) < config.global_error_threshold) {
      cur.status = TrajectoryStatus::Validated;
      return cur;
    }
    prev = std::move(cur);
  }
  prev.status = TrajectoryStatus::ToleranceFloorReached;
  return prev;
}

DivergenceSeries pair_divergence(const ModeSuperposition& state, Position a, Position b, double t1,
                                 std::size_t sample_count, const IntegratorConfig& config) {
  if (sample_count < 2) throw ConfigError("pair_divergence needs at least two sample times");
  std::vector<double> times(sample_count);
  for (std::size_t k = 0; k < sample_count; ++k)
    times[k] = k + 1 == sample_count ? t1 : t1 * static_cast<double>(k) / static_cast<double>(sample_count - 1);

  const Sampling sampling = Sampling::at(times);
  const TrajectoryResult ra = integrate_validated(state, a, 0.0, t1, config, sampling);
  const TrajectoryResult rb = integrate_validated(state, b, 0.0, t1, config, sampling);
  if (!ra.has_endpoint || !rb.has_endpoint)
    throw NumericalError("pair_divergence: trajectory failed (" + std::string(to_string(ra.status)) + ", " +
                         std::string(to_string(rb.status)) + ")");

  DivergenceSeries out;
  out.times = times;
  out.separations.reserve(sample_count);
  for (std::size_t k = 0; k < sample_count; ++k)
    out.separations.push_back(distance(ra.samples[k].pos, rb.samples[k].pos));
  return out;
}

}  // namespace pilotwave
