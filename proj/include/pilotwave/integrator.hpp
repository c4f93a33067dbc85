#pragma once

// Adaptive Runge-Kutta-Fehlberg 4(5) integration of the guidance equation
// dX/dt = Im(grad psi / psi)(X, t), with a per-step absolute error rule
// |e_x|, |e_y| < |h| * delta and a delta ladder that reruns each trajectory at
// tighter tolerances until two consecutive endpoints agree.

#include <cstdint>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pilotwave/wavefield.hpp"

namespace pilotwave {

inline constexpr std::string_view kTableauId = "fehlberg-4(5)/propagate-5th";

struct IntegratorConfig {
  double delta_start = 1e-6;
  double delta_min = 1e-12;
  double delta_ladder_factor = 10.0;
  double global_error_threshold = 0.01;
  std::int64_t max_steps = 100'000'000;  // attempted steps per run, rejected ones included
  double node_floor = kDefaultNodeFloor;
  double safety_factor = 0.9;
  double initial_step_fraction = 1e-4;  // h0 = fraction * |t1 - t0|
  double min_step = 1e-13;              // |h| below this counts as step underflow

  void validate() const;
  // delta_start, delta_start / factor, ... down to delta_min.
  [[nodiscard]] std::vector<double> ladder() const;
  [[nodiscard]] nlohmann::json to_json() const;
  static IntegratorConfig from_json(const nlohmann::json& doc);
};

enum class TrajectoryStatus {
  Completed,              // single-delta run reached t1
  Validated,              // two consecutive ladder levels agreed
  ToleranceFloorReached,  // ladder bottomed out, or the step underflowed at a wall
  StepLimitExceeded,
  NodeSingularity,
};

[[nodiscard]] std::string_view to_string(TrajectoryStatus s);

struct TrajectorySample {
  double t;
  Position pos;
  double h;
};

struct TrajectoryResult {
  Position endpoint;
  TrajectoryStatus status = TrajectoryStatus::Completed;
  // False when the run was aborted before t1; endpoint then holds the last
  // accepted position and must not be used as a trajectory value.
  bool has_endpoint = true;
  double delta_used = 0;
  std::int64_t steps_taken = 0;  // accepted steps
  std::vector<TrajectorySample> samples;
};

struct Sampling {
  enum class Kind { None, EveryStep, AtTimes };
  Kind kind = Kind::None;
  std::vector<double> times;  // monotone in the direction of integration

  static Sampling every_step() { return {Kind::EveryStep, {}}; }
  static Sampling at(std::vector<double> times) { return {Kind::AtTimes, std::move(times)}; }
};

// One run at a fixed delta. Backward integration (t1 < t0) uses negative steps.
[[nodiscard]] TrajectoryResult integrate(const ModeSuperposition& state, Position pos0, double t0, double t1,
                                         double delta, const IntegratorConfig& config,
                                         const Sampling& sampling = {});

// The delta ladder. Outcomes:
//   Validated              endpoints at delta_k and delta_k / factor within the
//                          threshold; the tighter run is returned.
//   ToleranceFloorReached  never agreed; the delta_min run is returned.
//   StepLimitExceeded      with has_endpoint: a tighter level blew the step cap,
//                          the last level that finished is returned.
//                          Without: the first level already failed.
//   NodeSingularity        first level could not step past a node.
[[nodiscard]] TrajectoryResult integrate_validated(const ModeSuperposition& state, Position pos0, double t0,
                                                   double t1, const IntegratorConfig& config,
                                                   const Sampling& sampling = {});

struct DivergenceSeries {
  std::vector<double> times;
  std::vector<double> separations;
};

// Throws NumericalError if either trajectory has no usable endpoint.
[[nodiscard]] DivergenceSeries pair_divergence(const ModeSuperposition& state, Position a, Position b, double t1,
                                               std::size_t sample_count, const IntegratorConfig& config);

}  // namespace pilotwave
