#include <doctest.h>

#include <cmath>

#include "pilotwave/errors.hpp"
#include "pilotwave/integrator.hpp"
#include "pilotwave/sampling.hpp"

using namespace pilotwave;

namespace {

// phi_11 + phi_21 with equal weight: the y factor sin(y) is common and real,
// so v_y = 0 and the motion is one-dimensional.
ModeSuperposition one_dimensional() {
  const double a = std::sqrt(0.5);
  return ModeSuperposition({Mode{1, 1, a, 0.0}, Mode{2, 1, a, 0.7}});
}

}  // namespace

TEST_CASE("delta ladder and config validation") {
  IntegratorConfig c;
  const auto ladder = c.ladder();
  REQUIRE(ladder.size() == 7);
  CHECK(ladder.front() == 1e-6);
  CHECK(ladder.back() == doctest::Approx(1e-12).epsilon(1e-9));
  for (std::size_t k = 1; k < ladder.size(); ++k) CHECK(ladder[k - 1] / ladder[k] == doctest::Approx(10.0));

  IntegratorConfig bad = c;
  bad.delta_min = 1e-3;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.max_steps = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.delta_ladder_factor = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  c.delta_start = 1e-5;
  c.max_steps = 1234;
  const IntegratorConfig back = IntegratorConfig::from_json(c.to_json());
  CHECK(back.delta_start == 1e-5);
  CHECK(back.max_steps == 1234);
  CHECK(back.to_json() == c.to_json());
}

TEST_CASE("a single eigenmode is stationary") {
  const ModeSuperposition one({Mode{2, 3, 1.0, 0.5}});
  const TrajectoryResult r = integrate_validated(one, {0.3, 2.9}, 0.0, 10.0, {});
  CHECK(r.status == TrajectoryStatus::Validated);
  CHECK(r.endpoint.x == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(r.endpoint.y == doctest::Approx(2.9).epsilon(1e-14));
}

TEST_CASE("one-dimensional motion keeps y fixed") {
  const ModeSuperposition s = one_dimensional();
  const TrajectoryResult r = integrate_validated(s, {1.0, 1.3}, 0.0, 3 * kPi, {}, Sampling::every_step());
  REQUIRE(r.status == TrajectoryStatus::Validated);
  double drift = 0;
  for (const auto& smp : r.samples) drift = std::max(drift, std::abs(smp.pos.y - 1.3));
  CHECK(drift < 1e-12);
  CHECK(std::abs(r.endpoint.x - 1.0) > 1e-3);  // it does move in x
}

TEST_CASE("one-dimensional flow conserves |psi|^2 mass to the left of the particle") {
  // In 1D the probability to the left of a trajectory is invariant:
  // F(x, t) = integral_0^x |chi(s, t)|^2 ds stays constant along X(t).
  const ModeSuperposition s = one_dimensional();
  const double a2 = 0.5;
  auto left_mass = [&](double x, double t) {
    // |chi|^2 ~ sin^2 s + sin^2 2s + 2 cos(p) sin s sin 2s, integrated in closed form.
    const double p = 0.7 - 1.5 * t;  // relative phase theta_21 - theta_11 - (E21 - E11) t
    const double i11 = x / 2 - std::sin(2 * x) / 4;
    const double i22 = x / 2 - std::sin(4 * x) / 8;
    const double i12 = std::sin(x) / 2 - std::sin(3 * x) / 6;  // integral of sin s sin 2s
    return (2 / kPi) * a2 * (i11 + i22 + 2 * std::cos(p) * i12);
  };
  const Position q0{0.8, 2.0};
  for (double t1 : {1.0, 2.5, 6.0}) {
    const TrajectoryResult r = integrate(s, q0, 0.0, t1, 1e-11, {});
    REQUIRE(r.status == TrajectoryStatus::Completed);
    CHECK(left_mass(r.endpoint.x, t1) == doctest::Approx(left_mass(q0.x, 0.0)).epsilon(1e-9));
    // The validated ladder is looser but still well inside its 0.01 agreement threshold.
    const TrajectoryResult v = integrate_validated(s, q0, 0.0, t1, {});
    REQUIRE(v.status == TrajectoryStatus::Validated);
    CHECK(std::abs(left_mass(v.endpoint.x, t1) - left_mass(q0.x, 0.0)) < 1e-5);
  }
}

TEST_CASE("forward then backward returns to the start") {
  const ModeSuperposition s = ModeSuperposition::box16();
  Rng rng(21);
  for (int k = 0; k < 20; ++k) {
    const Position q = uniform_point(rng, 0.1);
    const TrajectoryResult f = integrate_validated(s, q, 0.0, 2.0, {});
    REQUIRE(f.has_endpoint);
    const TrajectoryResult b = integrate_validated(s, f.endpoint, 2.0, 0.0, {});
    REQUIRE(b.has_endpoint);
    CHECK(distance(b.endpoint, q) < 1e-3);
  }
}

TEST_CASE("tighter tolerance converges") {
  const ModeSuperposition s = ModeSuperposition::box16();
  const IntegratorConfig cfg;
  const Position q{1.2, 0.9};
  const TrajectoryResult a = integrate(s, q, 0.0, 1.5, 1e-9, cfg);
  const TrajectoryResult b = integrate(s, q, 0.0, 1.5, 1e-11, cfg);
  REQUIRE(a.status == TrajectoryStatus::Completed);
  REQUIRE(b.status == TrajectoryStatus::Completed);
  CHECK(distance(a.endpoint, b.endpoint) < 1e-6);
  CHECK(b.steps_taken > a.steps_taken);
  CHECK(a.delta_used == 1e-9);
}

TEST_CASE("step cap") {
  IntegratorConfig cfg;
  cfg.max_steps = 10;
  const ModeSuperposition s = ModeSuperposition::box16();
  const TrajectoryResult r = integrate(s, {1.0, 1.0}, 0.0, 5.0, 1e-8, cfg);
  CHECK(r.status == TrajectoryStatus::StepLimitExceeded);
  CHECK_FALSE(r.has_endpoint);
  const TrajectoryResult v = integrate_validated(s, {1.0, 1.0}, 0.0, 5.0, cfg);
  CHECK(v.status == TrajectoryStatus::StepLimitExceeded);
  CHECK_FALSE(v.has_endpoint);
}

TEST_CASE("a cap that only the tighter levels hit keeps the coarser endpoint") {
  const ModeSuperposition s = ModeSuperposition::box16();
  IntegratorConfig cfg;
  // Smallest cap under which the first ladder level still finishes.
  std::int64_t lo = 1, hi = 1'000'000;
  while (lo < hi) {
    cfg.max_steps = (lo + hi) / 2;
    if (integrate(s, {1.0, 1.0}, 0.0, 2.0, cfg.delta_start, cfg).has_endpoint) hi = cfg.max_steps;
    else lo = cfg.max_steps + 1;
  }
  cfg.max_steps = lo;
  const TrajectoryResult first = integrate(s, {1.0, 1.0}, 0.0, 2.0, cfg.delta_start, cfg);
  REQUIRE(first.has_endpoint);
  REQUIRE_FALSE(integrate(s, {1.0, 1.0}, 0.0, 2.0, cfg.delta_start / 10, cfg).has_endpoint);

  const TrajectoryResult v = integrate_validated(s, {1.0, 1.0}, 0.0, 2.0, cfg);
  CHECK(v.status == TrajectoryStatus::StepLimitExceeded);
  CHECK(v.has_endpoint);
  CHECK(v.delta_used == cfg.delta_start);
  CHECK(v.endpoint == first.endpoint);
}

TEST_CASE("sampling at requested times") {
  const ModeSuperposition s = ModeSuperposition::box16();
  const std::vector<double> times = {0.0, 0.25, 0.5, 1.0};
  const TrajectoryResult r = integrate_validated(s, {2.0, 1.0}, 0.0, 1.0, {}, Sampling::at(times));
  REQUIRE(r.samples.size() == times.size());
  for (std::size_t k = 0; k < times.size(); ++k) CHECK(r.samples[k].t == times[k]);
  CHECK(r.samples.front().pos == Position{2.0, 1.0});
  CHECK(r.samples.back().pos == r.endpoint);
  // Sampled and unsampled runs reach the same point at the sample times.
  const TrajectoryResult mid = integrate(s, {2.0, 1.0}, 0.0, 0.5, r.delta_used, {});
  CHECK(distance(mid.endpoint, r.samples[2].pos) < 1e-6);
}

TEST_CASE("backward integration and zero-length spans") {
  const ModeSuperposition s = ModeSuperposition::box16();
  const TrajectoryResult r = integrate_validated(s, {2.0, 2.0}, 3.0, 1.0, {}, Sampling::every_step());
  REQUIRE(r.has_endpoint);
  CHECK(r.samples.front().t == 3.0);
  CHECK(r.samples.back().t == 1.0);
  for (std::size_t k = 1; k < r.samples.size(); ++k) CHECK(r.samples[k].t < r.samples[k - 1].t);

  const TrajectoryResult z = integrate_validated(s, {2.0, 2.0}, 1.0, 1.0, {});
  CHECK(z.status == TrajectoryStatus::Validated);
  CHECK(z.endpoint == Position{2.0, 2.0});
  CHECK(z.steps_taken == 0);
}

TEST_CASE("trajectories stay inside the box") {
  const ModeSuperposition s = ModeSuperposition::box16();
  Rng rng(5);
  for (int k = 0; k < 100; ++k) {
    const Position q = uniform_point(rng, 0.0);
    const TrajectoryResult r = integrate_validated(s, q, 0.0, kPi, {}, Sampling::every_step());
    for (const auto& smp : r.samples) CHECK(in_box(smp.pos));
  }
}

TEST_CASE("inputs are checked") {
  const ModeSuperposition s = ModeSuperposition::box16();
  CHECK_THROWS_AS((void)integrate(s, {-0.1, 1.0}, 0, 1, 1e-6, {}), ConfigError);
  CHECK_THROWS_AS((void)integrate(s, {1.0, 1.0}, 0, 1, 0.0, {}), ConfigError);
}

TEST_CASE("pair divergence series") {
  const ModeSuperposition s = ModeSuperposition::box16();
  const DivergenceSeries d = pair_divergence(s, {1.0, 1.0}, {1.005, 1.0}, kPi, 11, {});
  REQUIRE(d.times.size() == 11);
  CHECK(d.times.front() == 0.0);
  CHECK(d.times.back() == kPi);
  CHECK(d.separations.front() == doctest::Approx(0.005).epsilon(1e-12));
  for (double sep : d.separations) CHECK(sep >= 0);
  CHECK_THROWS_AS((void)pair_divergence(s, {1.0, 1.0}, {1.1, 1.0}, kPi, 1, {}), ConfigError);
  CHECK(to_string(TrajectoryStatus::Validated) == "Validated");
}
