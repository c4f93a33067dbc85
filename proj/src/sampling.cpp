#include "pilotwave/sampling.hpp"

#include <cmath>

#include "pilotwave/errors.hpp"

namespace pilotwave {

Position uniform_point(Rng& rng, double margin) {
  std::uniform_real_distribution<double> u(margin, kBoxSide - margin);
  const double x = u(rng);
  return {x, u(rng)};
}

std::vector<Position> born_samples(const ModeSuperposition& state, double t, std::size_t count, Rng& rng) {
  // |psi|^2 <= (sum |a|)^2 (2/pi)^2.
  double amp = 0;
  for (const Mode& m : state.modes()) amp += std::abs(m.amplitude);
  const double bound = amp * amp * 4.0 / (kPi * kPi);
  std::uniform_real_distribution<double> u(0.0, bound);
  std::vector<Position> out;
  out.reserve(count);
  while (out.size() < count) {
    const Position q = uniform_point(rng);
    if (u(rng) < std::norm(psi_at(state, q, t))) out.push_back(q);
  }
  return out;
}

PointPair random_pair(Rng& rng, double separation, double margin) {
  if (!(separation > 0) || separation >= kBoxSide - 2 * margin) throw ConfigError("pair separation out of range");
  std::uniform_real_distribution<double> angle(0.0, 2 * kPi);
  for (;;) {
    const Position a = uniform_point(rng, margin);
    const double th = angle(rng);
    const Position b{a.x + separation * std::cos(th), a.y + separation * std::sin(th)};
    if (b.x > margin && b.x < kBoxSide - margin && b.y > margin && b.y < kBoxSide - margin) return {a, b};
  }
}

}  // namespace pilotwave
