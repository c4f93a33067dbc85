#pragma once

// Seeded random probe points. The dynamics is deterministic; randomness only
// picks where to look.

#include <cstdint>
#include <random>
#include <vector>

#include "pilotwave/wavefield.hpp"

namespace pilotwave {

using Rng = std::mt19937_64;

// Uniform in [margin, pi - margin]^2.
[[nodiscard]] Position uniform_point(Rng& rng, double margin = 0.0);

// Distributed as |psi(., t)|^2 (rejection against the grid maximum bound).
[[nodiscard]] std::vector<Position> born_samples(const ModeSuperposition& state, double t, std::size_t count, Rng& rng);

// A point and a partner at the given distance in a uniformly random
// direction, both inside the box.
struct PointPair {
  Position a;
  Position b;
};
[[nodiscard]] PointPair random_pair(Rng& rng, double separation, double margin = 0.05);

}  // namespace pilotwave
