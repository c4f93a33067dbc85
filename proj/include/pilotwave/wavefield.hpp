#pragma once

// Analytic wavefunction of a particle in the square box [0, pi]^2 (hbar = 1,
// unit mass), built from a finite superposition of the box eigenmodes
//
//   phi_mn(x, y) = (2/pi) sin(m x) sin(n y),   E_mn = (m^2 + n^2) / 2,
//   psi(x, y, t) = sum a_mn phi_mn(x, y) exp(i (theta_mn - E_mn t)),
//
// together with the de Broglie guidance velocity Im(grad psi / psi).

#include <array>
#include <complex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pilotwave/kernels.hpp"

namespace pilotwave {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kBoxSide = kPi;
inline constexpr double kDefaultNodeFloor = 1e-12;

struct Position {
  double x = 0;
  double y = 0;

  friend bool operator==(const Position&, const Position&) = default;
};

[[nodiscard]] double distance(Position a, Position b);
[[nodiscard]] bool in_box(Position p);

struct Mode {
  int m = 1;
  int n = 1;
  double amplitude = 0;
  double phase = 0;  // radians

  [[nodiscard]] double energy() const { return 0.5 * (m * m + n * n); }
};

class ModeSuperposition {
 public:
  // Validates m, n >= 1, no duplicate (m, n), sum of amplitude^2 == 1 within 1e-12.
  explicit ModeSuperposition(std::vector<Mode> modes);

  // The 16-mode equal-weight state m, n = 1..4 with the recorded phases.
  static ModeSuperposition box16();

  static ModeSuperposition from_json(const nlohmann::json& doc);
  static ModeSuperposition load(const std::string& path);
  [[nodiscard]] nlohmann::json to_json() const;

  [[nodiscard]] std::span<const Mode> modes() const { return modes_; }
  [[nodiscard]] double box_side() const { return kBoxSide; }
  [[nodiscard]] const kernels::PackedModes& packed() const { return packed_; }

  // SHA-256 of the canonical JSON form, hex encoded.
  [[nodiscard]] std::string hash() const;

 private:
  std::vector<Mode> modes_;
  kernels::PackedModes packed_;
};

struct FieldSample {
  std::complex<double> psi;
  double density = 0;  // |psi|^2
  std::array<std::complex<double>, 2> grad_psi;
  double phase = 0;  // arg psi, not unwrapped
  std::array<double, 2> velocity{};
};

// psi and its derivatives from an independent termwise sum; used for the
// continuity-equation check and wherever second derivatives are needed.
struct FieldDerivatives {
  std::complex<double> psi;
  std::complex<double> psi_t;
  std::complex<double> psi_x;
  std::complex<double> psi_y;
  std::complex<double> psi_xx;
  std::complex<double> psi_xy;
  std::complex<double> psi_yy;
};

[[nodiscard]] double mode_value(const Mode& mode, Position pos);

[[nodiscard]] std::complex<double> psi_at(const ModeSuperposition& state, Position pos, double t);

// Throws NodeSingularity when |psi|^2 < node_floor.
[[nodiscard]] FieldSample field_sample(const ModeSuperposition& state, Position pos, double t,
                                       double node_floor = kDefaultNodeFloor);

[[nodiscard]] FieldDerivatives field_derivatives(const ModeSuperposition& state, Position pos, double t);

// Im(psi* grad psi) / |psi|^2, or false when |psi|^2 < node_floor. Hot path.
[[nodiscard]] inline bool guidance_velocity(const kernels::KernelTable& k, const kernels::PackedModes& pm,
                                            double x, double y, double t, double node_floor,
                                            double& vx, double& vy) {
  kernels::PointField f;
  k.point(pm, x, y, t, f);
  const double pr = f.psi.real(), pi = f.psi.imag();
  const double rho = pr * pr + pi * pi;
  if (!(rho >= node_floor)) return false;
  const double inv = 1.0 / rho;
  vx = (pr * f.dpsi_dx.imag() - pi * f.dpsi_dx.real()) * inv;
  vy = (pr * f.dpsi_dy.imag() - pi * f.dpsi_dy.real()) * inv;
  return true;
}

// |psi|^2 on the tensor grid xs x ys, row-major with rows along y.
void density_grid(const ModeSuperposition& state, std::span<const double> xs, std::span<const double> ys,
                  double t, std::span<double> out);
[[nodiscard]] std::vector<double> density_grid(const ModeSuperposition& state, std::span<const double> xs,
                                               std::span<const double> ys, double t);

[[nodiscard]] double energy_spread(const ModeSuperposition& state);

}  // namespace pilotwave
