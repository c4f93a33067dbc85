#include "pilotwave/wavefield.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <utility>

#include "pilotwave/errors.hpp"
#include "pilotwave/io.hpp"

namespace pilotwave {

namespace {

constexpr double kEigenNorm = 2.0 / kPi;

kernels::PackedModes pack(std::span<const Mode> modes) {
  kernels::PackedModes pm;
  for (const Mode& md : modes) {
    pm.m_max = std::max(pm.m_max, md.m);
    pm.n_max = std::max(pm.n_max, md.n);
  }
  pm.m_stride = (pm.m_max + 3) / 4 * 4;
  pm.re.assign(static_cast<std::size_t>(pm.m_stride) * pm.n_max, 0.0);
  pm.im.assign(pm.re.size(), 0.0);
  for (const Mode& md : modes) {
    pm.re[pm.index(md.m, md.n)] = md.amplitude * std::cos(md.phase);
    pm.im[pm.index(md.m, md.n)] = md.amplitude * std::sin(md.phase);
  }
  return pm;
}

}  // namespace

double distance(Position a, Position b) { return std::hypot(a.x - b.x, a.y - b.y); }

bool in_box(Position p) { return p.x >= 0.0 && p.x <= kBoxSide && p.y >= 0.0 && p.y <= kBoxSide; }

ModeSuperposition::ModeSuperposition(std::vector<Mode> modes) : modes_(std::move(modes)) {
  if (modes_.empty()) throw ConfigError("mode table is empty");
  std::set<std::pair<int, int>> seen;
  double norm = 0;
  for (const Mode& md : modes_) {
    if (md.m < 1 || md.n < 1) throw ConfigError("mode quantum numbers must be >= 1");
    if (md.m > kernels::kMaxQuantumNumber || md.n > kernels::kMaxQuantumNumber)
      throw ConfigError("mode quantum numbers above 64 are not supported");
    if (!(md.amplitude >= 0.0) || !std::isfinite(md.amplitude) || !std::isfinite(md.phase))
      throw ConfigError("mode amplitude must be finite and nonnegative, phase finite");
    if (!seen.emplace(md.m, md.n).second)
      throw ConfigError("duplicate mode (" + std::to_string(md.m) + ", " + std::to_string(md.n) + ")");
    norm += md.amplitude * md.amplitude;
  }
  if (std::abs(norm - 1.0) > 1e-12) throw ConfigError("mode amplitudes are not normalised (sum a^2 != 1)");
  packed_ = pack(modes_);
}

ModeSuperposition ModeSuperposition::box16() {
  // theta_mn to four decimals, row m, column n.
  static constexpr double kPhases[4][4] = {
      {5.1306, 2.0056, 4.1172, 3.3871},
      {6.2013, 4.6598, 1.8770, 4.3033},
      {4.0145, 6.1142, 5.4401, 1.9292},
      {3.4015, 6.2109, 6.0370, 5.9159},
  };
  std::vector<Mode> modes;
  for (int m = 1; m <= 4; ++m)
    for (int n = 1; n <= 4; ++n) modes.push_back({m, n, 0.25, kPhases[m - 1][n - 1]});
  return ModeSuperposition(std::move(modes));
}

ModeSuperposition ModeSuperposition::from_json(const nlohmann::json& doc) {
  const nlohmann::json* table = &doc;
  if (doc.is_object()) {
    if (!doc.contains("modes")) throw ConfigError("mode document has no 'modes' array");
    table = &doc.at("modes");
  }
  if (!table->is_array()) throw ConfigError("mode table must be a JSON array");
  std::vector<Mode> modes;
  try {
    for (const auto& row : *table) {
      modes.push_back({row.at("m").get<int>(), row.at("n").get<int>(), row.at("amplitude").get<double>(),
                       row.at("phase").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed mode entry: ") + e.what());
  }
  return ModeSuperposition(std::move(modes));
}

ModeSuperposition ModeSuperposition::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read mode table '" + path + "'");
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("mode table '" + path + "' is not valid JSON: " + e.what());
  }
}

nlohmann::json ModeSuperposition::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const Mode& md : modes_)
    rows.push_back({{"m", md.m}, {"n", md.n}, {"amplitude", md.amplitude}, {"phase", md.phase}});
  return {{"format", "pilotwave-modes"}, {"version", 1}, {"box_side", "pi"}, {"modes", rows}};
}

std::string ModeSuperposition::hash() const { return sha256_hex(to_json().dump()); }

double mode_value(const Mode& mode, Position pos) {
  return kEigenNorm * std::sin(mode.m * pos.x) * std::sin(mode.n * pos.y);
}

std::complex<double> psi_at(const ModeSuperposition& state, Position pos, double t) {
  kernels::PointField f;
  kernels::active_kernels().point(state.packed(), pos.x, pos.y, t, f);
  return f.psi;
}

FieldSample field_sample(const ModeSuperposition& state, Position pos, double t, double node_floor) {
  kernels::PointField f;
  kernels::active_kernels().point(state.packed(), pos.x, pos.y, t, f);
  FieldSample s;
  s.psi = f.psi;
  s.density = std::norm(f.psi);
  s.grad_psi = {f.dpsi_dx, f.dpsi_dy};
  if (!(s.density >= node_floor)) {
    throw NodeSingularity("|psi|^2 = " + std::to_string(s.density) + " below node floor at (" +
                          std::to_string(pos.x) + ", " + std::to_string(pos.y) + ")");
  }
  s.phase = std::arg(f.psi);
  s.velocity = {std::imag(std::conj(f.psi) * f.dpsi_dx) / s.density,
                std::imag(std::conj(f.psi) * f.dpsi_dy) / s.density};
  return s;
}

FieldDerivatives field_derivatives(const ModeSuperposition& state, Position pos, double t) {
  using namespace std::complex_literals;
  FieldDerivatives d{};
  for (const Mode& md : state.modes()) {
    const std::complex<double> c = md.amplitude * std::exp(1i * (md.phase - md.energy() * t)) * kEigenNorm;
    const double m = md.m, n = md.n;
    const double sx = std::sin(m * pos.x), cx = std::cos(m * pos.x);
    const double sy = std::sin(n * pos.y), cy = std::cos(n * pos.y);
    d.psi += c * sx * sy;
    d.psi_t += -1i * md.energy() * c * sx * sy;
    d.psi_x += c * m * cx * sy;
    d.psi_y += c * n * sx * cy;
    d.psi_xx += -c * m * m * sx * sy;
    d.psi_xy += c * m * n * cx * cy;
    d.psi_yy += -c * n * n * sx * sy;
  }
  return d;
}

void density_grid(const ModeSuperposition& state, std::span<const double> xs, std::span<const double> ys,
                  double t, std::span<double> out) {
  if (out.size() != xs.size() * ys.size()) throw ConfigError("density_grid output size mismatch");
  kernels::active_kernels().density_grid(state.packed(), xs, ys, t, out);
}

std::vector<double> density_grid(const ModeSuperposition& state, std::span<const double> xs,
                                 std::span<const double> ys, double t) {
  std::vector<double> out(xs.size() * ys.size());
  density_grid(state, xs, ys, t, out);
  return out;
}

double energy_spread(const ModeSuperposition& state) {
  double w = 0, mean = 0, second = 0;
  for (const Mode& md : state.modes()) {
    const double p = md.amplitude * md.amplitude;
    w += p;
    mean += p * md.energy();
    second += p * md.energy() * md.energy();
  }
  mean /= w;
  second /= w;
  return std::sqrt(std::max(0.0, second - mean * mean));
}

}  // namespace pilotwave
