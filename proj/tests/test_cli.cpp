#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "pilotwave/cli.hpp"
#include "pilotwave/io.hpp"
#include "pilotwave/wavefield.hpp"

using namespace pilotwave;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pilotwave_cli_" + name);
  fs::remove_all(p);
  return p;
}

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "pilotwave");
  args.push_back("--quiet");
  return cmd_dispatch(args);
}

std::vector<std::vector<double>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);  // header
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

}  // namespace

TEST_CASE("density at t = 0 reproduces the ground-state density") {
  const fs::path out = scratch("density");
  REQUIRE(run({"density", "--time", "0", "--rho0", "eq15", "--grid", "16x16", "--out", out.string()}) == 0);
  CHECK(slurp(out / "density.csv").rfind("x,y,f,rho,flagged\n", 0) == 0);
  const auto rows = read_csv(out / "density.csv");
  REQUIRE(rows.size() == 256);
  for (const auto& r : rows) {
    const double s = std::sin(r[0]) * std::sin(r[1]);
    CHECK(r[3] == doctest::Approx(4 / (kPi * kPi) * s * s).epsilon(1e-13));
    CHECK(r[4] == 0.0);
  }
  const auto side = read_json(out / "density.json");
  CHECK(side["time"] == 0.0);
  CHECK(side["grid"][0] == 16);
  CHECK(side["state_sha256"] == ModeSuperposition::box16().hash());
  CHECK(side.contains("integrator"));
}

TEST_CASE("every output is in the manifest with its hash") {
  const fs::path out = scratch("manifest");
  REQUIRE(run({"density", "--time", "0.3", "--grid", "16", "--epsilon", "pi/4", "--out", out.string()}) == 0);
  const auto man = read_json(out / "manifest.json");
  CHECK(man["command"] == "density");
  CHECK(man["tableau"] == "fehlberg-4(5)/propagate-5th");
  std::set<std::string> listed;
  for (const auto& o : man["outputs"]) {
    listed.insert(o["file"]);
    CHECK(o["sha256"] == sha256_file(out / o["file"].get<std::string>()));
  }
  for (const auto& entry : fs::directory_iterator(out))
    if (entry.path().filename() != "manifest.json") CHECK(listed.count(entry.path().filename().string()) == 1);
  CHECK(listed.count("cells_rho.csv") == 1);
  CHECK(listed.count("psi2.txt") == 1);
}

TEST_CASE("identical configs give byte-identical outputs") {
  const fs::path a = scratch("repro_a"), b = scratch("repro_b");
  REQUIRE(run({"density", "--time", "1", "--grid", "12", "--workers", "1", "--out", a.string()}) == 0);
  REQUIRE(run({"density", "--time", "1", "--grid", "12", "--workers", "3", "--out", b.string()}) == 0);
  CHECK(slurp(a / "density.csv") == slurp(b / "density.csv"));
  CHECK(slurp(a / "rho.txt") == slurp(b / "rho.txt"));
}

TEST_CASE("tau report") {
  const fs::path out = scratch("tau");
  REQUIRE(run({"tau", "--epsilon", "pi/32", "--out", out.string()}) == 0);
  const auto j = read_json(out / "tau.json");
  CHECK(j["tau_rough"].get<double>() == doctest::Approx(1.273).epsilon(1e-3));
  CHECK(slurp(out / "tau.json").find("1.273") != std::string::npos);
  CHECK(j["energy_spread_exact"].get<double>() == doctest::Approx(std::sqrt(16.125)));
}

TEST_CASE("hseries writes one row per sample and a report") {
  const fs::path out = scratch("hseries");
  REQUIRE(run({"hseries", "--epsilon", "pi/2", "--samples-per-cell", "2", "--horizon", "2pi", "--interval", "pi/4",
               "--out", out.string()}) == 0);
  const auto rows = read_csv(out / "hseries.csv");
  CHECK(rows.size() == 9);
  CHECK(slurp(out / "hseries.csv").rfind("t,hbar,err\n", 0) == 0);
  const auto rep = read_json(out / "hseries_report.json");
  CHECK(rep.contains("t_c"));
  CHECK(rep.contains("r_squared"));
  CHECK(rep["series"]["metadata"]["lattice_side"] == 4);
}

TEST_CASE("grid requests are rounded up to tile the cells") {
  const fs::path out = scratch("hseries_grid");
  REQUIRE(run({"hseries", "--epsilon", "pi/2", "--grid", "5", "--horizon", "pi/4", "--no-error-bars", "--out",
               out.string()}) == 0);
  const auto man = read_json(out / "manifest.json");
  CHECK(man["config"]["lattice_side"] == 6);
  CHECK(man["config"]["grid_rounded_from"] == 5);
}

TEST_CASE("trajectory and divergence outputs") {
  const fs::path out = scratch("traj");
  REQUIRE(run({"trajectory", "--x", "1", "--y", "2", "--t1", "pi/2", "--out", out.string()}) == 0);
  const auto rows = read_csv(out / "trajectory.csv");
  REQUIRE(rows.size() > 2);
  CHECK(rows.front()[0] == 0.0);
  CHECK(rows.front()[1] == 1.0);
  CHECK(rows.back()[0] == doctest::Approx(kPi / 2).epsilon(1e-15));
  CHECK(slurp(out / "trajectory.csv").rfind("t,x,y,h,delta_used\n", 0) == 0);

  REQUIRE(run({"diverge", "--pairs", "2", "--horizon", "1", "--samples", "5", "--out", out.string()}) == 0);
  CHECK(read_csv(out / "divergence.csv").size() == 10);
  CHECK(read_json(out / "divergence.json").contains("median_final_separation"));
}

TEST_CASE("run configuration file") {
  const fs::path out = scratch("config");
  fs::create_directories(out);
  std::ofstream(out / "run.json") << R"({"grid": "8x8", "time": "pi/8", "integrator": {"delta_start": 1e-7}, "horizon": "9"})";
  REQUIRE(run({"density", "--config", (out / "run.json").string(), "--out", out.string()}) == 0);
  const auto man = read_json(out / "manifest.json");
  CHECK(man["config"]["grid"][0] == 8);
  CHECK(man["config"]["time"] == doctest::Approx(kPi / 8));
  CHECK(man["config"]["integrator"]["delta_start"] == 1e-7);
  // Command-line flags override the file.
  REQUIRE(run({"density", "--config", (out / "run.json").string(), "--grid", "4", "--out", out.string()}) == 0);
  CHECK(read_json(out / "manifest.json")["config"]["grid"][0] == 4);
}

TEST_CASE("exit codes") {
  const fs::path out = scratch("exit");
  CHECK(run({}) == kExitConfig);
  CHECK(run({"density", "--bogus"}) == kExitConfig);
  CHECK(run({"hseries", "--epsilon", "pi/3.5", "--out", out.string()}) == kExitConfig);
  CHECK(run({"density", "--grid", "axb", "--out", out.string()}) == kExitConfig);
  CHECK(run({"density", "--rho0", "/nonexistent.json", "--out", out.string()}) == kExitConfig);
  CHECK(run({"density", "--kernel", "neon", "--out", out.string()}) == kExitConfig);
  // Nothing can be integrated with a one-step cap.
  CHECK(run({"density", "--time", "2", "--grid", "4", "--max-steps", "1", "--out", out.string()}) == kExitNumerical);
  CHECK(run({"selftest"}) == kExitOk);
}
