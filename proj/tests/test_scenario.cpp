#include <cmath>
#include <cstdlib>
#include <sstream>

#include "doctest.h"
#include "fdiff/common.hpp"
#include "fdiff/scenario.hpp"

using namespace fdiff;

namespace {

Scenario from_text(const std::string& text, const std::string& name = "t") {
  std::istringstream ss(text);
  return parse_scenario(ss, name);
}

const char* kSmallExact =
    "regime = raman-nath\nquantization = running-wave\nfield = fock\n"
    "photons = 2\nna = 1\nnd = 2\ng = 1\ne2q = 1\nkf = 0\n"
    "solver = exact\nt_max = 1\nt_steps = 20\n";

std::string csv_of(const RunResult& r) {
  std::ostringstream ss;
  write_csv(r, ss);
  return ss.str();
}

}  // namespace

TEST_CASE("scenario parser: keys, comments, sections, round trip") {
  Scenario sc = from_text(
      "# comment line\n[physics]\nregime = bragg\n"
      "quantization = running-wave\nfield = coherent\nphotons_q = 5\n"
      "photons_mq = 7\nna = 3\ng = 2\ne2q = 50\nkf = 0.1  # trailing\n"
      "[run]\nsolver = bragg-exact\nt_max = 2\nt_steps = 10\n"
      "channels = nsc, occupations\n");
  CHECK(sc.config.regime == Regime::Bragg);
  CHECK(sc.config.field.kind == FieldKind::Coherent);
  CHECK(sc.config.field.photons[0] == doctest::Approx(5.0));
  CHECK(sc.config.field.photons[1] == doctest::Approx(7.0));
  CHECK(sc.config.Na == 3);
  CHECK(sc.config.g == doctest::Approx(2.0));
  CHECK(sc.solver == "bragg-exact");
  CHECK(sc.t_steps == 10);
  CHECK(sc.channels == std::vector<std::string>{"nsc", "occupations"});

  // resolved() -> parse round trip reproduces the scenario.
  std::string text;
  for (const auto& [k, v] : sc.resolved())
    if (k != "channels" || v != "default")
      if (k != "secondary_solver" || v != "none") text += k + " = " + v + "\n";
  Scenario back = from_text(text);
  CHECK(back.solver == sc.solver);
  CHECK(back.config.Na == sc.config.Na);
  CHECK(back.config.field.photons[1] == sc.config.field.photons[1]);
  CHECK(back.channels == sc.channels);

  auto grid = sc.time_grid();
  REQUIRE(grid.size() == 11);
  CHECK(grid.front() == doctest::Approx(0.0));
  CHECK(grid.back() == doctest::Approx(2.0));
}

TEST_CASE("scenario parser: errors") {
  CHECK_THROWS_AS(from_text("bogus_key = 1\n"), ConfigError);
  CHECK_THROWS_AS(from_text("regime raman-nath\n"), ConfigError);
  CHECK_THROWS_AS(from_text("regime = sideways\n"), ConfigError);
  CHECK_THROWS_AS(from_text("na = 2.5\n"), ConfigError);
  CHECK_THROWS_AS(from_text("g = fast\n"), ConfigError);
  CHECK_THROWS_AS(from_text(std::string(kSmallExact) + "t_max = -1\n"),
                  ConfigError);
  CHECK_THROWS_AS(from_text(std::string(kSmallExact) + "tol = 1\n"),
                  ConfigError);
  CHECK_THROWS_AS(from_text(std::string(kSmallExact) + "channels = volts\n"),
                  ConfigError);
  CHECK_THROWS_AS(from_text(std::string(kSmallExact) + "solver = magic\n"),
                  ConfigError);
}

TEST_CASE("scenario validation: solver/regime compatibility") {
  // bragg-analytic needs the standing-wave Bragg setup.
  CHECK_THROWS_AS(
      from_text("regime = bragg\nquantization = running-wave\n"
                "solver = bragg-analytic\nphotons = 4\nna = 2\ne2q = 50\n"),
      SolverMismatchError);
  // Schwinger solvers need the running-wave Bragg setup.
  CHECK_THROWS_AS(
      from_text("regime = raman-nath\nquantization = running-wave\n"
                "solver = bragg-exact\nphotons = 4\nna = 2\n"),
      SolverMismatchError);
  CHECK_THROWS_AS(
      from_text("regime = bragg\nquantization = standing-wave\n"
                "solver = spectrum\nphotons_q = 4\nna = 2\ne2q = 50\n"),
      SolverMismatchError);
  // Moment closures cover the Raman-Nath regime only.
  CHECK_THROWS_AS(
      from_text("regime = bragg\nquantization = running-wave\n"
                "solver = moments2\nphotons = 4\nna = 2\ne2q = 50\n"),
      SolverMismatchError);
  // chi needs two running-wave field modes.
  CHECK_THROWS_AS(
      from_text("regime = raman-nath\nquantization = standing-wave\n"
                "solver = exact\nphotons_q = 4\nna = 2\nchannels = chi\n"),
      SolverMismatchError);
  // spectrum is defined for Fock fields.
  CHECK_THROWS_AS(
      from_text("regime = bragg\nquantization = running-wave\n"
                "field = coherent\nsolver = spectrum\nphotons = 4\nna = 2\n"
                "e2q = 50\n"),
      SolverMismatchError);
}

TEST_CASE("environment overrides") {
  Scenario sc = from_text(kSmallExact);
  setenv("FC_G", "3.5", 1);
  setenv("FC_T_STEPS", "7", 1);
  setenv("FC_CHANNELS", "occupations", 1);
  apply_env_overrides(sc);
  unsetenv("FC_G");
  unsetenv("FC_T_STEPS");
  unsetenv("FC_CHANNELS");
  CHECK(sc.config.g == doctest::Approx(3.5));
  CHECK(sc.t_steps == 7);
  CHECK(sc.channels == std::vector<std::string>{"occupations"});

  // A bad override must fail validation, not be silently dropped.
  Scenario sc2 = from_text(kSmallExact);
  setenv("FC_SOLVER", "bragg-exact", 1);  // regime stays raman-nath
  CHECK_THROWS_AS(apply_env_overrides(sc2), SolverMismatchError);
  unsetenv("FC_SOLVER");
}

TEST_CASE("packaged scenarios all load and validate") {
  const auto& names = packaged_scenario_names();
  CHECK(names.size() >= 20);
  for (const std::string& n : names) {
    CAPTURE(n);
    CHECK(is_packaged_scenario(n));
    Scenario sc = load_scenario(n);
    CHECK(sc.name == n);
  }
  CHECK_FALSE(is_packaged_scenario("fig99"));
  CHECK_THROWS_AS(load_scenario("fig99"), ConfigError);
}

TEST_CASE("run_scenario: exact run shape, conservation, determinism") {
  Scenario sc = from_text(kSmallExact);
  RunResult r = run_scenario(sc);
  REQUIRE(r.rows.size() == 21);
  REQUIRE(r.columns.size() >= 2);
  CHECK(r.columns[0] == "t");

  // Occupation columns stay in [0, 1] and start from the filled sea.
  for (const auto& row : r.rows)
    for (std::size_t c = 1; c < row.size(); ++c) {
      CHECK(row[c] >= -1e-10);
      CHECK(row[c] <= 1.0 + 1e-10);
    }

  auto get = [&](const std::string& k) -> std::string {
    for (const auto& [mk, mv] : r.manifest)
      if (mk == k) return mv;
    return "missing";
  };
  CHECK(std::stod(get("norm_drift_max")) < 1e-8);
  CHECK(std::stod(get("energy_drift_max")) < 1e-8);
  CHECK(std::stod(get("conserved_drift_max")) < 1e-8);
  CHECK(get("negative_occupation_time") == "none");

  // Byte-identical rerun.
  RunResult r2 = run_scenario(sc);
  CHECK(csv_of(r) == csv_of(r2));
}

TEST_CASE("run_scenario: moment closure emits trace diagnostics") {
  Scenario sc = from_text(
      "regime = raman-nath\nquantization = running-wave\nfield = fock\n"
      "photons = 2\nna = 1\nnd = 2\ng = 1\ne2q = 1\nkf = 0\n"
      "solver = moments2\nt_max = 1\nt_steps = 20\n");
  RunResult r = run_scenario(sc);
  CHECK(r.rows.size() == 21);
  bool has_trace = false;
  for (const auto& [k, v] : r.manifest)
    if (k == "trace_drift_max") {
      has_trace = true;
      CHECK(std::stod(v) < 1e-6);
    }
  CHECK(has_trace);
}

TEST_CASE("run_scenario: exact matches moments1 at t=0 via secondary") {
  Scenario sc = from_text(
      "regime = raman-nath\nquantization = running-wave\nfield = fock\n"
      "photons = 2\nna = 1\nnd = 2\ng = 1\ne2q = 1\nkf = 0\n"
      "solver = exact\nsecondary_solver = moments1\n"
      "channels = occupations\nt_max = 0.2\nt_steps = 10\n");
  RunResult r = run_scenario(sc);
  std::size_t n = (r.columns.size() - 1) / 2;
  REQUIRE(r.columns.size() == 1 + 2 * n);
  for (std::size_t c = 0; c < n; ++c)
    CHECK(r.columns[1 + n + c] == r.columns[1 + c] + "_moments1");
  // Identical initial data; closure accuracy over a short time.
  for (std::size_t c = 0; c < n; ++c) {
    CHECK(r.rows[0][1 + c] == doctest::Approx(r.rows[0][1 + n + c]).epsilon(1e-10));
    CHECK(std::abs(r.rows[2][1 + c] - r.rows[2][1 + n + c]) < 0.05);
  }
}

TEST_CASE("run_scenario: spectrum rows are (omega, weight)") {
  Scenario sc = from_text(
      "regime = bragg\nquantization = running-wave\nfield = fock\n"
      "photons = 2\nna = 2\ng = 1\ne2q = 50\nkf = 0\nsolver = spectrum\n");
  RunResult r = run_scenario(sc);
  REQUIRE(r.columns == std::vector<std::string>{"omega", "weight"});
  double wsum = 0.0;
  for (const auto& row : r.rows) wsum += row[1];
  CHECK(wsum == doctest::Approx(1.0).epsilon(1e-10));
  bool has_bands = false;
  for (const auto& [k, v] : r.manifest)
    if (k == "n_bands") has_bands = std::stoi(v) >= 1;
  CHECK(has_bands);
}

TEST_CASE("run_scenario: bragg-exact agrees with bragg-analytic (SW)") {
  // Single atom, standing-wave N=4: analytic Pendelloesung vs the bloch
  // channel is covered elsewhere; here check the analytic solver output
  // directly against its closed form through the scenario layer.
  Scenario sc = from_text(
      "regime = bragg\nquantization = standing-wave\nfield = fock\n"
      "photons_q = 4\nna = 1\ng = 1\ne2q = 50\nkf = 0\n"
      "solver = bragg-analytic\nchannels = nsc\nt_max = 1\nt_steps = 40\n");
  RunResult r = run_scenario(sc);
  for (const auto& row : r.rows) {
    double expect = std::pow(std::sin(2.0 * row[0]), 2);  // sin^2(gN t / 2)
    CHECK(row[1] == doctest::Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("sweep_scenario: shape, ordering, threading") {
  Scenario sc = from_text(
      "regime = bragg\nquantization = standing-wave\nfield = fock\n"
      "photons_q = 4\nna = 2\ng = 1\ne2q = 50\nkf = 0.1\n"
      "solver = bragg-analytic\nchannels = nsc\nt_max = 2\nt_steps = 50\n");
  std::vector<double> gs = {0.5, 1.0, 2.0};
  SweepResult sw = sweep_scenario(sc, "g", gs, 1);
  REQUIRE(sw.runs.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(sw.runs[i].first == doctest::Approx(gs[i]));
    CHECK(sw.runs[i].second.rows.size() == 51);
  }
  REQUIRE(sw.aggregate.rows.size() == 3);
  CHECK(sw.aggregate.columns[0] == "g");

  // Threaded sweep reproduces the serial aggregate byte for byte.
  SweepResult sw3 = sweep_scenario(sc, "g", gs, 3);
  CHECK(csv_of(sw.aggregate) == csv_of(sw3.aggregate));

  CHECK_THROWS_AS(sweep_scenario(sc, "solver", {1.0}, 1), ConfigError);
  CHECK_THROWS_AS(sweep_scenario(sc, "g", {}, 1), ConfigError);
}

TEST_CASE("sweep_scenario: spectrum aggregate columns") {
  Scenario sc = from_text(
      "regime = bragg\nquantization = running-wave\nfield = fock\n"
      "photons = 2\nna = 2\ng = 1\ne2q = 50\nkf = 0\nsolver = spectrum\n");
  SweepResult sw = sweep_scenario(sc, "photons", {2.0, 3.0}, 1);
  REQUIRE(sw.aggregate.rows.size() == 2);
  REQUIRE(sw.aggregate.columns.size() == 6);
  CHECK(sw.aggregate.columns[1] == "n_bands");
  for (const auto& row : sw.aggregate.rows) {
    CHECK(row[1] >= 1);        // bands found
    CHECK(row[2] > 0.99);      // weight captured
  }
}

TEST_CASE("CSV writer format") {
  RunResult r;
  r.columns = {"t", "x"};
  r.rows = {{0.0, 1.0 / 3.0}, {0.5, -2.0}};
  std::string csv = csv_of(r);
  CHECK(csv == "t,x\n0,0.33333333333333\n0.5,-2\n");
  std::ostringstream man;
  r.manifest = {{"alpha", "1"}, {"beta", "two"}};
  write_manifest(r, man);
  CHECK(man.str() == "alpha = 1\nbeta = two\n");
}
