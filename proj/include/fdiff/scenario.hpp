#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "fdiff/bragg.hpp"
#include "fdiff/config.hpp"

namespace fdiff {

/// One fully resolved run request: physics parameters plus solver and
/// output selection.  Parsed from flat key=value text ([section] headers
/// are cosmetic) or taken from the packaged table.
struct Scenario {
  std::string name = "custom";
  std::string solver = "exact";
  // Optional second solver run on the same grid; its channels are
  // appended with a suffix (chi_re_moments2, ...).
  std::string secondary_solver;

  SimulationConfig config;
  double t_max = 1.0;
  int t_steps = 100;
  double tol = 1e-10;

  // Coherent running-wave Bragg treatment (sector-projection keeps the
  // intra-sector m superposition; fock-average discards it).
  CoherentBraggMode bragg_coherent_mode = CoherentBraggMode::SectorProjection;

  // Channel selection; empty = solver defaults.  Known channels:
  // occupations, nsc, chi, third-ffa, third-faa.
  std::vector<std::string> channels;

  double weight_threshold = 1e-3;  // spectrum band extraction

  std::vector<double> time_grid() const;

  /// Applies one key=value assignment.  Throws ConfigError on unknown
  /// keys or unparsable values.
  void set(const std::string& key, const std::string& value);

  /// Validates ranges and solver/regime/quantization compatibility.
  /// Throws ConfigError or SolverMismatchError.
  void validate() const;

  /// All resolved parameters as ordered key=value pairs.
  std::vector<std::pair<std::string, std::string>> resolved() const;
};

Scenario parse_scenario(std::istream& in, const std::string& name);
Scenario load_scenario(const std::string& name_or_path);

const std::vector<std::string>& packaged_scenario_names();
bool is_packaged_scenario(const std::string& name);

/// Overrides scenario fields from FC_<UPPERCASED KEY> environment
/// variables (e.g. FC_FIELD, FC_T_MAX).
void apply_env_overrides(Scenario& sc);

struct RunResult {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;  // row-major, rows[i].size() == columns.size()
  std::vector<std::pair<std::string, std::string>> manifest;
};

RunResult run_scenario(const Scenario& sc);

struct SweepResult {
  RunResult aggregate;  // one summary row per axis value
  std::vector<std::pair<double, RunResult>> runs;  // per-value full runs
};

SweepResult sweep_scenario(const Scenario& base, const std::string& axis,
                           const std::vector<double>& values,
                           int threads = 1);

/// Comma-separated CSV, header row, >= 12 significant digits, LF line
/// endings; byte-identical across reruns of the same scenario.
void write_csv(const RunResult& result, std::ostream& out);
void write_manifest(const RunResult& result, std::ostream& out);

}  // namespace fdiff
