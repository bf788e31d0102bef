#include "fdiff/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <future>
#include <map>
#include <optional>
#include <sstream>

#include "fdiff/hamiltonian.hpp"
#include "fdiff/modes.hpp"
#include "fdiff/moments.hpp"
#include "fdiff/observables.hpp"
#include "fdiff/propagator.hpp"

namespace fdiff {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(c));
  return s;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("bad numeric value for '" + key + "': " + v);
  }
}

int parse_int(const std::string& key, const std::string& v) {
  double x = parse_double(key, v);
  int i = static_cast<int>(std::llround(x));
  if (std::abs(x - i) > 1e-9)
    throw ConfigError("'" + key + "' must be an integer, got " + v);
  return i;
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.14g", x);
  return buf;
}

const std::vector<std::string> kSolvers = {
    "exact",        "moments1",       "moments2", "bragg-exact",
    "bragg-analytic", "bloch",        "spectrum"};

const std::vector<std::string> kChannels = {"occupations", "nsc", "chi",
                                            "third-ffa", "third-faa"};

// Scalar keys an axis sweep may vary.
const std::vector<std::string> kNumericKeys = {
    "g",       "e2q",     "kf",      "na",     "nd",
    "photons", "photons_q", "photons_mq", "t_max", "t_steps",
    "tol",     "truncation_epsilon", "weight_threshold"};

}  // namespace

std::vector<double> Scenario::time_grid() const {
  std::vector<double> t(t_steps + 1);
  for (int i = 0; i <= t_steps; ++i) t[i] = t_max * i / t_steps;
  return t;
}

void Scenario::set(const std::string& raw_key, const std::string& raw_value) {
  std::string key = lower(trim(raw_key));
  std::string value = trim(raw_value);
  std::string lv = lower(value);

  if (key == "name") {
    name = value;
  } else if (key == "solver") {
    solver = lv;
  } else if (key == "secondary_solver") {
    secondary_solver = lv == "none" ? "" : lv;
  } else if (key == "regime") {
    if (lv == "raman-nath")
      config.regime = Regime::RamanNath;
    else if (lv == "bragg")
      config.regime = Regime::Bragg;
    else
      throw ConfigError("regime must be raman-nath or bragg, got " + value);
  } else if (key == "quantization") {
    if (lv == "running-wave")
      config.quantization = Quantization::RunningWave;
    else if (lv == "standing-wave")
      config.quantization = Quantization::StandingWave;
    else
      throw ConfigError(
          "quantization must be running-wave or standing-wave, got " + value);
  } else if (key == "field") {
    if (lv == "fock")
      config.field.kind = FieldKind::Fock;
    else if (lv == "coherent")
      config.field.kind = FieldKind::Coherent;
    else
      throw ConfigError("field must be fock or coherent, got " + value);
  } else if (key == "photons") {
    double n = parse_double(key, value);
    config.field.photons = {n, n};
  } else if (key == "photons_q") {
    config.field.photons[0] = parse_double(key, value);
  } else if (key == "photons_mq") {
    config.field.photons[1] = parse_double(key, value);
  } else if (key == "phase_q") {
    config.field.phases[0] = parse_double(key, value);
  } else if (key == "phase_mq") {
    config.field.phases[1] = parse_double(key, value);
  } else if (key == "truncation_epsilon") {
    config.field.truncation_epsilon = parse_double(key, value);
  } else if (key == "g") {
    config.g = parse_double(key, value);
  } else if (key == "e2q") {
    config.E2q = parse_double(key, value);
  } else if (key == "kf") {
    config.kF = parse_double(key, value);
  } else if (key == "na") {
    config.Na = parse_int(key, value);
  } else if (key == "nd") {
    config.nd = parse_int(key, value);
  } else if (key == "t_max") {
    t_max = parse_double(key, value);
  } else if (key == "t_steps") {
    t_steps = parse_int(key, value);
  } else if (key == "tol") {
    tol = parse_double(key, value);
  } else if (key == "weight_threshold") {
    weight_threshold = parse_double(key, value);
  } else if (key == "coherent_bragg_mode") {
    if (lv == "sector-projection")
      bragg_coherent_mode = CoherentBraggMode::SectorProjection;
    else if (lv == "fock-average")
      bragg_coherent_mode = CoherentBraggMode::FockAverage;
    else
      throw ConfigError(
          "coherent_bragg_mode must be sector-projection or fock-average");
  } else if (key == "channels") {
    channels = split_list(lv);
  } else {
    throw ConfigError("unknown scenario key: " + raw_key);
  }
}

void Scenario::validate() const {
  if (std::find(kSolvers.begin(), kSolvers.end(), solver) == kSolvers.end())
    throw ConfigError("unknown solver: " + solver);
  if (!secondary_solver.empty() &&
      std::find(kSolvers.begin(), kSolvers.end(), secondary_solver) ==
          kSolvers.end())
    throw ConfigError("unknown secondary solver: " + secondary_solver);
  if (t_max <= 0) throw ConfigError("t_max must be > 0");
  if (t_steps < 1) throw ConfigError("t_steps must be >= 1");
  if (tol < 1e-12 || tol > 1e-6)
    throw ConfigError("tol must be in [1e-12, 1e-6]");
  for (const std::string& c : channels)
    if (std::find(kChannels.begin(), kChannels.end(), c) == kChannels.end())
      throw ConfigError("unknown channel: " + c);

  SimulationConfig probe = config;
  probe.t_grid = {0.0, t_max};
  probe.validate();

  bool rw = config.quantization == Quantization::RunningWave;
  bool bragg = config.regime == Regime::Bragg;
  auto check = [&](const std::string& s) {
    if (s == "bragg-analytic" && (rw || !bragg))
      throw SolverMismatchError(
          "bragg-analytic requires standing-wave quantization in the Bragg "
          "regime");
    if ((s == "bragg-exact" || s == "spectrum" || s == "bloch") &&
        (!rw || !bragg))
      throw SolverMismatchError(
          s + " requires running-wave quantization in the Bragg regime");
    if ((s == "moments1" || s == "moments2") && bragg)
      throw SolverMismatchError(
          s + " handles the Raman-Nath regime only (use the bragg solvers)");
  };
  check(solver);
  if (!secondary_solver.empty()) check(secondary_solver);

  if (solver == "spectrum" && config.field.kind != FieldKind::Fock)
    throw SolverMismatchError("spectrum requires a Fock field");
  for (const std::string& c : channels) {
    if (c == "chi" && !rw)
      throw SolverMismatchError("chi is undefined for standing-wave fields");
    if ((c == "third-ffa" || c == "third-faa") && solver != "exact")
      throw SolverMismatchError("third-order channels require solver=exact");
  }
}

std::vector<std::pair<std::string, std::string>> Scenario::resolved() const {
  std::vector<std::pair<std::string, std::string>> kv;
  kv.emplace_back("name", name);
  kv.emplace_back("solver", solver);
  kv.emplace_back("secondary_solver",
                  secondary_solver.empty() ? "none" : secondary_solver);
  kv.emplace_back("regime", config.regime == Regime::RamanNath ? "raman-nath"
                                                               : "bragg");
  kv.emplace_back("quantization",
                  config.quantization == Quantization::RunningWave
                      ? "running-wave"
                      : "standing-wave");
  kv.emplace_back("field",
                  config.field.kind == FieldKind::Fock ? "fock" : "coherent");
  kv.emplace_back("photons_q", fmt(config.field.photons[0]));
  kv.emplace_back("photons_mq", fmt(config.field.photons[1]));
  kv.emplace_back("phase_q", fmt(config.field.phases[0]));
  kv.emplace_back("phase_mq", fmt(config.field.phases[1]));
  kv.emplace_back("truncation_epsilon",
                  fmt(config.field.truncation_epsilon));
  kv.emplace_back("g", fmt(config.g));
  kv.emplace_back("e2q", fmt(config.E2q));
  kv.emplace_back("kf", fmt(config.kF));
  kv.emplace_back("na", std::to_string(config.Na));
  kv.emplace_back("nd", std::to_string(config.nd));
  kv.emplace_back("t_max", fmt(t_max));
  kv.emplace_back("t_steps", std::to_string(t_steps));
  kv.emplace_back("tol", fmt(tol));
  kv.emplace_back("weight_threshold", fmt(weight_threshold));
  kv.emplace_back("coherent_bragg_mode",
                  bragg_coherent_mode == CoherentBraggMode::SectorProjection
                      ? "sector-projection"
                      : "fock-average");
  std::string ch;
  for (const std::string& c : channels) ch += (ch.empty() ? "" : ",") + c;
  kv.emplace_back("channels", ch.empty() ? "default" : ch);
  return kv;
}

Scenario parse_scenario(std::istream& in, const std::string& name) {
  Scenario sc;
  sc.name = name;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') continue;  // section
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) +
                        ": expected key = value, got '" + line + "'");
    sc.set(line.substr(0, eq), line.substr(eq + 1));
  }
  sc.validate();
  return sc;
}

namespace {

// ---------------------------------------------------------------------
// Packaged scenarios.

const std::map<std::string, std::string>& packaged_table() {
  static const std::map<std::string, std::string> table = {
      // Raman-Nath running wave, two atoms: exact / first-order /
      // second-order closure for Fock (3,3) and coherent (3,3) fields.
      {"fig2a",
       "[physics]\nregime = raman-nath\nquantization = running-wave\n"
       "field = fock\nphotons = 3\nna = 2\nnd = 3\ng = 1\ne2q = 1\nkf = 0.1\n"
       "[run]\nsolver = exact\nt_max = 6\nt_steps = 300\n"
       "channels = occupations,chi\n"},
      {"fig2b",
       "[physics]\nregime = raman-nath\nquantization = running-wave\n"
       "field = coherent\nphotons = 3\nna = 2\nnd = 3\ng = 1\ne2q = 1\n"
       "kf = 0.1\n[run]\nsolver = exact\nt_max = 6\nt_steps = 300\n"
       "channels = occupations,chi\n"},
      {"fig2c",
       "[physics]\nregime = raman-nath\nquantization = running-wave\n"
       "field = fock\nphotons = 3\nna = 2\nnd = 3\ng = 1\ne2q = 1\nkf = 0.1\n"
       "[run]\nsolver = moments1\nt_max = 6\nt_steps = 300\n"},
      {"fig2d",
       "[physics]\nregime = raman-nath\nquantization = running-wave\n"
       "field = coherent\nphotons = 3\nna = 2\nnd = 3\ng = 1\ne2q = 1\n"
       "kf = 0.1\n[run]\nsolver = moments1\nt_max = 6\nt_steps = 300\n"},
      {"fig2e",
       "[physics]\nregime = raman-nath\nquantization = running-wave\n"
       "field = fock\nphotons = 3\nna = 2\nnd = 3\ng = 1\ne2q = 1\nkf = 0.1\n"
       "[run]\nsolver = moments2\nt_max = 6\nt_steps = 300\n"},
      {"fig2f",
       "[physics]\nregime = raman-nath\nquantization = running-wave\n"
       "field = coherent\nphotons = 3\nna = 2\nnd = 3\ng = 1\ne2q = 1\n"
       "kf = 0.1\n[run]\nsolver = moments2\nt_max = 6\nt_steps = 300\n"},
      // Third-order correlators, exact vs the pair factorization, on the
      // fig2 parameters (override field via FC_FIELD for the coherent
      // curves).
      {"fig3",
       "[physics]\nregime = raman-nath\nquantization = running-wave\n"
       "field = fock\nphotons = 3\nna = 2\nnd = 2\ng = 1\ne2q = 1\nkf = 0.1\n"
       "[run]\nsolver = exact\nt_max = 3\nt_steps = 150\n"
       "channels = third-ffa\n"},
      {"fig4",
       "[physics]\nregime = raman-nath\nquantization = running-wave\n"
       "field = fock\nphotons = 3\nna = 2\nnd = 2\ng = 1\ne2q = 1\nkf = 0.1\n"
       "[run]\nsolver = exact\nt_max = 3\nt_steps = 150\n"
       "channels = third-faa\n"},
      // Field-atom cross correlation chi(t), exact plus the second-order
      // closure, coherent field.
      {"fig5",
       "[physics]\nregime = raman-nath\nquantization = running-wave\n"
       "field = coherent\nphotons = 3\nna = 2\nnd = 2\ng = 1\ne2q = 1\n"
       "kf = 0.1\n[run]\nsolver = exact\nsecondary_solver = moments2\n"
       "t_max = 3\nt_steps = 150\nchannels = chi\n"},
      // Bragg running wave, Fock (6,6), five atoms: N_sc with and without
      // dephasing.
      {"fig6a",
       "[physics]\nregime = bragg\nquantization = running-wave\n"
       "field = fock\nphotons = 6\nna = 5\ng = 1\ne2q = 50\nkf = 0.1\n"
       "[run]\nsolver = bragg-exact\nt_max = 50\nt_steps = 2500\n"
       "channels = nsc\n"},
      {"fig6b",
       "[physics]\nregime = bragg\nquantization = running-wave\n"
       "field = fock\nphotons = 6\nna = 5\ng = 1\ne2q = 50\nkf = 0\n"
       "[run]\nsolver = bragg-exact\nt_max = 50\nt_steps = 2500\n"
       "channels = nsc\n"},
      // Standing-wave Fock field, 200 atoms, analytic summation.
      {"fig6c",
       "[physics]\nregime = bragg\nquantization = standing-wave\n"
       "field = fock\nphotons_q = 6\nna = 200\ng = 1\ne2q = 50\nkf = 0.1\n"
       "[run]\nsolver = bragg-analytic\nt_max = 5\nt_steps = 2000\n"
       "channels = nsc\n"},
      // Spectrum projection of the Bragg running-wave initial state.
      {"fig7",
       "[physics]\nregime = bragg\nquantization = running-wave\n"
       "field = fock\nphotons = 6\nna = 5\ng = 1\ne2q = 50\nkf = 0.1\n"
       "[run]\nsolver = spectrum\nweight_threshold = 1e-3\n"},
      // Photon-number scaling base for the inverse-revival sweep
      // (run `sweep fig8 --axis photons --values 6,8,...`).
      {"fig8",
       "[physics]\nregime = bragg\nquantization = running-wave\n"
       "field = fock\nphotons = 6\nna = 5\ng = 1\ne2q = 50\nkf = 0.1\n"
       "[run]\nsolver = spectrum\nweight_threshold = 1e-3\n"},
      // Bragg coherent fields, per-atom scattering probabilities.
      {"fig9a",
       "[physics]\nregime = bragg\nquantization = running-wave\n"
       "field = coherent\nphotons = 6\nna = 5\ng = 1\ne2q = 50\nkf = 0.1\n"
       "[run]\nsolver = bragg-exact\nt_max = 6\nt_steps = 1200\n"},
      {"fig9b",
       "[physics]\nregime = bragg\nquantization = standing-wave\n"
       "field = coherent\nphotons_q = 12\nna = 5\ng = 1\ne2q = 50\nkf = 0.1\n"
       "[run]\nsolver = bragg-analytic\nt_max = 6\nt_steps = 1200\n"},
      // Bragg coherent N_sc with and without dephasing; t covers two
      // standing-wave revival periods 2*pi/g.
      {"fig10a",
       "[physics]\nregime = bragg\nquantization = running-wave\n"
       "field = coherent\nphotons = 6\nna = 5\ng = 1\ne2q = 50\nkf = 0.1\n"
       "[run]\nsolver = bragg-exact\nt_max = 13\nt_steps = 2600\n"
       "channels = nsc\n"},
      {"fig10b",
       "[physics]\nregime = bragg\nquantization = running-wave\n"
       "field = coherent\nphotons = 6\nna = 5\ng = 1\ne2q = 50\nkf = 0\n"
       "[run]\nsolver = bragg-exact\nt_max = 13\nt_steps = 2600\n"
       "channels = nsc\n"},
      {"fig10c",
       "[physics]\nregime = bragg\nquantization = standing-wave\n"
       "field = coherent\nphotons_q = 12\nna = 5\ng = 1\ne2q = 50\nkf = 0.1\n"
       "[run]\nsolver = bragg-analytic\nt_max = 13\nt_steps = 2600\n"
       "channels = nsc\n"},
      {"fig10d",
       "[physics]\nregime = bragg\nquantization = standing-wave\n"
       "field = coherent\nphotons_q = 12\nna = 5\ng = 1\ne2q = 50\nkf = 0\n"
       "[run]\nsolver = bragg-analytic\nt_max = 13\nt_steps = 2600\n"
       "channels = nsc\n"},
      // Semiclassical Bloch-vector model on the fig9a parameters.
      {"fig11",
       "[physics]\nregime = bragg\nquantization = running-wave\n"
       "field = coherent\nphotons = 6\nna = 5\ng = 1\ne2q = 50\nkf = 0.1\n"
       "[run]\nsolver = bloch\nt_max = 6\nt_steps = 1200\n"},
      // Raman-Nath standing wave, two atoms, Fock N=6 / coherent Nbar=6.
      {"fig12",
       "[physics]\nregime = raman-nath\nquantization = standing-wave\n"
       "field = fock\nphotons_q = 6\nna = 2\nnd = 8\ng = 1\ne2q = 1\n"
       "kf = 0.1\n[run]\nsolver = exact\nt_max = 2\nt_steps = 200\n"},
      {"fig13",
       "[physics]\nregime = raman-nath\nquantization = standing-wave\n"
       "field = coherent\nphotons_q = 6\nna = 2\nnd = 8\ng = 1\ne2q = 1\n"
       "kf = 0.1\n[run]\nsolver = exact\nt_max = 2\nt_steps = 200\n"},
  };
  return table;
}

}  // namespace

const std::vector<std::string>& packaged_scenario_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& [k, _] : packaged_table()) v.push_back(k);
    return v;
  }();
  return names;
}

bool is_packaged_scenario(const std::string& name) {
  return packaged_table().count(name) > 0;
}

Scenario load_scenario(const std::string& name_or_path) {
  auto it = packaged_table().find(name_or_path);
  if (it != packaged_table().end()) {
    std::istringstream ss(it->second);
    Scenario sc = parse_scenario(ss, name_or_path);
    return sc;
  }
  std::ifstream in(name_or_path);
  if (!in)
    throw ConfigError("no packaged scenario or readable file named '" +
                      name_or_path + "'");
  std::string stem = name_or_path;
  std::size_t slash = stem.find_last_of('/');
  if (slash != std::string::npos) stem = stem.substr(slash + 1);
  std::size_t dot = stem.find_last_of('.');
  if (dot != std::string::npos && dot > 0) stem = stem.substr(0, dot);
  return parse_scenario(in, stem);
}

void apply_env_overrides(Scenario& sc) {
  static const std::vector<std::string> keys = {
      "solver",      "secondary_solver", "regime",  "quantization",
      "field",       "photons",          "photons_q", "photons_mq",
      "phase_q",     "phase_mq",         "truncation_epsilon",
      "g",           "e2q",              "kf",      "na",
      "nd",          "t_max",            "t_steps", "tol",
      "weight_threshold", "coherent_bragg_mode",    "channels"};
  for (const std::string& key : keys) {
    std::string env = "FC_";
    for (char c : key) env += static_cast<char>(std::toupper(c));
    if (const char* v = std::getenv(env.c_str())) sc.set(key, v);
  }
  sc.validate();
}

// -----------------------------------------------------------------------
// Solver backends.

namespace {

struct Series {
  std::vector<std::string> columns;             // excluding "t"
  std::vector<std::vector<double>> values;      // per column, per time
  std::vector<std::pair<std::string, std::string>> manifest;
};

void add_manifest(Series& s, const std::string& k, const std::string& v) {
  s.manifest.emplace_back(k, v);
}

std::vector<std::string> default_channels(const Scenario& sc,
                                          const std::string& solver) {
  if (!sc.channels.empty()) return sc.channels;
  bool bragg = sc.config.regime == Regime::Bragg;
  if (solver == "exact" || solver == "moments1" || solver == "moments2") {
    std::vector<std::string> ch = {"occupations"};
    if (bragg) ch.push_back("nsc");
    return ch;
  }
  return {"nsc", "occupations"};  // bragg-exact / bragg-analytic / bloch
}

std::string momentum_label(double p) { return "P_p" + fmt(p); }

void record_occupation_range(Series& s, double lo, double hi,
                             std::optional<double> first_negative) {
  add_manifest(s, "min_occupation", fmt(lo));
  add_manifest(s, "max_occupation", fmt(hi));
  if (first_negative) {
    add_manifest(s, "negative_occupation_time", fmt(*first_negative));
    add_manifest(s, "warning",
                 "negative occupation encountered at t = " +
                     fmt(*first_negative));
  } else {
    add_manifest(s, "negative_occupation_time", "none");
  }
}

// --- exact (full Fock space, Raman-Nath or Bragg) ----------------------

Series run_exact(const Scenario& sc, const std::vector<double>& times) {
  Series out;
  const SimulationConfig& cfg = sc.config;
  auto table = build_mode_table(cfg);
  QuantumState qs0 = initial_state(table, cfg);

  PropagateOptions opts;
  opts.tol = sc.tol;

  std::vector<Trajectory> trajs(qs0.sectors.size());
  double norm_drift = 0.0, energy_drift = 0.0, conserved_drift = 0.0;
  int max_dim = 0;
  for (std::size_t s = 0; s < qs0.sectors.size(); ++s) {
    const auto& sec = qs0.sectors[s];
    max_dim = std::max(max_dim, sec.basis.dim());
    auto H = build_hamiltonian(sec.basis, table, cfg);
    trajs[s] = propagate(H, sec.amps, times, opts);
    auto conserved = conserved_operators(sec.basis, table, cfg);
    double e0 = 0.0;
    std::vector<double> c0(conserved.size(), 0.0);
    for (std::size_t i = 0; i < times.size(); ++i) {
      const StateVector& psi = trajs[s].states[i];
      norm_drift = std::max(norm_drift, std::abs(psi.norm() - 1.0));
      double e = psi.dot(H.apply(psi)).real();
      if (i == 0) e0 = e;
      energy_drift = std::max(energy_drift, std::abs(e - e0));
      for (std::size_t c = 0; c < conserved.size(); ++c) {
        double v = 0.0;
        for (int r = 0; r < psi.size(); ++r)
          v += conserved[c].values[r] * std::norm(psi[r]);
        if (i == 0) c0[c] = v;
        conserved_drift = std::max(conserved_drift, std::abs(v - c0[c]));
      }
    }
  }
  add_manifest(out, "sectors", std::to_string(qs0.sectors.size()));
  add_manifest(out, "max_sector_dim", std::to_string(max_dim));
  add_manifest(out, "norm_drift_max", fmt(norm_drift));
  add_manifest(out, "energy_drift_max", fmt(energy_drift));
  add_manifest(out, "conserved_drift_max", fmt(conserved_drift));

  auto snapshot = [&](std::size_t i) {
    QuantumState qs = qs0;
    for (std::size_t s = 0; s < qs.sectors.size(); ++s)
      qs.sectors[s].amps = trajs[s].states[i];
    return qs;
  };

  double occ_lo = 1.0, occ_hi = 0.0;
  std::optional<double> first_negative;
  auto channels = default_channels(sc, "exact");

  for (const std::string& ch : channels) {
    if (ch == "occupations") {
      for (int m = 0; m < table.n_modes(); ++m)
        out.columns.push_back(momentum_label(table.mode_momenta[m]));
      std::vector<std::vector<double>> cols(table.n_modes());
      for (std::size_t i = 0; i < times.size(); ++i) {
        auto occ = all_occupations(snapshot(i), table);
        for (int m = 0; m < table.n_modes(); ++m) {
          cols[m].push_back(occ[m]);
          occ_lo = std::min(occ_lo, occ[m]);
          occ_hi = std::max(occ_hi, occ[m]);
          if (occ[m] < 0 && !first_negative) first_negative = times[i];
        }
      }
      for (auto& c : cols) out.values.push_back(std::move(c));
    } else if (ch == "nsc") {
      out.columns.push_back("N_sc");
      std::vector<double> col;
      for (std::size_t i = 0; i < times.size(); ++i)
        col.push_back(n_scattered(snapshot(i), table));
      out.values.push_back(std::move(col));
    } else if (ch == "chi") {
      out.columns.push_back("chi_re");
      out.columns.push_back("chi_im");
      std::vector<double> re, im;
      for (std::size_t i = 0; i < times.size(); ++i) {
        cplx chi = cross_correlation_chi(snapshot(i), table);
        re.push_back(chi.real());
        im.push_back(chi.imag());
      }
      out.values.push_back(std::move(re));
      out.values.push_back(std::move(im));
    } else if (ch == "third-ffa" || ch == "third-faa") {
      // Exact and pair-factorized third-order correlator for the atom
      // whose Fermi momentum sits at +kF.
      bool ffa = ch == "third-ffa";
      SimulationConfig fcfg = cfg;
      fcfg.t_grid = times;
      int mode = table.base_mode(cfg.Na - 1);
      auto rep = factorization_diagnostics(
          fcfg, times,
          ffa ? ThirdOrderChannel::FieldFieldAtom
              : ThirdOrderChannel::FieldAtomAtom,
          mode);
      std::string base = ffa ? "ffa" : "faa";
      out.columns.push_back(base + "_exact");
      out.columns.push_back(base + "_factorized");
      out.values.push_back(rep.exact);
      out.values.push_back(rep.factorized);
    }
  }
  if (std::find(channels.begin(), channels.end(), "occupations") !=
      channels.end())
    record_occupation_range(out, occ_lo, occ_hi, first_negative);
  return out;
}

// --- moment closures ----------------------------------------------------

Series run_moments(const Scenario& sc, const std::vector<double>& times,
                   ClosureOrder order) {
  Series out;
  const SimulationConfig& cfg = sc.config;
  auto table = build_mode_table(cfg);
  SimulationConfig mcfg = cfg;
  mcfg.t_grid = times;
  MomentSystem sys(table, mcfg, order);
  auto traj = integrate_moments(sys, sys.init_moments(), times, sc.tol);

  add_manifest(out, "moment_variables", std::to_string(sys.n_vars()));
  add_manifest(out, "trace_drift_max", fmt(traj.max_trace_drift));
  add_manifest(out, "truncated", traj.truncated ? "true" : "false");
  if (traj.truncated)
    add_manifest(out, "warning",
                 "moment integration stopped early at t = " +
                     fmt(traj.times.back()) + " (step underflow)");
  record_occupation_range(out, traj.min_occupation, 1.0,
                          traj.first_negative_occupation_time);

  auto channels = default_channels(sc, "moments1");
  std::size_t n = traj.times.size();
  for (const std::string& ch : channels) {
    if (ch == "occupations") {
      for (int m = 0; m < table.n_modes(); ++m) {
        out.columns.push_back(momentum_label(table.mode_momenta[m]));
        std::vector<double> col(n);
        for (std::size_t i = 0; i < n; ++i)
          col[i] = sys.occupation(traj.states[i], m);
        out.values.push_back(std::move(col));
      }
    } else if (ch == "chi") {
      if (order != ClosureOrder::Second)
        throw SolverMismatchError("chi requires the second-order closure");
      out.columns.push_back("chi_re");
      out.columns.push_back("chi_im");
      std::vector<double> re(n), im(n);
      for (std::size_t i = 0; i < n; ++i) {
        cplx chi = sys.chi(traj.states[i]);
        re[i] = chi.real();
        im[i] = chi.imag();
      }
      out.values.push_back(std::move(re));
      out.values.push_back(std::move(im));
    } else if (ch == "nsc") {
      throw SolverMismatchError("nsc is a Bragg channel");
    } else {
      throw SolverMismatchError("channel " + ch +
                                " unsupported by the moment solvers");
    }
  }
  // Truncated runs deliver the rows that were computed.
  out.manifest.emplace_back("rows_emitted", std::to_string(n));
  return out;
}

// --- Bragg exact (Schwinger basis) ---------------------------------------

struct BraggObservables {
  std::vector<double> nsc;                  // per time
  std::vector<std::vector<double>> p_atom;  // per atom, per time
};

BraggObservables evolve_schwinger(const BraggConfig& bc,
                                  const SchwingerState& st,
                                  const std::vector<double>& times,
                                  double tol, Series& out,
                                  bool record_drift) {
  PropagateOptions opts;
  opts.tol = tol;
  std::vector<Trajectory> trajs(st.sectors.size());
  double norm_drift = 0.0, energy_drift = 0.0, z_drift = 0.0;
  for (std::size_t s = 0; s < st.sectors.size(); ++s) {
    const auto& sec = st.sectors[s];
    auto H = build_bragg_hamiltonian_rw(bc, sec.sector);
    trajs[s] = propagate(H, sec.amps, times, opts);
    double e0 = 0.0, z0 = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
      const StateVector& psi = trajs[s].states[i];
      norm_drift = std::max(norm_drift, std::abs(psi.norm() - 1.0));
      double e = psi.dot(H.apply(psi)).real();
      double z = 0.0;  // J^z + sum_k S_k^z
      for (int mi = 0; mi < sec.sector.n_m(); ++mi)
        for (int w = 0; w < (1 << sec.sector.Na); ++w) {
          double zval = mi - sec.sector.j() +
                        __builtin_popcount(unsigned(w)) - 0.5 * sec.sector.Na;
          z += zval * std::norm(psi[sec.sector.index(mi, w)]);
        }
      if (i == 0) {
        e0 = e;
        z0 = z;
      }
      energy_drift = std::max(energy_drift, std::abs(e - e0));
      z_drift = std::max(z_drift, std::abs(z - z0));
    }
  }
  if (record_drift) {
    add_manifest(out, "sectors", std::to_string(st.sectors.size()));
    add_manifest(out, "norm_drift_max", fmt(norm_drift));
    add_manifest(out, "energy_drift_max", fmt(energy_drift));
    add_manifest(out, "conserved_drift_max", fmt(z_drift));
  }

  BraggObservables obs;
  obs.nsc.resize(times.size());
  obs.p_atom.assign(bc.Na, std::vector<double>(times.size()));
  for (std::size_t i = 0; i < times.size(); ++i) {
    SchwingerState snap = st;
    for (std::size_t s = 0; s < snap.sectors.size(); ++s)
      snap.sectors[s].amps = trajs[s].states[i];
    obs.nsc[i] = schwinger_n_scattered(snap);
    for (int a = 0; a < bc.Na; ++a)
      obs.p_atom[a][i] = schwinger_atom_scattered(snap, a);
  }
  return obs;
}

Series run_bragg_exact(const Scenario& sc, const std::vector<double>& times) {
  Series out;
  BraggConfig bc = BraggConfig::from(sc.config);
  BraggObservables obs;
  if (sc.config.field.kind == FieldKind::Coherent &&
      sc.bragg_coherent_mode == CoherentBraggMode::FockAverage) {
    // Weighted average of independent Fock (n_q, n_-q) runs.
    auto grid = fock_average_weights(sc.config.field);
    obs.nsc.assign(times.size(), 0.0);
    obs.p_atom.assign(bc.Na, std::vector<double>(times.size(), 0.0));
    for (const auto& [nq, nmq, w] : grid) {
      BraggConfig fc = bc;
      fc.field.kind = FieldKind::Fock;
      fc.field.photons = {double(nq), double(nmq)};
      auto st = initial_schwinger_state(fc);
      auto one = evolve_schwinger(fc, st, times, sc.tol, out, false);
      for (std::size_t i = 0; i < times.size(); ++i) {
        obs.nsc[i] += w * one.nsc[i];
        for (int a = 0; a < bc.Na; ++a)
          obs.p_atom[a][i] += w * one.p_atom[a][i];
      }
    }
    add_manifest(out, "fock_average_points", std::to_string(grid.size()));
  } else {
    auto st = initial_schwinger_state(bc);
    obs = evolve_schwinger(bc, st, times, sc.tol, out, true);
  }

  auto kgrid = bc.fermi_grid();
  double lo = 1.0, hi = 0.0;
  auto channels = default_channels(sc, "bragg-exact");
  for (const std::string& ch : channels) {
    if (ch == "nsc") {
      out.columns.push_back("N_sc");
      out.values.push_back(obs.nsc);
    } else if (ch == "occupations") {
      for (int a = 0; a < bc.Na; ++a) {
        out.columns.push_back(momentum_label(kgrid[a] + 1.0));
        for (double v : obs.p_atom[a]) {
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
        out.values.push_back(obs.p_atom[a]);
      }
    } else {
      throw SolverMismatchError("channel " + ch +
                                " unsupported by bragg-exact");
    }
  }
  if (std::find(channels.begin(), channels.end(), "occupations") !=
      channels.end())
    record_occupation_range(out, lo, hi, std::nullopt);
  return out;
}

// --- Bragg analytic (standing wave) --------------------------------------

Series run_bragg_analytic(const Scenario& sc,
                          const std::vector<double>& times) {
  Series out;
  BraggConfig bc = BraggConfig::from(sc.config);
  auto delta = bc.detunings();

  // Per-photon-number weights: a Fock state is a single point.
  std::vector<std::pair<int, double>> ns;
  if (sc.config.field.kind == FieldKind::Fock) {
    ns.emplace_back(int(std::llround(sc.config.field.photons[0])), 1.0);
  } else {
    double nbar = sc.config.field.photons[0];
    auto [first, last] =
        poisson_window(nbar, sc.config.field.truncation_epsilon);
    double mass = 0.0;
    std::vector<double> w(last - first + 1);
    for (int n = first; n <= last; ++n) {
      double logw = n * std::log(nbar) - nbar - std::lgamma(n + 1.0);
      w[n - first] = std::exp(logw);
      mass += w[n - first];
    }
    for (int n = first; n <= last; ++n)
      ns.emplace_back(n, w[n - first] / mass);
    add_manifest(out, "poisson_window",
                 std::to_string(first) + ".." + std::to_string(last));
  }

  std::vector<std::vector<double>> p_atom(bc.Na,
                                          std::vector<double>(times.size()));
  std::vector<double> nsc(times.size(), 0.0);
  for (int a = 0; a < bc.Na; ++a)
    for (std::size_t i = 0; i < times.size(); ++i) {
      double p = 0.0;
      for (const auto& [n, w] : ns)
        p += w * analytic_sw_fock_P(delta[a], n, bc.g, times[i]);
      p_atom[a][i] = p;
      nsc[i] += p;
    }

  auto kgrid = bc.fermi_grid();
  auto channels = default_channels(sc, "bragg-analytic");
  for (const std::string& ch : channels) {
    if (ch == "nsc") {
      out.columns.push_back("N_sc");
      out.values.push_back(nsc);
    } else if (ch == "occupations") {
      for (int a = 0; a < bc.Na; ++a) {
        out.columns.push_back(momentum_label(kgrid[a] + 1.0));
        out.values.push_back(p_atom[a]);
      }
    } else {
      throw SolverMismatchError("channel " + ch +
                                " unsupported by bragg-analytic");
    }
  }
  add_manifest(out, "norm_drift_max", "0");
  add_manifest(out, "energy_drift_max", "0");
  return out;
}

// --- semiclassical Bloch model -------------------------------------------

Series run_bloch(const Scenario& sc, const std::vector<double>& times) {
  Series out;
  BraggConfig bc = BraggConfig::from(sc.config);
  auto s0 = initial_bloch_state(bc);
  auto traj = integrate_bloch(s0, bc, times, sc.tol);

  double spin_drift = 0.0, field_drift = 0.0, z_drift = 0.0;
  double j0 = s0.field.norm();
  double z0 = s0.field.z();
  for (const auto& s : s0.spins) z0 += s.z();
  for (const auto& st : traj.states) {
    field_drift = std::max(field_drift, std::abs(st.field.norm() - j0));
    double z = st.field.z();
    for (const auto& s : st.spins) {
      spin_drift = std::max(spin_drift, std::abs(s.norm() - 0.5));
      z += s.z();
    }
    z_drift = std::max(z_drift, std::abs(z - z0));
  }
  add_manifest(out, "spin_norm_drift_max", fmt(spin_drift));
  add_manifest(out, "field_norm_drift_max", fmt(field_drift));
  add_manifest(out, "conserved_drift_max", fmt(z_drift));

  auto kgrid = bc.fermi_grid();
  auto channels = default_channels(sc, "bloch");
  for (const std::string& ch : channels) {
    if (ch == "nsc") {
      out.columns.push_back("N_sc");
      std::vector<double> col;
      for (const auto& st : traj.states) {
        double n = 0.0;
        for (const auto& s : st.spins) n += s.z() + 0.5;
        col.push_back(n);
      }
      out.values.push_back(std::move(col));
    } else if (ch == "occupations") {
      for (int a = 0; a < bc.Na; ++a) {
        out.columns.push_back(momentum_label(kgrid[a] + 1.0));
        std::vector<double> col;
        for (const auto& st : traj.states) col.push_back(st.spins[a].z() + 0.5);
        out.values.push_back(std::move(col));
      }
    } else {
      throw SolverMismatchError("channel " + ch + " unsupported by bloch");
    }
  }
  return out;
}

// --- spectrum projection --------------------------------------------------

Series run_spectrum(const Scenario& sc) {
  Series out;
  BraggConfig bc = BraggConfig::from(sc.config);
  auto st = initial_schwinger_state(bc);
  const auto& sec = st.sectors[0];
  auto H = build_bragg_hamiltonian_rw(bc, sec.sector);
  auto eig = eigendecompose(H);
  auto proj = spectral_projection(eig, sec.amps);
  auto ba = band_analysis(proj, sc.weight_threshold);

  out.columns = {"omega", "weight"};
  std::vector<double> freqs(proj.frequencies.data(),
                            proj.frequencies.data() + proj.frequencies.size());
  std::vector<double> weights(proj.weights.data(),
                              proj.weights.data() + proj.weights.size());
  out.values.push_back(std::move(freqs));
  out.values.push_back(std::move(weights));

  add_manifest(out, "dim", std::to_string(sec.sector.dim()));
  add_manifest(out, "n_bands", std::to_string(ba.bands.size()));
  double wsum = 0.0;
  for (std::size_t b = 0; b < ba.bands.size(); ++b) {
    const auto& band = ba.bands[b];
    wsum += band.weight;
    add_manifest(out, "band_" + std::to_string(b),
                 "center=" + fmt(band.center) + " width=" + fmt(band.width) +
                     " weight=" + fmt(band.weight));
  }
  add_manifest(out, "weight_in_bands", fmt(wsum));
  add_manifest(out, "cluster_gap", fmt(ba.cluster_gap));
  add_manifest(out, "dephasing_width", fmt(ba.dephasing_width));
  add_manifest(out, "inverse_revival_frequency",
               ba.inverse_revival_frequency
                   ? fmt(*ba.inverse_revival_frequency)
                   : "none");
  double j = sec.sector.j();
  if (j >= 1.0)
    add_manifest(out, "inverse_revival_estimate",
                 fmt(2.0 * kPi / t_revival(j, bc.g)));
  return out;
}

Series run_solver(const Scenario& sc, const std::string& solver,
                  const std::vector<double>& times) {
  if (solver == "exact") return run_exact(sc, times);
  if (solver == "moments1") return run_moments(sc, times, ClosureOrder::First);
  if (solver == "moments2")
    return run_moments(sc, times, ClosureOrder::Second);
  if (solver == "bragg-exact") return run_bragg_exact(sc, times);
  if (solver == "bragg-analytic") return run_bragg_analytic(sc, times);
  if (solver == "bloch") return run_bloch(sc, times);
  if (solver == "spectrum") return run_spectrum(sc);
  throw ConfigError("unknown solver: " + solver);
}

}  // namespace

RunResult run_scenario(const Scenario& sc) {
  sc.validate();
  auto times = sc.time_grid();

  RunResult out;
  for (const auto& [k, v] : sc.resolved()) out.manifest.emplace_back(k, v);

  Series primary = run_solver(sc, sc.solver, times);
  for (const auto& [k, v] : primary.manifest) out.manifest.emplace_back(k, v);

  if (sc.solver == "spectrum") {
    // Spectrum rows are (omega, weight), not a time series.
    out.columns = primary.columns;
    std::size_t n = primary.values.empty() ? 0 : primary.values[0].size();
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> row;
      for (const auto& col : primary.values) row.push_back(col[i]);
      out.rows.push_back(std::move(row));
    }
    return out;
  }

  std::size_t n_rows =
      primary.values.empty() ? times.size() : primary.values[0].size();

  std::vector<std::vector<double>> cols = std::move(primary.values);
  out.columns = {"t"};
  for (const auto& c : primary.columns) out.columns.push_back(c);

  if (!sc.secondary_solver.empty()) {
    Series secondary = run_solver(sc, sc.secondary_solver, times);
    std::string suffix = "_" + sc.secondary_solver;
    for (const auto& [k, v] : secondary.manifest)
      out.manifest.emplace_back(k + suffix, v);
    for (std::size_t c = 0; c < secondary.columns.size(); ++c) {
      out.columns.push_back(secondary.columns[c] + suffix);
      auto col = secondary.values[c];
      col.resize(n_rows, std::nan(""));  // secondary may stop earlier
      cols.push_back(std::move(col));
    }
  }

  for (std::size_t i = 0; i < n_rows; ++i) {
    std::vector<double> row = {times[i]};
    for (const auto& col : cols) row.push_back(col[i]);
    out.rows.push_back(std::move(row));
  }
  return out;
}

SweepResult sweep_scenario(const Scenario& base, const std::string& axis,
                           const std::vector<double>& values, int threads) {
  std::string key = lower(trim(axis));
  if (std::find(kNumericKeys.begin(), kNumericKeys.end(), key) ==
      kNumericKeys.end())
    throw ConfigError("sweep axis must be a numeric scenario key, got '" +
                      axis + "'");
  if (values.empty()) throw ConfigError("sweep needs at least one value");

  auto run_one = [&](double v) {
    Scenario sc = base;
    sc.set(key, fmt(v));
    sc.validate();
    return run_scenario(sc);
  };

  SweepResult out;
  out.runs.resize(values.size());
  if (threads <= 1) {
    for (std::size_t i = 0; i < values.size(); ++i)
      out.runs[i] = {values[i], run_one(values[i])};
  } else {
    // Worker pool over sweep points; assembly stays in input order.
    std::vector<std::future<RunResult>> futs(values.size());
    std::size_t next = 0;
    while (next < values.size()) {
      std::size_t batch =
          std::min<std::size_t>(threads, values.size() - next);
      for (std::size_t i = 0; i < batch; ++i)
        futs[next + i] = std::async(std::launch::async, run_one,
                                    values[next + i]);
      for (std::size_t i = 0; i < batch; ++i)
        out.runs[next + i] = {values[next + i], futs[next + i].get()};
      next += batch;
    }
  }

  // Aggregate: one summary row per value.
  RunResult& agg = out.aggregate;
  for (const auto& [k, v] : base.resolved()) agg.manifest.emplace_back(k, v);
  agg.manifest.emplace_back("sweep_axis", key);

  auto find_manifest = [](const RunResult& r,
                          const std::string& k) -> std::optional<double> {
    for (const auto& [mk, mv] : r.manifest)
      if (mk == k && mv != "none") {
        try {
          return std::stod(mv);
        } catch (const std::exception&) {
          return std::nullopt;
        }
      }
    return std::nullopt;
  };

  if (base.solver == "spectrum") {
    agg.columns = {key,
                   "n_bands",
                   "weight_in_bands",
                   "inverse_revival_frequency",
                   "dephasing_width",
                   "inverse_revival_estimate"};
    for (const auto& [v, r] : out.runs) {
      auto get = [&](const std::string& k) {
        auto x = find_manifest(r, k);
        return x ? *x : std::nan("");
      };
      agg.rows.push_back({v, get("n_bands"), get("weight_in_bands"),
                          get("inverse_revival_frequency"),
                          get("dephasing_width"),
                          get("inverse_revival_estimate")});
    }
  } else {
    // Envelope summary of the primary channel (N_sc when present, first
    // channel otherwise) about its mean.
    agg.columns = {key,          "amp0",
                   "floor",      "collapse_time",
                   "revival_time", "revival_peak_time",
                   "revival_peak_value", "channel_min", "channel_max"};
    for (const auto& [v, r] : out.runs) {
      std::size_t col = 1;
      for (std::size_t c = 1; c < r.columns.size(); ++c)
        if (r.columns[c] == "N_sc") col = c;
      std::vector<double> t, x;
      double lo = 1e300, hi = -1e300, mean = 0.0;
      for (const auto& row : r.rows) {
        t.push_back(row[0]);
        x.push_back(row[col]);
        lo = std::min(lo, row[col]);
        hi = std::max(hi, row[col]);
        mean += row[col];
      }
      mean /= x.empty() ? 1.0 : double(x.size());
      for (double& xv : x) xv = std::abs(xv - mean);
      auto an = analyze_envelope(t, x);
      auto opt = [](const std::optional<double>& o) {
        return o ? *o : std::nan("");
      };
      agg.rows.push_back({v, an.initial_amplitude, an.floor,
                          opt(an.collapse_time), opt(an.revival_time),
                          opt(an.revival_peak_time), an.revival_peak_value,
                          lo, hi});
    }
  }
  return out;
}

void write_csv(const RunResult& result, std::ostream& out) {
  for (std::size_t c = 0; c < result.columns.size(); ++c)
    out << (c ? "," : "") << result.columns[c];
  out << "\n";
  for (const auto& row : result.rows) {
    for (std::size_t c = 0; c < row.size(); ++c)
      out << (c ? "," : "") << fmt(row[c]);
    out << "\n";
  }
}

void write_manifest(const RunResult& result, std::ostream& out) {
  for (const auto& [k, v] : result.manifest) out << k << " = " << v << "\n";
}

}  // namespace fdiff
