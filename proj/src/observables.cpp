#include "fdiff/observables.hpp"

#include <cmath>

namespace fdiff {

cplx expectation(const QuantumState& qs, const OpString& ops) {
  cplx acc = 0.0;
  for (const SectorState& sec : qs.sectors)
    acc += sec.weight * opstring_expectation(sec.basis, ops, sec.amps);
  return acc;
}

double occupation_mode(const QuantumState& qs, int mode) {
  double acc = 0.0;
  auto m = static_cast<std::int16_t>(mode);
  for (const SectorState& sec : qs.sectors) {
    double p = 0.0;
    for (int i = 0; i < sec.basis.dim(); ++i) {
      if (sec.amps[i] == cplx(0.0)) continue;
      const auto& occ = sec.basis.states[i].occ;
      if (std::binary_search(occ.begin(), occ.end(), m))
        p += std::norm(sec.amps[i]);
    }
    acc += sec.weight * p;
  }
  return acc;
}

double occupation(const QuantumState& qs, const ModeTable& table,
                  double p) {
  int mode = table.mode_at(p);
  if (mode < 0) throw ConfigError("unknown momentum");
  return occupation_mode(qs, mode);
}

std::vector<double> all_occupations(const QuantumState& qs,
                                    const ModeTable& table) {
  std::vector<double> out(table.n_modes());
  for (int m = 0; m < table.n_modes(); ++m)
    out[m] = occupation_mode(qs, m);
  return out;
}

double n_scattered(const QuantumState& qs, const ModeTable& table) {
  if (table.regime != Regime::Bragg)
    throw SolverMismatchError("N_sc requires a Bragg mode table");
  double acc = 0.0;
  for (int i = 0; i < table.Na; ++i)
    acc += occupation_mode(qs, table.ladders[i][1]);
  return acc;
}

cplx cross_correlation_chi(const QuantumState& qs,
                           const ModeTable& table) {
  if (table.quant != Quantization::RunningWave)
    throw SolverMismatchError("chi is undefined for standing waves");
  cplx acc = 0.0;
  cplx field = expectation(qs, {bdag(0), b(1)});
  for (int lower = 0; lower < table.n_modes(); ++lower) {
    int upper = table.shifted(lower, +1);
    if (upper < 0) continue;
    // k - q = mode `lower`, k + q = mode `upper`.
    OpString cross = {bdag(0), b(1), cdag(lower), c(upper)};
    acc += expectation(qs, cross) -
           field * expectation(qs, {cdag(lower), c(upper)});
  }
  return acc;
}

cplx third_order_exact(const QuantumState& qs, const ModeTable& table,
                       ThirdOrderKind which, int mode) {
  if (mode < 0 || mode >= table.n_modes())
    throw std::out_of_range("mode index off the ladder set");
  OpString ops;
  if (which == ThirdOrderKind::FieldFieldAtom)
    ops = {bdag(1), b(0), bdag(0), b(1), cdag(mode), c(mode)};
  else
    ops = {bdag(0), b(0), cdag(mode), c(mode), cdag(mode), c(mode)};
  return expectation(qs, ops);
}

std::vector<double> poisson_average(
    const std::map<int, std::vector<double>>& per_N, double nbar,
    double epsilon) {
  auto [lo, hi] = poisson_window(nbar, epsilon);
  std::size_t len = 0;
  double mass = 0.0;
  for (int n = lo; n <= hi; ++n) {
    auto it = per_N.find(n);
    if (it == per_N.end())
      throw ConfigError("insufficient photon-number coverage for epsilon");
    if (len == 0)
      len = it->second.size();
    else if (it->second.size() != len)
      throw ConfigError("per-N series lengths differ");
    mass += std::exp(-nbar + n * std::log(std::max(nbar, 1e-300)) -
                     std::lgamma(n + 1.0));
  }
  std::vector<double> out(len, 0.0);
  for (int n = lo; n <= hi; ++n) {
    double w = std::exp(-nbar + n * std::log(std::max(nbar, 1e-300)) -
                        std::lgamma(n + 1.0)) /
               mass;
    const auto& series = per_N.at(n);
    for (std::size_t i = 0; i < len; ++i) out[i] += w * series[i];
  }
  return out;
}

}  // namespace fdiff
