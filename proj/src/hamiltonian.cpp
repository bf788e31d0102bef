#include "fdiff/hamiltonian.hpp"

#include <cmath>

namespace fdiff {

namespace {

double sector_energy(const Basis& basis, const ModeTable& table,
                     const SimulationConfig& config, const BasisState& s) {
  double e = 0.0;
  for (auto m : s.occ) e += config.kinetic_energy(table.mode_momenta[m]);
  return e;
}

}  // namespace

SparseOperator build_hamiltonian_rw(const Basis& basis,
                                    const ModeTable& table,
                                    const SimulationConfig& config) {
  if (basis.quant != Quantization::RunningWave)
    throw SolverMismatchError("basis is not running-wave");
  std::vector<Eigen::Triplet<cplx>> trip;
  for (int col = 0; col < basis.dim(); ++col) {
    const BasisState& s = basis.states[col];
    trip.emplace_back(col, col, sector_energy(basis, table, config, s));

    // g a_q^dag a_{-q} sum_k c^dag_{k-q} c_{k+q}: atom momentum -2q,
    // photon (n_q, n_{-q}) -> (n_q + 1, n_{-q} - 1), and h.c.
    for (int dir : {-1, +1}) {
      int nq = s.photons[0], nmq = s.photons[1];
      double bose;
      std::array<int, 2> ph;
      if (dir == -1) {
        if (nmq < 1) continue;
        bose = std::sqrt(double(nq + 1)) * std::sqrt(double(nmq));
        ph = {nq + 1, nmq - 1};
      } else {
        if (nq < 1) continue;
        bose = std::sqrt(double(nmq + 1)) * std::sqrt(double(nq));
        ph = {nq - 1, nmq + 1};
      }
      for (auto src : s.occ) {
        int dst = table.shifted(src, dir);
        if (dst < 0) continue;
        auto hop = fermionic_bilinear(s, dst, src);
        if (!hop) continue;
        BasisState out = hop->second;
        out.photons = ph;
        int row = basis.index(out);
        if (row < 0) continue;  // outside sector (cannot happen)
        trip.emplace_back(row, col, config.g * bose * double(hop->first));
      }
    }
  }
  return SparseOperator::from_triplets(basis.dim(), trip, true);
}

SparseOperator build_hamiltonian_sw(const Basis& basis,
                                    const ModeTable& table,
                                    const SimulationConfig& config) {
  if (basis.quant != Quantization::StandingWave)
    throw SolverMismatchError("basis is not standing-wave");
  std::vector<Eigen::Triplet<cplx>> trip;
  for (int col = 0; col < basis.dim(); ++col) {
    const BasisState& s = basis.states[col];
    trip.emplace_back(col, col, sector_energy(basis, table, config, s));
    double coupling = config.g * s.photons[0] / 2.0;
    if (coupling == 0.0) continue;
    for (int dir : {-1, +1}) {
      for (auto src : s.occ) {
        int dst = table.shifted(src, dir);
        if (dst < 0) continue;
        auto hop = fermionic_bilinear(s, dst, src);
        if (!hop) continue;
        int row = basis.index(hop->second);
        if (row < 0) continue;
        trip.emplace_back(row, col, coupling * double(hop->first));
      }
    }
  }
  return SparseOperator::from_triplets(basis.dim(), trip, true);
}

SparseOperator build_hamiltonian(const Basis& basis, const ModeTable& table,
                                 const SimulationConfig& config) {
  return config.quantization == Quantization::RunningWave
             ? build_hamiltonian_rw(basis, table, config)
             : build_hamiltonian_sw(basis, table, config);
}

std::pair<int, int> poisson_window(double nbar, double epsilon) {
  if (nbar <= 0.0) return {0, 0};
  // Walk pmf outward from the mode until the retained mass reaches
  // 1 - epsilon, always absorbing the heavier neighbor first.
  int mode = static_cast<int>(std::floor(nbar));
  auto log_pmf = [&](int n) {
    return -nbar + n * std::log(nbar) - std::lgamma(n + 1.0);
  };
  int lo = mode, hi = mode;
  double mass = std::exp(log_pmf(mode));
  while (mass < 1.0 - epsilon) {
    double below = lo > 0 ? std::exp(log_pmf(lo - 1)) : -1.0;
    double above = std::exp(log_pmf(hi + 1));
    if (below >= above) {
      --lo;
      mass += below;
    } else {
      ++hi;
      mass += above;
    }
    if (hi - lo > 100000)
      throw ConfigError("coherent-state truncation failed to converge");
  }
  return {lo, hi};
}

namespace {

BasisState fermi_sea(const ModeTable& table, std::array<int, 2> photons) {
  BasisState s;
  s.photons = photons;
  for (int i = 0; i < table.Na; ++i)
    s.occ.push_back(static_cast<std::int16_t>(table.base_mode(i)));
  std::sort(s.occ.begin(), s.occ.end());
  return s;
}

}  // namespace

QuantumState initial_state(const ModeTable& table,
                           const SimulationConfig& config) {
  const FieldSpec& f = config.field;
  QuantumState qs;
  bool rw = config.quantization == Quantization::RunningWave;

  if (f.kind == FieldKind::Fock) {
    int nq = static_cast<int>(f.photons[0]);
    int nmq = rw ? static_cast<int>(f.photons[1]) : 0;
    SectorState sec;
    sec.weight = 1.0;
    sec.basis = enumerate_basis(table, config.quantization, nq + nmq);
    sec.amps = StateVector::Zero(sec.basis.dim());
    sec.amps[sec.basis.index(fermi_sea(table, {nq, nmq}))] = 1.0;
    qs.sectors.push_back(std::move(sec));
    return qs;
  }

  double ntot = rw ? f.photons[0] + f.photons[1] : f.photons[0];
  auto [lo, hi] = poisson_window(ntot, f.truncation_epsilon);
  std::vector<double> w(hi - lo + 1);
  double mass = 0.0;
  for (int n = lo; n <= hi; ++n) {
    w[n - lo] = std::exp(-ntot + n * std::log(std::max(ntot, 1e-300)) -
                         std::lgamma(n + 1.0));
    mass += w[n - lo];
  }
  cplx alpha_q = std::sqrt(f.photons[0]) *
                 std::exp(cplx(0.0, f.phases[0]));
  cplx alpha_mq = rw ? std::sqrt(f.photons[1]) *
                           std::exp(cplx(0.0, f.phases[1]))
                     : cplx(0.0);

  for (int n = lo; n <= hi; ++n) {
    SectorState sec;
    sec.weight = w[n - lo] / mass;
    sec.basis = enumerate_basis(table, config.quantization, n);
    sec.amps = StateVector::Zero(sec.basis.dim());
    if (rw) {
      // Coherent superposition over (n_q, n_{-q}) splittings within the
      // sector, normalized over the retained set.
      double norm2 = 0.0;
      std::vector<cplx> amp(n + 1);
      for (int nq = 0; nq <= n; ++nq) {
        cplx a = std::pow(alpha_q, nq) * std::pow(alpha_mq, n - nq);
        a /= std::sqrt(std::exp(std::lgamma(nq + 1.0) +
                                std::lgamma(n - nq + 1.0)));
        amp[nq] = a;
        norm2 += std::norm(a);
      }
      for (int nq = 0; nq <= n; ++nq) {
        int idx = sec.basis.index(fermi_sea(table, {nq, n - nq}));
        sec.amps[idx] = amp[nq] / std::sqrt(norm2);
      }
    } else {
      sec.amps[sec.basis.index(fermi_sea(table, {n, 0}))] = 1.0;
    }
    qs.sectors.push_back(std::move(sec));
  }
  return qs;
}

std::vector<ConservedOperator> conserved_operators(
    const Basis& basis, const ModeTable& table,
    const SimulationConfig& config) {
  std::vector<ConservedOperator> ops;
  int dim = basis.dim();

  if (config.quantization == Quantization::StandingWave) {
    ConservedOperator n{"N", Eigen::VectorXd(dim)};
    for (int i = 0; i < dim; ++i) n.values[i] = basis.states[i].photons[0];
    ops.push_back(std::move(n));
    return ops;
  }

  ConservedOperator ntot{"N_tot", Eigen::VectorXd(dim)};
  for (int i = 0; i < dim; ++i)
    ntot.values[i] =
        basis.states[i].photons[0] + basis.states[i].photons[1];
  ops.push_back(std::move(ntot));

  // Total momentum in units of q, doubled to stay integer:
  // 2 P = 4 sum_i m_i + 2 (n_q - n_{-q}) up to the constant sum of base
  // momenta.  For the Bragg two-site ladders this operator equals
  // 2 (J^z + sum_k S_k^z) up to a constant.
  ConservedOperator p{config.regime == Regime::Bragg ? "Jz_plus_Sz_tot"
                                                     : "P_tot",
                      Eigen::VectorXd(dim)};
  for (int i = 0; i < dim; ++i) {
    const BasisState& s = basis.states[i];
    int twice_m = 0;
    for (auto m : s.occ) twice_m += 2 * table.offset_of_mode[m];
    p.values[i] = twice_m + (s.photons[0] - s.photons[1]);
  }
  ops.push_back(std::move(p));
  return ops;
}

}  // namespace fdiff
