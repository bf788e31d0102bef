#pragma once

#include <vector>

#include "fdiff/basis.hpp"
#include "fdiff/sparse.hpp"

namespace fdiff {

/// One fixed-total-photon-number sector of a (possibly coherent) state.
/// `weight` is the probability mass of the sector; weights over a
/// QuantumState sum to 1 after truncation renormalization.
struct SectorState {
  double weight = 1.0;
  Basis basis;
  StateVector amps;
};

struct QuantumState {
  std::vector<SectorState> sectors;
};

SparseOperator build_hamiltonian_rw(const Basis& basis,
                                    const ModeTable& table,
                                    const SimulationConfig& config);

SparseOperator build_hamiltonian_sw(const Basis& basis,
                                    const ModeTable& table,
                                    const SimulationConfig& config);

SparseOperator build_hamiltonian(const Basis& basis, const ModeTable& table,
                                 const SimulationConfig& config);

/// Filled Fermi sea on the base momenta; Fock field -> one sector,
/// coherent field -> Poisson-weighted sectors with the intra-sector
/// (n_q, n_{-q}) superposition retained.
QuantumState initial_state(const ModeTable& table,
                           const SimulationConfig& config);

/// Retained contiguous photon-number window [first, last] of a Poisson
/// distribution with mean nbar, dropped tail mass <= epsilon.
std::pair<int, int> poisson_window(double nbar, double epsilon);

std::vector<ConservedOperator> conserved_operators(
    const Basis& basis, const ModeTable& table,
    const SimulationConfig& config);

}  // namespace fdiff
