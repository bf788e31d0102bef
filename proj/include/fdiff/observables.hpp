#pragma once

#include <map>
#include <vector>

#include "fdiff/hamiltonian.hpp"
#include "fdiff/opstring.hpp"

namespace fdiff {

/// Expectation of a photon-number-conserving operator string, Poisson
/// weighted over the sectors of a (possibly coherent) state.
cplx expectation(const QuantumState& qs, const OpString& ops);

/// P_p = <c^dag_p c_p> for the mode of momentum p.
double occupation(const QuantumState& qs, const ModeTable& table, double p);
double occupation_mode(const QuantumState& qs, int mode);

/// All per-mode occupations, in global mode order.
std::vector<double> all_occupations(const QuantumState& qs,
                                    const ModeTable& table);

/// Total number of atoms diffracted to the upper Bragg sites,
/// sum_k P_{k+q}.
double n_scattered(const QuantumState& qs, const ModeTable& table);

/// Field-atom cross correlation
/// chi = sum_k (<a_q^dag a_{-q} c^dag_{k-q} c_{k+q}>
///              - <a_q^dag a_{-q}><c^dag_{k-q} c_{k+q}>),
/// with the k-sum over every bond of the coupling structure (pairs of
/// modes 2q apart).  Running wave only.
cplx cross_correlation_chi(const QuantumState& qs, const ModeTable& table);

enum class ThirdOrderKind {
  FieldFieldAtom,  // a_{-q}^dag a_q a_q^dag a_{-q} c_k^dag c_k
  FieldAtomAtom    // a_q^dag a_q c_k^dag c_k c_k^dag c_k
};

cplx third_order_exact(const QuantumState& qs, const ModeTable& table,
                       ThirdOrderKind which, int mode);

/// Poisson average of per-photon-number series; `per_N` maps N to a series
/// over a common grid.  Throws if the retained window for (nbar, epsilon)
/// is not covered.
std::vector<double> poisson_average(
    const std::map<int, std::vector<double>>& per_N, double nbar,
    double epsilon);

}  // namespace fdiff
