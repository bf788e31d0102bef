#pragma once

#include <vector>

#include "fdiff/basis.hpp"
#include "fdiff/sparse.hpp"

namespace fdiff {

/// Single creation/annihilation operator.  Boson modes: 0 = +q, 1 = -q
/// (running wave) or 0 = the standing-wave mode.  Fermion modes index the
/// global mode list.
struct Op {
  bool boson = false;
  bool dagger = false;
  int mode = 0;

  bool operator==(const Op&) const = default;
};

using OpString = std::vector<Op>;

inline Op bdag(int mode) { return {true, true, mode}; }
inline Op b(int mode) { return {true, false, mode}; }
inline Op cdag(int mode) { return {false, true, mode}; }
inline Op c(int mode) { return {false, false, mode}; }

/// Applies the string (rightmost operator first) to psi.  The string must
/// conserve total photon number and fermion number so the result stays in
/// the basis.
StateVector apply_opstring(const Basis& basis, const OpString& ops,
                           const StateVector& psi);

cplx opstring_expectation(const Basis& basis, const OpString& ops,
                          const StateVector& psi);

}  // namespace fdiff
