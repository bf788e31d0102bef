#include "fdiff/opstring.hpp"

#include <algorithm>
#include <cmath>

namespace fdiff {

StateVector apply_opstring(const Basis& basis, const OpString& ops,
                           const StateVector& psi) {
  StateVector out = StateVector::Zero(basis.dim());
  for (int col = 0; col < basis.dim(); ++col) {
    if (psi[col] == cplx(0.0)) continue;
    BasisState s = basis.states[col];
    double coeff = 1.0;
    bool dead = false;
    for (auto it = ops.rbegin(); it != ops.rend() && !dead; ++it) {
      const Op& op = *it;
      if (op.boson) {
        int& n = s.photons[op.mode];
        if (op.dagger) {
          coeff *= std::sqrt(double(n + 1));
          ++n;
        } else if (n == 0) {
          dead = true;
        } else {
          coeff *= std::sqrt(double(n));
          --n;
        }
      } else {
        auto m = static_cast<std::int16_t>(op.mode);
        auto pos = std::lower_bound(s.occ.begin(), s.occ.end(), m);
        bool present = pos != s.occ.end() && *pos == m;
        int before = static_cast<int>(pos - s.occ.begin());
        if (op.dagger) {
          if (present) {
            dead = true;
          } else {
            if (before % 2 == 1) coeff = -coeff;
            s.occ.insert(pos, m);
          }
        } else {
          if (!present) {
            dead = true;
          } else {
            if (before % 2 == 1) coeff = -coeff;
            s.occ.erase(pos);
          }
        }
      }
    }
    if (dead) continue;
    // Components outside the basis (photon-number changes, or fermion
    // words violating the one-per-ladder structure) are orthogonal to
    // every basis vector; dropping them projects back onto the basis,
    // which is exact for expectation values.
    int row = basis.index(s);
    if (row >= 0) out[row] += coeff * psi[col];
  }
  return out;
}

cplx opstring_expectation(const Basis& basis, const OpString& ops,
                          const StateVector& psi) {
  return psi.dot(apply_opstring(basis, ops, psi));
}

}  // namespace fdiff
