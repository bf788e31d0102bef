#pragma once

#include <vector>

#include "fdiff/config.hpp"

namespace fdiff {

/// Discrete momentum ladder bookkeeping.
///
/// Each atom i sits on its own ladder of momenta p_i + 2 m q.  Ladders of
/// distinct atoms never intersect (kF < q and distinct base momenta), so
/// the global mode list is the disjoint union of the ladders, sorted by
/// momentum.
struct ModeTable {
  Quantization quant = Quantization::RunningWave;
  Regime regime = Regime::RamanNath;
  int Na = 0;
  int nd = 0;  // ladder half-width (Raman-Nath); Bragg ladders have 2 sites

  std::vector<double> fermi_grid;     // k_i, evenly spaced on [-kF, kF]
  std::vector<double> base_momenta;   // p_i (= k_i, or k_i - q for Bragg)
  std::vector<double> mode_momenta;   // global sorted fermionic mode list

  // ladders[i][s] = global index of ladder site s of atom i (s ordered by
  // increasing momentum).
  std::vector<std::vector<int>> ladders;
  std::vector<int> atom_of_mode;    // which atom's ladder a mode belongs to
  std::vector<int> offset_of_mode;  // ladder offset m (integer, Raman-Nath
                                    // m in [-nd, nd]; Bragg m in {0, 1})

  int n_modes() const { return static_cast<int>(mode_momenta.size()); }
  int base_mode(int atom) const;  // global index of atom's initial mode

  // Global index of the mode at momentum(mode) + step * 2q, or -1 if the
  // shift leaves the atom's ladder.
  int shifted(int mode, int step) const;

  // Global index of the mode with the given momentum, or -1.
  int mode_at(double p, double tol = 1e-9) const;
};

ModeTable build_mode_table(const SimulationConfig& config);

}  // namespace fdiff
