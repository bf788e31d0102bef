#pragma once

#include <array>
#include <vector>

#include "fdiff/common.hpp"

namespace fdiff {

enum class Regime { RamanNath, Bragg };
enum class Quantization { RunningWave, StandingWave };
enum class FieldKind { Fock, Coherent };

/// Initial state of the light field.
///
/// Running wave: two counter-propagating modes (+q, -q).  Standing wave:
/// a single mode; only index 0 of the arrays is used.
struct FieldSpec {
  FieldKind kind = FieldKind::Fock;
  // Fock: integer photon numbers.  Coherent: mean photon numbers.
  std::array<double, 2> photons{0.0, 0.0};
  std::array<double, 2> phases{0.0, 0.0};
  // Tail probability mass dropped from the Poisson expansion of a
  // coherent state.
  double truncation_epsilon = 1e-8;

  void validate(Quantization quant) const;
};

/// Internal units throughout: hbar = 1, photon momentum q = 1, times in
/// 1/g, momenta in q, energies in g.  E2q = 2 q^2 / M so that the kinetic
/// energy of a mode of momentum k is E_k = k^2 * E2q / 4.
struct SimulationConfig {
  double g = 1.0;
  double E2q = 1.0;   // recoil energy in units of g
  double kF = 0.1;    // Fermi momentum in units of q
  int Na = 1;         // atom count
  Regime regime = Regime::RamanNath;
  Quantization quantization = Quantization::RunningWave;
  FieldSpec field;
  int nd = 1;  // max diffraction order (Raman-Nath only)
  std::vector<double> t_grid;

  double kinetic_energy(double k) const { return k * k * E2q / 4.0; }
  // Frequency mismatch between the two Bragg-coupled momentum states of
  // an atom with initial momentum k - q:  E_{k+q} - E_{k-q} = k * E2q.
  double delta_omega(double k) const { return k * E2q; }

  void validate() const;
};

}  // namespace fdiff
