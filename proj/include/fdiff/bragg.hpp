#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "fdiff/config.hpp"
#include "fdiff/sparse.hpp"

namespace fdiff {

/// Two-state Bragg model parameters.  Detunings delta_omega_k = k * E2q
/// for k on the Fermi-sea grid.
struct BraggConfig {
  int Na = 1;
  double kF = 0.0;
  double E2q = 50.0;
  double g = 1.0;
  FieldSpec field;

  std::vector<double> fermi_grid() const;
  std::vector<double> detunings() const;

  static BraggConfig from(const SimulationConfig& cfg);
};

/// |j, m> x {spin word} basis; j = (N_q + N_{-q}) / 2, m indexes from -j.
/// State index = m_idx * 2^Na + word; bit k of word set = atom k
/// scattered to its upper momentum state.
struct SchwingerSector {
  int two_j = 0;
  int Na = 0;

  double j() const { return two_j / 2.0; }
  int n_m() const { return two_j + 1; }
  int dim() const { return n_m() << Na; }
  int index(int m_idx, int word) const { return (m_idx << Na) + word; }
};

SparseOperator build_bragg_hamiltonian_rw(const BraggConfig& cfg,
                                          const SchwingerSector& sector);

/// Per-atom 2x2 standing-wave blocks H_k = delta_omega_k S^z
/// + (gN/2)(S^+ + S^-), for photon number N.
std::vector<Eigen::Matrix2cd> build_bragg_hamiltonian_sw(
    const BraggConfig& cfg, int N);

/// One weighted Schwinger sector of a running-wave Bragg state.
struct SchwingerSectorState {
  double weight = 1.0;
  SchwingerSector sector;
  StateVector amps;
};

struct SchwingerState {
  std::vector<SchwingerSectorState> sectors;
};

enum class CoherentBraggMode {
  SectorProjection,  // project |alpha_q>|alpha_-q> onto each j sector
  FockAverage        // average Fock (n_q, n_-q) runs over product Poisson
};

/// Initial Schwinger state: all atoms on their lower momentum site.
/// Fock -> one sector; coherent with SectorProjection -> Poisson-weighted
/// sectors keeping the intra-sector m superposition.  FockAverage is
/// handled at the observable level (see fock_average_weights).
SchwingerState initial_schwinger_state(const BraggConfig& cfg);

/// (n_q, n_-q, weight) grid for the FockAverage coherent treatment.
std::vector<std::tuple<int, int, double>> fock_average_weights(
    const FieldSpec& field);

double schwinger_atom_scattered(const SchwingerState& st, int atom);
double schwinger_n_scattered(const SchwingerState& st);

/// Pendelloesung probability for an atom of detuning delta in a
/// standing-wave Fock field of N photons:
/// P(t) = Omega^2 / (Omega^2 + (delta/2)^2) sin^2(sqrt(...) t) with
/// Omega = gN/2.
double analytic_sw_fock_P(double delta_omega, int N, double g, double t);

/// N_sc(t) by analytic summation over the Fermi grid (scales to hundreds
/// of atoms).
double analytic_sw_fock_nsc(const BraggConfig& cfg, int N, double t);

double j_plus_element(double j, double m);  // sqrt((j+m+1)(j-m))
double t_decay(double j, double g);         // collapse-time estimate
double t_revival(double j, double g);       // revival-time estimate

/// Semiclassical Bloch-vector state: one 3-vector per atom plus the field
/// vector J.
struct BlochState {
  std::vector<Eigen::Vector3d> spins;  // |S_k| = 1/2
  Eigen::Vector3d field = Eigen::Vector3d::Zero();
};

BlochState initial_bloch_state(const BraggConfig& cfg);
BlochState bloch_rhs(const BlochState& state, const BraggConfig& cfg);

struct BlochTrajectory {
  std::vector<double> times;
  std::vector<BlochState> states;
};

BlochTrajectory integrate_bloch(const BlochState& s0, const BraggConfig& cfg,
                                const std::vector<double>& times,
                                double tol = 1e-10);

/// Collapse/revival bookkeeping from an oscillating series via its local
/// maxima.  Thresholds are measured relative to the residual floor (the
/// smallest local maximum), so a collapse onto a nonzero residual
/// amplitude is still detected.  Collapse: envelope first drops below
/// floor + (amp0 - floor) / e.  Revival: first recovery above
/// floor + (amp0 - floor) / 2 afterwards; the peak is the largest
/// maximum within that first revival lobe.
struct EnvelopeAnalysis {
  double initial_amplitude = 0.0;
  double floor = 0.0;                       // smallest local maximum
  std::optional<double> collapse_time;
  std::optional<double> revival_time;       // 50% recovery crossing
  std::optional<double> revival_peak_time;  // peak of the first revival
  double revival_peak_value = 0.0;
  double value_at(double t) const;  // envelope interpolation
  std::vector<std::pair<double, double>> maxima;
};

EnvelopeAnalysis analyze_envelope(const std::vector<double>& times,
                                  const std::vector<double>& values);

}  // namespace fdiff
