#pragma once

#include <optional>
#include <vector>

#include "fdiff/sparse.hpp"

namespace fdiff {

struct Trajectory {
  std::vector<double> times;  // units of 1/g
  std::vector<StateVector> states;
};

enum class PropagationMethod { Auto, Eigendecomposition, AdaptiveStep };

struct PropagateOptions {
  double tol = 1e-10;  // in [1e-12, 1e-6]
  PropagationMethod method = PropagationMethod::Auto;
  int eig_dim_threshold = 1500;
};

/// Evolves psi0 under exp(-iHt) onto the given time grid.  Norm drift is
/// an error signal: drift beyond 100 x tol aborts, no silent
/// renormalization.
Trajectory propagate(const SparseOperator& H, const StateVector& psi0,
                     const std::vector<double>& times,
                     const PropagateOptions& opts = {});

struct Eigensystem {
  Eigen::VectorXd frequencies;  // units of g, ascending
  Eigen::MatrixXcd eigvecs;     // columns
};

Eigensystem eigendecompose(const SparseOperator& H, int dim_cap = 5000);

StateVector evolve_eigen(const Eigensystem& eig, const StateVector& psi0,
                         double t);

struct SpectrumProjection {
  Eigen::VectorXd frequencies;
  Eigen::VectorXd weights;  // |<eigvec|psi0>|^2, sum to 1
};

SpectrumProjection spectral_projection(const Eigensystem& eig,
                                       const StateVector& psi0);

struct Band {
  double center = 0.0;  // weight-averaged frequency
  double width = 0.0;   // max - min significant frequency in the band
  double weight = 0.0;
};

struct BandAnalysis {
  std::vector<Band> bands;
  // Variation between adjacent band-center separations, read off the
  // highest-weight band triple; nullopt with fewer than 3 bands.
  std::optional<double> inverse_revival_frequency;
  double dephasing_width = 0.0;  // weight-averaged band width
  double cluster_gap = 0.0;      // gap threshold actually used
};

/// Clusters weight-bearing eigenfrequencies into bands.  cluster_gap <= 0
/// selects the threshold automatically from the largest relative jump in
/// the sorted gap sequence.
BandAnalysis band_analysis(const SpectrumProjection& proj,
                           double weight_threshold = 1e-3,
                           double cluster_gap = 0.0);

}  // namespace fdiff
