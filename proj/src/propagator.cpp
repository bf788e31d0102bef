#include "fdiff/propagator.hpp"

#include <algorithm>
#include <cmath>

#include "fdiff/integrate.hpp"

namespace fdiff {

namespace {

bool is_real(const SparseOperator& H) {
  for (int k = 0; k < H.mat.outerSize(); ++k)
    for (Eigen::SparseMatrix<cplx>::InnerIterator it(H.mat, k); it; ++it)
      if (it.value().imag() != 0.0) return false;
  return true;
}

}  // namespace

Eigensystem eigendecompose(const SparseOperator& H, int dim_cap) {
  if (H.dim() > dim_cap)
    throw NumericalError("eigendecomposition dimension cap exceeded");
  Eigensystem out;
  if (is_real(H)) {
    Eigen::MatrixXd dense = H.dense().real();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(dense);
    out.frequencies = solver.eigenvalues();
    out.eigvecs = solver.eigenvectors().cast<cplx>();
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(H.dense());
    out.frequencies = solver.eigenvalues();
    out.eigvecs = solver.eigenvectors();
  }
  return out;
}

StateVector evolve_eigen(const Eigensystem& eig, const StateVector& psi0,
                         double t) {
  StateVector coeffs = eig.eigvecs.adjoint() * psi0;
  for (int i = 0; i < coeffs.size(); ++i)
    coeffs[i] *= std::exp(cplx(0.0, -eig.frequencies[i] * t));
  return eig.eigvecs * coeffs;
}

Trajectory propagate(const SparseOperator& H, const StateVector& psi0,
                     const std::vector<double>& times,
                     const PropagateOptions& opts) {
  if (H.dim() != psi0.size())
    throw ConfigError("Hamiltonian/state dimension mismatch");
  if (opts.tol < 1e-12 || opts.tol > 1e-6)
    throw ConfigError("propagation tol must be in [1e-12, 1e-6]");

  Trajectory traj;
  traj.times = times;
  traj.states.reserve(times.size());

  PropagationMethod method = opts.method;
  if (method == PropagationMethod::Auto)
    method = H.dim() <= opts.eig_dim_threshold
                 ? PropagationMethod::Eigendecomposition
                 : PropagationMethod::AdaptiveStep;

  double norm0 = psi0.norm();
  if (method == PropagationMethod::Eigendecomposition) {
    Eigensystem eig = eigendecompose(H, std::max(H.dim(), 1));
    double t0 = times.empty() ? 0.0 : times.front();
    for (double t : times)
      traj.states.push_back(evolve_eigen(eig, psi0, t - t0));
  } else {
    const Eigen::SparseMatrix<cplx>& M = H.mat;
    std::function<void(double, const StateVector&, StateVector&)> rhs =
        [&M](double, const StateVector& y, StateVector& dy) {
          dy = cplx(0.0, -1.0) * (M * y);
        };
    integrate_adaptive<StateVector>(
        rhs, psi0, times, opts.tol,
        [&](std::size_t, double t, const StateVector& y) {
          double drift = std::abs(y.norm() - norm0);
          double budget = opts.tol * std::max(1.0, t);
          if (drift > 100.0 * budget)
            throw NumericalError("norm drift exceeds 100 x tol");
          traj.states.push_back(y);
        });
  }
  return traj;
}

SpectrumProjection spectral_projection(const Eigensystem& eig,
                                       const StateVector& psi0) {
  SpectrumProjection proj;
  proj.frequencies = eig.frequencies;
  StateVector coeffs = eig.eigvecs.adjoint() * psi0;
  proj.weights.resize(coeffs.size());
  for (int i = 0; i < coeffs.size(); ++i)
    proj.weights[i] = std::norm(coeffs[i]);
  return proj;
}

BandAnalysis band_analysis(const SpectrumProjection& proj,
                           double weight_threshold, double cluster_gap) {
  if (proj.frequencies.size() == 0)
    throw ConfigError("empty spectrum projection");

  struct Line {
    double f, w;
  };
  std::vector<Line> lines;
  for (int i = 0; i < proj.frequencies.size(); ++i)
    if (proj.weights[i] >= weight_threshold)
      lines.push_back({proj.frequencies[i], proj.weights[i]});
  std::sort(lines.begin(), lines.end(),
            [](const Line& a, const Line& b) { return a.f < b.f; });

  BandAnalysis out;
  if (lines.empty()) return out;

  if (cluster_gap <= 0.0 && lines.size() > 1) {
    // The gap sequence of well-clustered spectra is bimodal; split at the
    // largest relative jump in the descending sorted gaps.
    std::vector<double> gaps;
    for (std::size_t i = 1; i < lines.size(); ++i)
      gaps.push_back(lines[i].f - lines[i - 1].f);
    std::sort(gaps.begin(), gaps.end(), std::greater<>());
    std::size_t knee = 0;
    double best = 0.0;
    for (std::size_t i = 0; i + 1 < gaps.size(); ++i) {
      double lo = std::max(gaps[i + 1], 1e-300);
      double ratio = gaps[i] / lo;
      if (ratio > best) {
        best = ratio;
        knee = i;
      }
    }
    cluster_gap = best > 3.0
                      ? std::sqrt(gaps[knee] *
                                  std::max(gaps[knee + 1], 1e-300))
                      : gaps.back() * 0.5;  // no knee: every line its own band
  }
  out.cluster_gap = cluster_gap;

  std::vector<std::vector<Line>> clusters{{lines.front()}};
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].f - lines[i - 1].f > cluster_gap)
      clusters.emplace_back();
    clusters.back().push_back(lines[i]);
  }
  double total_w = 0.0;
  for (const auto& c : clusters) {
    Band b;
    double fmin = c.front().f, fmax = c.back().f;
    for (const Line& l : c) {
      b.weight += l.w;
      b.center += l.w * l.f;
    }
    b.center /= b.weight;
    b.width = fmax - fmin;
    total_w += b.weight;
    out.bands.push_back(b);
  }
  for (const Band& b : out.bands)
    out.dephasing_width += b.weight / total_w * b.width;

  if (out.bands.size() >= 3) {
    // The revival frequency is the variation between adjacent band
    // separations.  The separations near the spectrum edges vary more
    // than those carrying the bulk of the weight and barely show in the
    // dynamics, so read the variation off the heaviest band triple.
    double best_w = -1.0, best_var = 0.0;
    for (std::size_t i = 1; i + 1 < out.bands.size(); ++i) {
      double w = out.bands[i - 1].weight + out.bands[i].weight +
                 out.bands[i + 1].weight;
      double var = std::abs((out.bands[i + 1].center - out.bands[i].center) -
                            (out.bands[i].center - out.bands[i - 1].center));
      if (w > best_w) {
        best_w = w;
        best_var = var;
      }
    }
    out.inverse_revival_frequency = best_var;
  }
  return out;
}

}  // namespace fdiff
