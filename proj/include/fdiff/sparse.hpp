#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <string>
#include <vector>

#include "fdiff/common.hpp"

namespace fdiff {

using StateVector = Eigen::VectorXcd;

/// Sparse Hermitian operator over a Basis.
struct SparseOperator {
  Eigen::SparseMatrix<cplx> mat;
  bool hermitian = false;

  int dim() const { return static_cast<int>(mat.rows()); }

  StateVector apply(const StateVector& v) const { return mat * v; }

  Eigen::MatrixXcd dense() const { return Eigen::MatrixXcd(mat); }

  // Max relative deviation from A = A^dagger.
  double hermiticity_error() const;

  // ||A||_2 estimate by power iteration (deterministic start vector).
  double norm_estimate(int iters = 20) const;

  static SparseOperator from_triplets(
      int dim, const std::vector<Eigen::Triplet<cplx>>& triplets,
      bool hermitian);
};

/// Diagonal conserved quantity attached by name; `values` must hold
/// exactly representable numbers so structural commutation checks can use
/// float equality.
struct ConservedOperator {
  std::string name;
  Eigen::VectorXd values;
};

/// True iff every nonzero of H connects states with identical diagonal
/// value (exact comparison, not numerical drift).
bool commutes_structurally(const SparseOperator& H,
                           const ConservedOperator& op);

}  // namespace fdiff
