#include "fdiff/sparse.hpp"

#include <cmath>

namespace fdiff {

SparseOperator SparseOperator::from_triplets(
    int dim, const std::vector<Eigen::Triplet<cplx>>& triplets,
    bool hermitian) {
  SparseOperator op;
  op.mat.resize(dim, dim);
  op.mat.setFromTriplets(triplets.begin(), triplets.end());
  op.mat.makeCompressed();
  op.hermitian = hermitian;
  return op;
}

double SparseOperator::hermiticity_error() const {
  Eigen::SparseMatrix<cplx> diff = mat - Eigen::SparseMatrix<cplx>(
                                             mat.adjoint());
  double scale = 0.0, worst = 0.0;
  for (int k = 0; k < mat.outerSize(); ++k)
    for (Eigen::SparseMatrix<cplx>::InnerIterator it(mat, k); it; ++it)
      scale = std::max(scale, std::abs(it.value()));
  for (int k = 0; k < diff.outerSize(); ++k)
    for (Eigen::SparseMatrix<cplx>::InnerIterator it(diff, k); it; ++it)
      worst = std::max(worst, std::abs(it.value()));
  return scale > 0 ? worst / scale : worst;
}

double SparseOperator::norm_estimate(int iters) const {
  if (dim() == 0) return 0.0;
  StateVector v(dim());
  for (int i = 0; i < dim(); ++i)
    v[i] = cplx(std::cos(0.7 * i + 0.3), std::sin(1.3 * i + 0.1));
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < iters; ++it) {
    StateVector w = mat * v;
    lambda = w.norm();
    if (lambda == 0.0) return 0.0;
    v = w / lambda;
  }
  return lambda;
}

bool commutes_structurally(const SparseOperator& H,
                           const ConservedOperator& op) {
  for (int k = 0; k < H.mat.outerSize(); ++k)
    for (Eigen::SparseMatrix<cplx>::InnerIterator it(H.mat, k); it; ++it)
      if (it.value() != cplx(0.0) &&
          op.values[it.row()] != op.values[it.col()])
        return false;
  return true;
}

}  // namespace fdiff
