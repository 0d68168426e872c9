#pragma once

#include <optional>

#include "fusionframe/frame.hpp"

namespace ff {

/// Unitary factor of the polar decomposition M = U P, computed from a full
/// SVD so that rank-deficient input still yields a unitary.
template <typename Scalar>
Matrix<Scalar> polar_unitary_factor(const Matrix<Scalar>& m) {
  Eigen::JacobiSVD<Matrix<Scalar>> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().adjoint();
}

/// Solves B = U A for unitary U in U(k), which exists iff A^*A = B^*B.
/// U is recovered as the polar factor of B A^*: on range(A) this agrees with
/// the exact solution, and the SVD supplies a unitary completion on the
/// cokernel when A is rank deficient. Returns std::nullopt when the Gram
/// matrices differ by more than tol or the recovered U fails ||UA - B|| <= tol.
template <typename Scalar>
std::optional<Matrix<Scalar>> find_unitary_equivalence(const Matrix<Scalar>& a,
                                                       const Matrix<Scalar>& b,
                                                       double tol = kStructuralTol) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("find_unitary_equivalence: shape mismatch");
  if ((a.adjoint() * a - b.adjoint() * b).norm() > tol) return std::nullopt;
  const Matrix<Scalar> u = polar_unitary_factor<Scalar>(b * a.adjoint());
  if ((u * a - b).norm() > tol) return std::nullopt;
  return u;
}

}  // namespace ff
