#pragma once

#include <cmath>
#include <utility>

#include "fusionframe/types.hpp"

namespace ff {

/// An N-tuple of k_i x d blocks A_i over a fixed scalar field. Construction
/// validates shapes only; membership in the fusion-frame manifold (row
/// orthonormality plus positive-definite frame operator) is a separate,
/// testable property (`is_fusion_frame`).
///
/// Immutable after construction; safe to share across threads.
template <typename Scalar>
class OperatorFrame {
 public:
  OperatorFrame(FrameConfig config, std::vector<Matrix<Scalar>> blocks)
      : config_(std::move(config)), blocks_(std::move(blocks)) {
    config_.validate();
    if (config_.field != ScalarTraits<Scalar>::field)
      throw std::invalid_argument("OperatorFrame: scalar type does not match config field");
    if (static_cast<int>(blocks_.size()) != config_.frame_count())
      throw std::invalid_argument("OperatorFrame: block count mismatch");
    for (int i = 0; i < config_.frame_count(); ++i) {
      if (blocks_[i].rows() != config_.ranks[i] || blocks_[i].cols() != config_.dim)
        throw std::invalid_argument("OperatorFrame: block " + std::to_string(i) +
                                    " has wrong shape");
    }
  }

  const FrameConfig& config() const { return config_; }
  const std::vector<Matrix<Scalar>>& blocks() const { return blocks_; }
  const Matrix<Scalar>& block(int i) const { return blocks_.at(static_cast<size_t>(i)); }
  int dim() const { return config_.dim; }
  int frame_count() const { return config_.frame_count(); }
  int total_rank() const { return config_.total_rank(); }

 private:
  FrameConfig config_;
  std::vector<Matrix<Scalar>> blocks_;
};

using RealFrame = OperatorFrame<double>;
using ComplexFrame = OperatorFrame<Complex>;

/// Frame operator S = sum_i A_i^* A_i (d x d, Hermitian PSD).
template <typename Scalar>
Matrix<Scalar> frame_operator(const OperatorFrame<Scalar>& frame) {
  const int d = frame.dim();
  Matrix<Scalar> s = Matrix<Scalar>::Zero(d, d);
  for (const auto& a : frame.blocks()) s += a.adjoint() * a;
  return s;
}

/// Fusion frame potential ||S||_F^2.
template <typename Scalar>
double ffp(const OperatorFrame<Scalar>& frame) {
  return frame_operator(frame).squaredNorm();
}

/// Lower bound n^2/d on the potential, attained exactly at tight frames.
inline double welch_bound(const FrameConfig& config) {
  config.validate();
  const double n = static_cast<double>(config.total_rank());
  return n * n / static_cast<double>(config.dim);
}

namespace detail {

template <typename Scalar>
double hermitian_defect(const Matrix<Scalar>& m) {
  return (m - m.adjoint()).norm();
}

/// Throws std::invalid_argument unless m is square and Hermitian within
/// tol * max(1, ||m||).
template <typename Scalar>
void require_hermitian(const Matrix<Scalar>& m, double tol) {
  if (m.rows() != m.cols())
    throw std::invalid_argument("expected a square matrix");
  const double scale = std::max(1.0, m.norm());
  if (hermitian_defect(m) > tol * scale)
    throw std::invalid_argument("matrix is not Hermitian within tolerance");
}

}  // namespace detail

template <typename Scalar>
struct EigenDecomposition {
  RealVector eigenvalues;  // sorted decreasing
  Matrix<Scalar> eigenvectors;  // columns, same order
};

/// Hermitian eigendecomposition with eigenvalues sorted decreasing. Within
/// clusters of numerically equal eigenvalues (adjacent gap < cluster_tol)
/// the solver's ordering of eigenvectors is preserved, so repeated calls on
/// the same data give identical output.
template <typename Scalar>
EigenDecomposition<Scalar> eigh_descending(const Matrix<Scalar>& m,
                                           double tol = kStructuralTol,
                                           double cluster_tol = kSpectralTol) {
  detail::require_hermitian(m, tol);
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> solver(m);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("Hermitian eigensolver failed to converge");
  const RealVector asc = solver.eigenvalues();
  const Matrix<Scalar>& vec = solver.eigenvectors();
  const Eigen::Index d = asc.size();

  // Clusters are contiguous in the ascending list; emit them in reverse
  // order, keeping solver order inside each cluster.
  EigenDecomposition<Scalar> out;
  out.eigenvalues.resize(d);
  out.eigenvectors.resize(d, d);
  Eigen::Index hi = d;
  Eigen::Index pos = 0;
  while (hi > 0) {
    Eigen::Index lo = hi - 1;
    while (lo > 0 && asc[lo] - asc[lo - 1] < cluster_tol) --lo;
    for (Eigen::Index j = lo; j < hi; ++j, ++pos) {
      out.eigenvalues[pos] = asc[j];
      out.eigenvectors.col(pos) = vec.col(j);
    }
    hi = lo;
  }
  return out;
}

/// Real eigenvalues of a Hermitian operator, sorted decreasing.
/// Non-Hermitian input is a structural error.
template <typename Scalar>
RealVector spectrum(const Matrix<Scalar>& op, double tol = kStructuralTol) {
  return eigh_descending(op, tol).eigenvalues;
}

/// True iff every block has orthonormal rows (||A_i A_i^* - I|| <= tol) and
/// the frame operator is positive definite (lambda_min > tol).
template <typename Scalar>
bool is_fusion_frame(const OperatorFrame<Scalar>& frame, double tol = kStructuralTol) {
  for (const auto& a : frame.blocks()) {
    const Matrix<Scalar> gram = a * a.adjoint();
    if ((gram - Matrix<Scalar>::Identity(a.rows(), a.rows())).norm() > tol) return false;
  }
  const RealVector lambda = spectrum(frame_operator(frame), std::max(tol, kStructuralTol));
  return lambda[lambda.size() - 1] > tol;
}

/// True iff ||S - (n/d) I|| <= tol.
template <typename Scalar>
bool is_tight(const OperatorFrame<Scalar>& frame, double tol = kStructuralTol) {
  const int d = frame.dim();
  const double ratio = static_cast<double>(frame.total_rank()) / d;
  Matrix<Scalar> defect = frame_operator(frame);
  defect.diagonal().array() -= Scalar(ratio);
  return defect.norm() <= tol;
}

/// True iff the nonzero eigenvalues of each P_i = A_i^* A_i match the target
/// block spectra and spectrum(S) matches the target frame spectrum, all
/// entrywise within tol.
template <typename Scalar>
bool check_spectral_membership(const OperatorFrame<Scalar>& frame, const SpectralData& target,
                               double tol = kSpectralTol) {
  target.validate(frame.config());
  for (int i = 0; i < frame.frame_count(); ++i) {
    const Matrix<Scalar>& a = frame.block(i);
    const RealVector p_spec = spectrum(Matrix<Scalar>(a.adjoint() * a));
    // Nonzero part of the projector spectrum: the top k_i eigenvalues.
    for (int j = 0; j < frame.config().ranks[i]; ++j)
      if (std::abs(p_spec[j] - target.block_spectra[i][j]) > tol) return false;
    for (Eigen::Index j = frame.config().ranks[i]; j < p_spec.size(); ++j)
      if (std::abs(p_spec[j]) > tol) return false;
  }
  const RealVector s_spec = spectrum(frame_operator(frame));
  for (int j = 0; j < frame.dim(); ++j)
    if (std::abs(s_spec[j] - target.frame_spectrum[j]) > tol) return false;
  return true;
}

/// Embeds a real frame into the complex frame space with the same parameters.
inline ComplexFrame complexify(const RealFrame& frame) {
  FrameConfig config = frame.config();
  config.field = Field::Complex;
  std::vector<Matrix<Complex>> blocks;
  blocks.reserve(frame.blocks().size());
  for (const auto& a : frame.blocks()) blocks.push_back(a.cast<Complex>());
  return ComplexFrame(std::move(config), std::move(blocks));
}

/// Largest imaginary part magnitude over all block entries.
inline double max_imaginary_part(const ComplexFrame& frame) {
  double m = 0.0;
  for (const auto& a : frame.blocks()) m = std::max(m, a.imag().cwiseAbs().maxCoeff());
  return m;
}

}  // namespace ff
