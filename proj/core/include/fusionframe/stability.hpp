#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>

#include "fusionframe/descent.hpp"
#include "fusionframe/frame.hpp"
#include "fusionframe/random.hpp"

namespace ff {

/// Binomial coefficient, guarded against overflow of the coordinate count.
inline std::uint64_t binomial(int d, int k) {
  if (k < 0 || k > d) return 0;
  std::uint64_t out = 1;
  for (int j = 1; j <= k; ++j) {
    out = out * static_cast<std::uint64_t>(d - k + j) / static_cast<std::uint64_t>(j);
    if (out > (1ULL << 22))
      throw std::runtime_error("binomial: Plucker coordinate count too large");
  }
  return out;
}

/// All k-element subsets of {0, ..., d-1} in lexicographic order.
inline std::vector<std::vector<int>> k_subsets(int d, int k) {
  std::vector<std::vector<int>> out;
  out.reserve(binomial(d, k));
  std::vector<int> cur(k);
  for (int j = 0; j < k; ++j) cur[j] = j;
  while (true) {
    out.push_back(cur);
    int j = k - 1;
    while (j >= 0 && cur[j] == d - k + j) --j;
    if (j < 0) break;
    ++cur[j];
    for (int l = j + 1; l < k; ++l) cur[l] = cur[l - 1] + 1;
  }
  return out;
}

/// The image of a frame under the product of Plucker embeddings, stored in
/// factored form: factor i lists, in lexicographic subset order, the k_i x k_i
/// minor determinants of A_i. The full tensor is the outer product of the
/// factors and is materialized only on demand.
template <typename Scalar>
struct PluckerVector {
  FrameConfig config;
  std::vector<Vector<Scalar>> factors;

  double norm() const {
    double out = 1.0;
    for (const auto& f : factors) out *= f.norm();
    return out;
  }

  /// Dense tensor as kron(factors[0], ..., factors[N-1]); multi-index with
  /// the first block slowest.
  Vector<Scalar> dense() const {
    Vector<Scalar> out = Vector<Scalar>::Ones(1);
    for (const auto& f : factors) {
      Vector<Scalar> next(out.size() * f.size());
      for (Eigen::Index a = 0; a < out.size(); ++a)
        next.segment(a * f.size(), f.size()) = out[a] * f;
      out.swap(next);
    }
    return out;
  }
};

template <typename Scalar>
PluckerVector<Scalar> plucker_embed(const OperatorFrame<Scalar>& frame) {
  PluckerVector<Scalar> tau{frame.config(), {}};
  tau.factors.reserve(frame.blocks().size());
  for (int i = 0; i < frame.frame_count(); ++i) {
    const Matrix<Scalar>& a = frame.block(i);
    const int k = frame.config().ranks[i];
    const auto subsets = k_subsets(frame.dim(), k);
    Vector<Scalar> minors(static_cast<Eigen::Index>(subsets.size()));
    for (size_t idx = 0; idx < subsets.size(); ++idx)
      minors[static_cast<Eigen::Index>(idx)] = Matrix<Scalar>(a(Eigen::all, subsets[idx])).determinant();
    tau.factors.push_back(std::move(minors));
  }
  return tau;
}

/// Coordinate action of the one-parameter subgroup
/// diag(t^{d-ell} I_ell, t^{-ell} I_{d-ell}): the coordinate on subset J of
/// block i scales by t raised to the sum of per-index weights. The input
/// embedding must be taken in the eigenbasis of the frame operator
/// (eigenvalues decreasing), i.e. of the frame right-multiplied by the
/// certificate's basis_rotation.
template <typename Scalar>
PluckerVector<Scalar> one_ps_scale(const PluckerVector<Scalar>& tau, double t, int ell) {
  const int d = tau.config.dim;
  PluckerVector<Scalar> out = tau;
  for (size_t i = 0; i < out.factors.size(); ++i) {
    const auto subsets = k_subsets(d, tau.config.ranks[i]);
    for (size_t idx = 0; idx < subsets.size(); ++idx) {
      long long w = 0;
      for (int j : subsets[idx]) w += (j < ell) ? (d - ell) : -ell;
      out.factors[i][static_cast<Eigen::Index>(idx)] *= Scalar(std::pow(t, static_cast<double>(w)));
    }
  }
  return out;
}

/// Slack FFP - n^2/d in the Welch-type bound; zero within tolerance exactly
/// at tight fusion frames.
template <typename Scalar>
double welch_gap(const OperatorFrame<Scalar>& frame) {
  if (!is_fusion_frame(frame))
    throw std::invalid_argument("welch_gap: input is not a fusion frame");
  return ffp(frame) - welch_bound(frame.config());
}

// ---------------------------------------------------------------------------
// Subspace utilities. Subspaces are represented by matrices with orthonormal
// columns; ranks and intersection dimensions use a relative singular value
// threshold (sigma counts as zero below rel_tol * sigma_max).
// ---------------------------------------------------------------------------

template <typename Scalar>
int numerical_rank(const Matrix<Scalar>& m, double rel_tol = kStructuralTol) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix<Scalar>> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv[0] <= 0.0) return 0;
  int r = 0;
  for (Eigen::Index j = 0; j < sv.size(); ++j)
    if (sv[j] > rel_tol * sv[0]) ++r;
  return r;
}

/// Orthonormal basis of the column space.
template <typename Scalar>
Matrix<Scalar> column_space_basis(const Matrix<Scalar>& m, double rel_tol = kStructuralTol) {
  if (m.cols() == 0) return Matrix<Scalar>(m.rows(), 0);
  Eigen::JacobiSVD<Matrix<Scalar>> svd(m, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  int r = 0;
  for (Eigen::Index j = 0; j < sv.size(); ++j)
    if (sv[0] > 0.0 && sv[j] > rel_tol * sv[0]) ++r;
  return svd.matrixU().leftCols(r);
}

/// dim(col(u) ∩ col(v)) for orthonormal bases u, v.
template <typename Scalar>
int subspace_intersection_dim(const Matrix<Scalar>& u, const Matrix<Scalar>& v,
                              double rel_tol = kStructuralTol) {
  if (u.cols() == 0 || v.cols() == 0) return 0;
  Matrix<Scalar> stacked(u.rows(), u.cols() + v.cols());
  stacked << u, v;
  return static_cast<int>(u.cols() + v.cols()) - numerical_rank(stacked, rel_tol);
}

/// Orthonormal basis of col(u) ∩ col(v), from the nullspace of [u, -v].
template <typename Scalar>
Matrix<Scalar> subspace_intersection(const Matrix<Scalar>& u, const Matrix<Scalar>& v,
                                     double rel_tol = kStructuralTol) {
  if (u.cols() == 0 || v.cols() == 0) return Matrix<Scalar>(u.rows(), 0);
  Matrix<Scalar> stacked(u.rows(), u.cols() + v.cols());
  stacked << u, -v;
  Eigen::JacobiSVD<Matrix<Scalar>> svd(stacked, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  int rank = 0;
  for (Eigen::Index j = 0; j < sv.size(); ++j)
    if (sv[0] > 0.0 && sv[j] > rel_tol * sv[0]) ++rank;
  const Eigen::Index null_dim = stacked.cols() - rank;
  if (null_dim == 0) return Matrix<Scalar>(u.rows(), 0);
  Matrix<Scalar> vectors(u.rows(), null_dim);
  for (Eigen::Index j = 0; j < null_dim; ++j)
    vectors.col(j) = u * svd.matrixV().col(stacked.cols() - 1 - j).head(u.cols());
  return column_space_basis(vectors, rel_tol);
}

// ---------------------------------------------------------------------------
// Property-S checking.
// ---------------------------------------------------------------------------

/// A proper subspace Q at which the averaged-intersection inequality is
/// evaluated: lhs = (1/dim Q) * sum_i dim(S_i ∩ Q), rhs = n/d. A witness with
/// lhs > rhs certifies the property fails; the margin is recomputable from
/// the basis alone.
template <typename Scalar>
struct SubspaceWitness {
  Matrix<Scalar> basis;
  std::vector<int> intersection_dims;
  double lhs = 0.0;
  double rhs = 0.0;
};

enum class PropertySVerdict { Satisfied, Violated, Inconclusive };

inline const char* to_string(PropertySVerdict v) {
  switch (v) {
    case PropertySVerdict::Satisfied: return "satisfied";
    case PropertySVerdict::Violated: return "violated";
    default: return "inconclusive";
  }
}

template <typename Scalar>
struct PropertySReport {
  PropertySVerdict verdict = PropertySVerdict::Inconclusive;
  std::optional<SubspaceWitness<Scalar>> witness;
  /// True when the candidate family provably covers a maximizing subspace
  /// (classical case, all ranks 1, subset enumeration complete).
  bool exhaustive = false;
};

struct PropertySOptions {
  double tol = kStructuralTol;      // relative rank threshold
  double violation_margin = 1e-9;   // lhs must exceed rhs by this much
  int subset_cap = 12;              // max |T| in the sum/intersection family
  int random_subspaces_per_dim = 8;
  std::uint64_t seed = 0xC0FFEE123456789AULL;
};

template <typename Scalar>
SubspaceWitness<Scalar> evaluate_subspace(const OperatorFrame<Scalar>& frame,
                                          const Matrix<Scalar>& q_basis,
                                          double rel_tol = kStructuralTol) {
  if (q_basis.cols() < 1 || q_basis.rows() != frame.dim())
    throw std::invalid_argument("evaluate_subspace: basis must be d x q with q >= 1");
  SubspaceWitness<Scalar> w;
  w.basis = q_basis;
  w.rhs = static_cast<double>(frame.total_rank()) / frame.dim();
  int total = 0;
  for (int i = 0; i < frame.frame_count(); ++i) {
    const Matrix<Scalar> block_basis = frame.block(i).adjoint();
    const int dim = subspace_intersection_dim(block_basis, q_basis, rel_tol);
    w.intersection_dims.push_back(dim);
    total += dim;
  }
  w.lhs = static_cast<double>(total) / static_cast<double>(q_basis.cols());
  return w;
}

/// Semidecision of the subspace-intersection property over a documented
/// candidate family of proper subspaces:
///   (a) eigenspaces of S and sums of eigenspaces,
///   (b) sums and intersections of the block subspaces over index subsets
///       of size <= subset_cap (pairwise intersections included),
///   (c) random subspaces of every dimension 1..d-1 (deterministic seed).
/// The first violating candidate, in the enumeration order above, is
/// returned as the witness. When no violation is found the verdict is exact
/// (Satisfied) only in the classical case where all ranks are 1 and the
/// subset enumeration is complete, because a maximizing subspace can then be
/// taken among spans of subsets of the frame vectors; otherwise the verdict
/// is Inconclusive.
template <typename Scalar>
PropertySReport<Scalar> check_property_S(const OperatorFrame<Scalar>& frame,
                                         const PropertySOptions& options = {}) {
  if (!is_fusion_frame(frame))
    throw std::invalid_argument("check_property_S: input is not a fusion frame");
  const int d = frame.dim();
  const int n_blocks = frame.frame_count();
  PropertySReport<Scalar> report;

  auto try_candidate = [&](const Matrix<Scalar>& basis) -> bool {
    if (basis.cols() == 0 || basis.cols() >= d) return false;
    SubspaceWitness<Scalar> w = evaluate_subspace(frame, basis, options.tol);
    if (w.lhs > w.rhs + options.violation_margin) {
      report.verdict = PropertySVerdict::Violated;
      report.witness = std::move(w);
      return true;
    }
    return false;
  };

  // (a) eigenspace clusters of S, in decreasing-eigenvalue order, then sums
  // of clusters in increasing bitmask order.
  const auto eig = eigh_descending(frame_operator(frame));
  std::vector<std::pair<int, int>> clusters;  // [start, end) column ranges
  for (int start = 0; start < d;) {
    int end = start + 1;
    while (end < d && eig.eigenvalues[end - 1] - eig.eigenvalues[end] < kSpectralTol) ++end;
    clusters.emplace_back(start, end);
    start = end;
  }
  const int n_clusters = static_cast<int>(clusters.size());
  for (const auto& [start, end] : clusters)
    if (try_candidate(eig.eigenvectors.middleCols(start, end - start))) return report;
  for (unsigned mask = 1; mask < (1u << n_clusters); ++mask) {
    if ((mask & (mask - 1)) == 0) continue;  // singles already done
    int cols = 0;
    for (int c = 0; c < n_clusters; ++c)
      if (mask & (1u << c)) cols += clusters[c].second - clusters[c].first;
    if (cols >= d) continue;
    Matrix<Scalar> basis(d, cols);
    int pos = 0;
    for (int c = 0; c < n_clusters; ++c)
      if (mask & (1u << c)) {
        const int width = clusters[c].second - clusters[c].first;
        basis.middleCols(pos, width) = eig.eigenvectors.middleCols(clusters[c].first, width);
        pos += width;
      }
    if (try_candidate(basis)) return report;
  }

  // (b) sums and intersections of block subspaces over index subsets, by
  // increasing size, lexicographic within each size.
  std::vector<Matrix<Scalar>> block_bases;
  block_bases.reserve(n_blocks);
  for (int i = 0; i < n_blocks; ++i) block_bases.push_back(frame.block(i).adjoint());
  const int cap = std::max(2, std::min(n_blocks, options.subset_cap));
  for (int size = 1; size <= cap; ++size) {
    for (const auto& subset : k_subsets(n_blocks, size)) {
      Eigen::Index total_cols = 0;
      for (int i : subset) total_cols += block_bases[i].cols();
      Matrix<Scalar> stacked(d, total_cols);
      Eigen::Index pos = 0;
      for (int i : subset) {
        stacked.middleCols(pos, block_bases[i].cols()) = block_bases[i];
        pos += block_bases[i].cols();
      }
      if (try_candidate(column_space_basis(stacked, options.tol))) return report;
      if (size >= 2) {
        Matrix<Scalar> inter = block_bases[subset[0]];
        for (size_t t = 1; t < subset.size() && inter.cols() > 0; ++t)
          inter = subspace_intersection(inter, block_bases[subset[t]], options.tol);
        if (try_candidate(inter)) return report;
      }
    }
  }

  // (c) random subspaces of each dimension.
  GaussianStream stream(options.seed);
  for (int q = 1; q < d; ++q) {
    for (int c = 0; c < options.random_subspaces_per_dim; ++c) {
      Matrix<Scalar> g = gaussian_matrix<Scalar>(d, q, stream);
      if (try_candidate(column_space_basis(g, options.tol))) return report;
    }
  }

  const bool classical =
      std::all_of(frame.config().ranks.begin(), frame.config().ranks.end(),
                  [](int k) { return k == 1; });
  report.exhaustive = classical && n_blocks <= cap;
  report.verdict =
      report.exhaustive ? PropertySVerdict::Satisfied : PropertySVerdict::Inconclusive;
  return report;
}

// ---------------------------------------------------------------------------
// One-parameter-subgroup instability certificates.
// ---------------------------------------------------------------------------

struct EigenvalueGapError : std::runtime_error {
  explicit EigenvalueGapError(double g)
      : std::runtime_error("instability_certificate: ambiguous top eigenvalue cluster, gap " +
                           std::to_string(g)),
        gap(g) {}
  double gap;
};

/// Witness that a non-tight critical point is unstable: the subgroup
/// diag(t^{d-ell} I_ell, t^{-ell} I_{d-ell}) in the S-eigenbasis drives the
/// Plucker image to zero with weight t^(m d - n ell).
template <typename Scalar>
struct OnePSCertificate {
  double top_eigenvalue = 0.0;
  int ell = 0;  // multiplicity of the top eigenvalue
  int m = 0;    // aligned rows lying in the top eigenspace
  long long weight_exponent = 0;  // m*d - n*ell, positive certifies instability
  Matrix<Scalar> basis_rotation;  // columns: eigenvectors of S, decreasing
};

/// Computes the instability certificate of a critical point. Returns
/// std::nullopt for tight frames (no strict top eigenspace). Non-critical
/// input is a precondition violation (std::invalid_argument); an eigenvalue
/// cluster whose boundary gap is below tol raises EigenvalueGapError.
template <typename Scalar>
std::optional<OnePSCertificate<Scalar>> instability_certificate(const OperatorFrame<Scalar>& frame,
                                                                double tol = kSpectralTol) {
  const auto report = classify_critical_point(frame, std::max(tol, kConvergenceTol));
  if (!report.is_critical)
    throw std::invalid_argument("instability_certificate: frame is not a critical point");
  if (report.is_tight) return std::nullopt;

  const Matrix<Scalar> s = frame_operator(frame);
  const auto eig = eigh_descending(s);
  const int d = frame.dim();
  const double lambda = eig.eigenvalues[0];
  int ell = 1;
  while (ell < d && lambda - eig.eigenvalues[ell] <= tol) ++ell;
  if (ell == d) throw EigenvalueGapError(eig.eigenvalues[0] - eig.eigenvalues[d - 1]);
  const double gap = eig.eigenvalues[ell - 1] - eig.eigenvalues[ell];
  if (gap < tol) throw EigenvalueGapError(gap);

  int m = 0;
  for (const auto& block : report.aligned_frame.blocks()) {
    for (Eigen::Index j = 0; j < block.rows(); ++j) {
      const double rho = std::real((block.row(j) * s * block.row(j).adjoint())(0, 0));
      if (std::abs(rho - lambda) <= tol) ++m;
    }
  }
  OnePSCertificate<Scalar> cert{lambda, ell, m,
                                static_cast<long long>(m) * d -
                                    static_cast<long long>(frame.total_rank()) * ell,
                                eig.eigenvectors};
  if (cert.weight_exponent <= 0)
    throw std::runtime_error("instability_certificate: nonpositive weight at a non-tight "
                             "critical point; tolerances are inconsistent");
  return cert;
}

}  // namespace ff
