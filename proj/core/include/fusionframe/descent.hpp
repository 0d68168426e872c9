#pragma once

#include <cstdint>
#include <optional>

#include "fusionframe/frame.hpp"

namespace ff {

struct DescentSettings {
  double step_size = 1e-2;
  std::int64_t max_iters = 100000;
  double grad_tol = kConvergenceTol;
  std::int64_t record_every = 1;
  /// With line search enabled the accepted step is carried over and grown
  /// under an Armijo acceptance rule; otherwise every iteration starts from
  /// step_size. Backtracking on increase is active in both modes.
  bool line_search = false;
  int max_backtracks = 30;

  void validate() const {
    if (!(step_size > 0.0)) throw std::invalid_argument("DescentSettings: step_size must be positive");
    if (max_iters < 1) throw std::invalid_argument("DescentSettings: max_iters must be >= 1");
    if (!(grad_tol > 0.0)) throw std::invalid_argument("DescentSettings: grad_tol must be positive");
    if (record_every < 1) throw std::invalid_argument("DescentSettings: record_every must be >= 1");
  }
};

struct TraceSample {
  std::int64_t iter = 0;
  double ffp = 0.0;
  double grad_norm = 0.0;
};

template <typename Scalar>
struct DescentTrace {
  std::vector<TraceSample> samples;
  OperatorFrame<Scalar> final_frame;
  bool converged = false;
};

/// Raised by `retract` when a block has lost row rank; the step was too
/// large and the caller should shrink it.
struct StepTooLargeError : std::runtime_error {
  explicit StepTooLargeError(int block_index)
      : std::runtime_error("retract: block " + std::to_string(block_index) +
                           " is rank deficient; step too large"),
        block(block_index) {}
  int block;
};

/// Raised by `descend` when the potential keeps increasing after the
/// backtracking budget is spent. Carries the trace accumulated so far.
template <typename Scalar>
struct DescentDivergedError : std::runtime_error {
  explicit DescentDivergedError(DescentTrace<Scalar> partial)
      : std::runtime_error("descend: potential increased despite backtracking"),
        trace(std::move(partial)) {}
  DescentTrace<Scalar> trace;
};

namespace detail {

template <typename Scalar>
Matrix<Scalar> frame_operator_of_blocks(const std::vector<Matrix<Scalar>>& blocks, int d) {
  Matrix<Scalar> s = Matrix<Scalar>::Zero(d, d);
  for (const auto& a : blocks) s += a.adjoint() * a;
  return s;
}

template <typename Scalar>
std::vector<Matrix<Scalar>> riemannian_gradient_blocks(const std::vector<Matrix<Scalar>>& blocks,
                                                       const Matrix<Scalar>& s) {
  std::vector<Matrix<Scalar>> grad;
  grad.reserve(blocks.size());
  for (const auto& a : blocks) {
    const Matrix<Scalar> as = a * s;
    grad.push_back(4.0 * (as - (as * a.adjoint()) * a));
  }
  return grad;
}

template <typename Scalar>
double block_tuple_norm(const std::vector<Matrix<Scalar>>& blocks) {
  double sq = 0.0;
  for (const auto& b : blocks) sq += b.squaredNorm();
  return std::sqrt(sq);
}

}  // namespace detail

/// Gradient of the potential extended to the ambient matrix space:
/// block i equals 4 A_i S. Defined for arbitrary blocks, no fusion-frame
/// membership required.
template <typename Scalar>
std::vector<Matrix<Scalar>> extrinsic_gradient(const OperatorFrame<Scalar>& frame) {
  const Matrix<Scalar> s = frame_operator(frame);
  std::vector<Matrix<Scalar>> grad;
  grad.reserve(frame.blocks().size());
  for (const auto& a : frame.blocks()) grad.push_back(4.0 * (a * s));
  return grad;
}

/// Riemannian gradient on the fusion-frame manifold: block i equals
/// 4 A_i S (I - A_i^* A_i), the extrinsic gradient projected onto the
/// orthogonal complement of the row span. Each block is horizontal:
/// (grad_i) A_i^* = 0. The projection formula assumes A_i A_i^* = I, so
/// non-fusion-frame input is rejected.
template <typename Scalar>
std::vector<Matrix<Scalar>> riemannian_gradient(const OperatorFrame<Scalar>& frame,
                                                double tol = kStructuralTol) {
  if (!is_fusion_frame(frame, tol))
    throw std::invalid_argument("riemannian_gradient: input is not a fusion frame");
  return detail::riemannian_gradient_blocks(frame.blocks(), frame_operator(frame));
}

/// Polar retraction: every block is replaced by (B B^*)^{-1/2} B, the metric
/// projection onto the row-orthonormal matrices. A block whose smallest
/// singular value falls below rank_tol (relative to its largest) raises
/// StepTooLargeError.
template <typename Scalar>
OperatorFrame<Scalar> retract(const FrameConfig& config, const std::vector<Matrix<Scalar>>& blocks,
                              double rank_tol = 1e-12) {
  std::vector<Matrix<Scalar>> out;
  out.reserve(blocks.size());
  for (size_t i = 0; i < blocks.size(); ++i) {
    Eigen::JacobiSVD<Matrix<Scalar>> svd(blocks[i], Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv[sv.size() - 1] <= rank_tol * std::max(1.0, sv[0]))
      throw StepTooLargeError(static_cast<int>(i));
    out.push_back(svd.matrixU() * svd.matrixV().adjoint());
  }
  return OperatorFrame<Scalar>(config, std::move(out));
}

/// Projected gradient descent on the fusion frame potential:
///   A <- retract(A - step * grad FFP(A))
/// with backtracking (the step is halved, up to settings.max_backtracks
/// times, whenever it would increase the potential or break a block's rank).
/// Stops when the gradient norm falls to settings.grad_tol (converged) or
/// the iteration budget runs out (not converged). Persistent increase after
/// backtracking raises DescentDivergedError with the partial trace.
template <typename Scalar>
DescentTrace<Scalar> descend(const OperatorFrame<Scalar>& start, const DescentSettings& settings) {
  settings.validate();
  if (!is_fusion_frame(start))
    throw std::invalid_argument("descend: start is not a fusion frame");

  const FrameConfig& config = start.config();
  const int d = config.dim;
  std::vector<Matrix<Scalar>> blocks = start.blocks();
  Matrix<Scalar> s = detail::frame_operator_of_blocks(blocks, d);
  double cur_ffp = s.squaredNorm();
  std::vector<Matrix<Scalar>> grad = detail::riemannian_gradient_blocks(blocks, s);
  double grad_norm = detail::block_tuple_norm(grad);

  std::vector<TraceSample> samples;
  samples.push_back({0, cur_ffp, grad_norm});
  auto make_trace = [&](bool converged) {
    return DescentTrace<Scalar>{samples, OperatorFrame<Scalar>(config, blocks), converged};
  };

  if (grad_norm <= settings.grad_tol) return make_trace(true);

  double carry_step = settings.step_size;
  for (std::int64_t iter = 1; iter <= settings.max_iters; ++iter) {
    const double slack = 1e-12 * std::max(1.0, std::abs(cur_ffp));
    // Line-search mode grows the step between iterations under an Armijo
    // acceptance rule; plain non-increase would let the grown step settle at
    // the stability boundary where progress stalls. Once the Armijo decrease
    // falls below floating-point resolution the mode hands back to the base
    // step, which accepts any non-increase up to roundoff (exact plateaus
    // near machine precision must not be mistaken for divergence).
    const bool adaptive =
        settings.line_search && 1e-4 * carry_step * grad_norm * grad_norm > slack;
    double step = adaptive ? carry_step : settings.step_size;
    std::optional<OperatorFrame<Scalar>> accepted;
    double accepted_ffp = 0.0;
    int backtracks = 0;
    for (int bt = 0; bt <= settings.max_backtracks; ++bt) {
      std::vector<Matrix<Scalar>> trial(blocks.size());
      for (size_t i = 0; i < blocks.size(); ++i) trial[i] = blocks[i] - step * grad[i];
      try {
        OperatorFrame<Scalar> candidate = retract(config, trial);
        const double cand_ffp = ffp(candidate);
        const double required_drop = adaptive ? 1e-4 * step * grad_norm * grad_norm : 0.0;
        if (cand_ffp <= cur_ffp - required_drop + slack) {
          accepted = std::move(candidate);
          accepted_ffp = cand_ffp;
          backtracks = bt;
          break;
        }
      } catch (const StepTooLargeError&) {
        // fall through to halving
      }
      step *= 0.5;
    }
    if (!accepted) throw DescentDivergedError<Scalar>(make_trace(false));
    if (adaptive) carry_step = (backtracks == 0) ? std::min(2.0 * step, 1.0) : step;

    blocks = accepted->blocks();
    cur_ffp = accepted_ffp;
    s = detail::frame_operator_of_blocks(blocks, d);
    grad = detail::riemannian_gradient_blocks(blocks, s);
    grad_norm = detail::block_tuple_norm(grad);

    const bool done = grad_norm <= settings.grad_tol || iter == settings.max_iters;
    if (iter % settings.record_every == 0 || done)
      samples.push_back({iter, cur_ffp, grad_norm});
    if (done) return make_trace(grad_norm <= settings.grad_tol);
  }
  return make_trace(false);  // unreachable; loop exits via `done`
}

template <typename Scalar>
struct CriticalPointReport {
  double gradient_norm = 0.0;
  bool is_critical = false;
  bool is_tight = false;
  bool row_spaces_invariant = false;
  /// Blocks left-rotated so that, at a critical point, the rows are
  /// eigenvectors of the frame operator.
  OperatorFrame<Scalar> aligned_frame;
};

/// Classifies a point of the fusion-frame manifold. Critical points of the
/// potential are exactly those whose block row spaces are invariant under S;
/// the aligned frame applies, per block, the unitary diagonalizing
/// A_i S A_i^* (eigenvalues decreasing) so aligned rows are eigenvectors of
/// S whenever the point is critical.
template <typename Scalar>
CriticalPointReport<Scalar> classify_critical_point(const OperatorFrame<Scalar>& frame,
                                                    double tol = kConvergenceTol) {
  if (!is_fusion_frame(frame))
    throw std::invalid_argument("classify_critical_point: input is not a fusion frame");
  const Matrix<Scalar> s = frame_operator(frame);
  const auto grad = detail::riemannian_gradient_blocks(frame.blocks(), s);
  const double grad_norm = detail::block_tuple_norm(grad);

  double max_residual = 0.0;  // || A_i S (I - A_i^* A_i) ||, per block
  std::vector<Matrix<Scalar>> aligned;
  aligned.reserve(frame.blocks().size());
  for (size_t i = 0; i < frame.blocks().size(); ++i) {
    const Matrix<Scalar>& a = frame.blocks()[i];
    max_residual = std::max(max_residual, grad[i].norm() / 4.0);
    const Matrix<Scalar> restriction = a * s * a.adjoint();
    const auto eig = eigh_descending(restriction);
    aligned.push_back(eig.eigenvectors.adjoint() * a);
  }

  CriticalPointReport<Scalar> report{
      grad_norm,
      grad_norm <= tol,
      is_tight(frame),
      max_residual <= tol,
      OperatorFrame<Scalar>(frame.config(), std::move(aligned)),
  };
  return report;
}

}  // namespace ff
