#pragma once

#include <array>
#include <cmath>

#include "fusionframe/stability.hpp"

namespace ff {

/// Geometry of the limiting frames found when tightening real frames with
/// ranks (1,1,2) in dimension 3: the two lines span a plane Q which meets
/// the rank-2 block's plane in a line, Q is orthogonal to that plane (right
/// dihedral angle), and the two lines together with the intersection line
/// form a Mercedes-Benz configuration (pairwise angles 2*pi/3).
struct MinimizerGeometry {
  int q_meets_plane_dim = 0;          // dim(Q ∩ S); 1 for the limiting frames
  double dihedral_angle = 0.0;        // angle between Q and S, in [0, pi/2]
  std::array<double, 3> pairwise_angles{};  // (l1,l2), (l1, Q∩S), (l2, Q∩S)
  bool mercedes_benz = false;         // all three angles within angle_tol of 2*pi/3
  double max_angle_error = 0.0;
};

/// Analyzes the limit geometry of a real frame with dim 3 and ranks (1,1,2).
/// Angles between lines are measured after orienting representatives away
/// from the first line, which recovers the vector-level 120-degree angles of
/// a Mercedes-Benz configuration.
inline MinimizerGeometry analyze_112_geometry(const RealFrame& frame,
                                              double angle_tol = 1e-3,
                                              double rank_tol = kStructuralTol) {
  if (frame.dim() != 3 || frame.config().ranks != std::vector<int>{1, 1, 2})
    throw std::invalid_argument("analyze_112_geometry: expects dim 3 and ranks (1,1,2)");

  const Eigen::Vector3d l1 = frame.block(0).row(0).transpose().normalized();
  const Eigen::Vector3d l2 = frame.block(1).row(0).transpose().normalized();
  const Matrix<double> plane_basis = frame.block(2).adjoint();  // 3 x 2

  Matrix<double> q_cols(3, 2);
  q_cols.col(0) = l1;
  q_cols.col(1) = l2;
  const Matrix<double> q_basis = column_space_basis(q_cols, rank_tol);

  MinimizerGeometry geometry;
  geometry.q_meets_plane_dim = subspace_intersection_dim(q_basis, plane_basis, rank_tol);
  if (q_basis.cols() != 2) return geometry;  // coincident lines span no plane

  // Dihedral angle between the planes, from their normals.
  const Eigen::Vector3d n_q = l1.cross(l2).normalized();
  const Eigen::Vector3d n_s =
      Eigen::Vector3d(plane_basis.col(0)).cross(Eigen::Vector3d(plane_basis.col(1))).normalized();
  geometry.dihedral_angle = std::acos(std::min(1.0, std::abs(n_q.dot(n_s))));

  if (geometry.q_meets_plane_dim != 1) return geometry;
  const Matrix<double> inter = subspace_intersection(q_basis, plane_basis, rank_tol);
  Eigen::Vector3d l3 = inter.col(0).normalized();

  // Orient l2 and l3 away from l1; in a Mercedes-Benz configuration all
  // pairwise angles then equal 2*pi/3.
  Eigen::Vector3d v2 = (l1.dot(l2) > 0.0) ? Eigen::Vector3d(-l2) : l2;
  Eigen::Vector3d v3 = (l1.dot(l3) > 0.0) ? Eigen::Vector3d(-l3) : l3;
  auto angle = [](const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
    return std::acos(std::clamp(a.dot(b), -1.0, 1.0));
  };
  geometry.pairwise_angles = {angle(l1, v2), angle(l1, v3), angle(v2, v3)};

  const double target = 2.0 * M_PI / 3.0;
  for (double a : geometry.pairwise_angles)
    geometry.max_angle_error = std::max(geometry.max_angle_error, std::abs(a - target));
  geometry.mercedes_benz = geometry.max_angle_error <= angle_tol;
  return geometry;
}

}  // namespace ff
