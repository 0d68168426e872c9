#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fusionframe/stability.hpp"
#include "test_support.hpp"

using namespace ff;
namespace fft = ff::testing;

namespace {

// Independent property-S oracle for the classical case: evaluates the
// averaged-intersection inequality over every subspace spanned by a subset
// of the frame vectors, using Eigen's rank machinery directly.
double classical_max_ratio(const RealFrame& frame) {
  const int n_vectors = frame.frame_count();
  const int d = frame.dim();
  double max_ratio = 0.0;
  for (unsigned mask = 1; mask < (1u << n_vectors); ++mask) {
    Matrix<double> span(d, 0);
    for (int i = 0; i < n_vectors; ++i)
      if (mask & (1u << i)) {
        span.conservativeResize(Eigen::NoChange, span.cols() + 1);
        span.col(span.cols() - 1) = frame.block(i).row(0).transpose();
      }
    Eigen::ColPivHouseholderQR<Matrix<double>> qr(span);
    qr.setThreshold(1e-10);
    const int q_dim = static_cast<int>(qr.rank());
    if (q_dim == 0 || q_dim >= d) continue;
    const Matrix<double> q_basis = qr.householderQ() * Matrix<double>::Identity(d, q_dim);
    int contained = 0;
    for (int i = 0; i < n_vectors; ++i) {
      const Eigen::VectorXd f = frame.block(i).row(0).transpose();
      if ((f - q_basis * (q_basis.transpose() * f)).norm() < 1e-9) ++contained;
    }
    max_ratio = std::max(max_ratio, static_cast<double>(contained) / q_dim);
  }
  return max_ratio;
}

}  // namespace

TEST_CASE("plucker coordinates of an identity-minor block") {
  for (int k : {1, 2, 3}) {
    Matrix<double> a = Matrix<double>::Zero(k, 4);
    a.leftCols(k).setIdentity();
    RealFrame frame({Field::Real, 4, {k}}, {a});
    const auto tau = plucker_embed(frame);
    REQUIRE(tau.factors.size() == 1);
    CHECK(tau.factors[0][0] == doctest::Approx(1.0));  // subset {0,...,k-1} is first in lex order
    CHECK(tau.factors[0].norm() == doctest::Approx(1.0));
  }
}

TEST_CASE("plucker image of fusion frames sits on the unit sphere") {
  const std::vector<FrameConfig> configs = {
      {Field::Real, 3, {1, 1, 2}},
      {Field::Real, 4, {2, 2, 1}},
      {Field::Complex, 4, {3, 2}},
      {Field::Complex, 5, {2, 2, 1}},
  };
  std::uint64_t seed = 0;
  for (const auto& config : configs) {
    for (int t = 0; t < 8; ++t, ++seed) {
      const double norm = config.field == Field::Real
                              ? plucker_embed(random_fusion_frame<double>(config, seed)).norm()
                              : plucker_embed(random_fusion_frame<Complex>(config, seed)).norm();
      CHECK(std::abs(norm - 1.0) < 1e-10);
    }
  }
}

TEST_CASE("left unitaries scale the plucker factor by their determinant") {
  const auto frame = random_fusion_frame<Complex>({Field::Complex, 4, {2}}, 3);
  GaussianStream stream(17);
  const Matrix<Complex> u = random_unitary<Complex>(2, stream);
  const Complex det_u = u.determinant();
  const ComplexFrame rotated(frame.config(), {u * frame.block(0)});
  const auto tau = plucker_embed(frame);
  const auto tau_rot = plucker_embed(rotated);
  CHECK((tau_rot.factors[0] - det_u * tau.factors[0]).norm() < 1e-12);
  CHECK(std::abs(tau_rot.norm() - tau.norm()) < 1e-12);
}

TEST_CASE("dense tensor agrees with the factored norm") {
  const auto frame = random_fusion_frame<double>({Field::Real, 4, {1, 2, 1}}, 29);
  const auto tau = plucker_embed(frame);
  const auto dense = tau.dense();
  CHECK(dense.size() == 4 * 6 * 4);
  CHECK(std::abs(dense.norm() - tau.norm()) < 1e-12);
}

TEST_CASE("subspace intersection utilities") {
  Matrix<double> xy(3, 2), xz(3, 2);
  xy << 1, 0, 0, 1, 0, 0;
  xz << 1, 0, 0, 0, 0, 1;
  CHECK(subspace_intersection_dim(xy, xz) == 1);
  const Matrix<double> line = subspace_intersection(xy, xz);
  REQUIRE(line.cols() == 1);
  CHECK(std::abs(std::abs(line(0, 0)) - 1.0) < 1e-12);
  CHECK(std::abs(line(1, 0)) < 1e-12);
  CHECK(std::abs(line(2, 0)) < 1e-12);

  Matrix<double> x_axis = xy.leftCols(1);
  Matrix<double> y_axis = xy.rightCols(1);
  CHECK(subspace_intersection_dim(x_axis, y_axis) == 0);
  CHECK(subspace_intersection(x_axis, y_axis).cols() == 0);
}

TEST_CASE("property S is violated at e1,e1,e2 with witness span(e1)") {
  const auto report = check_property_S(fft::e1e1e2());
  REQUIRE(report.verdict == PropertySVerdict::Violated);
  REQUIRE(report.witness.has_value());
  const auto& w = *report.witness;
  CHECK(w.basis.cols() == 1);
  CHECK(std::abs(std::abs(w.basis(0, 0)) - 1.0) < 1e-12);  // Q = span(e1)
  CHECK(std::abs(w.basis(1, 0)) < 1e-12);
  CHECK(w.lhs == doctest::Approx(2.0));
  CHECK(w.rhs == doctest::Approx(1.5));
  CHECK(w.intersection_dims == std::vector<int>{1, 1, 0});

  // The margin must be recomputable from the witness basis alone.
  const auto recomputed = evaluate_subspace(fft::e1e1e2(), w.basis);
  CHECK(recomputed.lhs == doctest::Approx(w.lhs));
  CHECK(recomputed.lhs - recomputed.rhs == doctest::Approx(0.5));
}

TEST_CASE("no frame with ranks (1,1,2) in dimension 3 has property S") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto frame = random_fusion_frame<double>({Field::Real, 3, {1, 1, 2}}, seed);
    const auto report = check_property_S(frame);
    REQUIRE(report.verdict == PropertySVerdict::Violated);
    const auto& w = *report.witness;
    CHECK(w.lhs > w.rhs + 1e-9);
    // Witness margin is recomputable from the basis alone.
    const auto recheck = evaluate_subspace(frame, w.basis);
    CHECK(recheck.lhs > recheck.rhs + 1e-9);
  }
}

TEST_CASE("tight frames are never reported violated") {
  for (const auto& tff : fft::tff_zoo(50)) {
    const auto report = check_property_S(tff);
    CHECK(report.verdict != PropertySVerdict::Violated);
  }
}

TEST_CASE("classical verdicts agree with the brute-force oracle") {
  const FrameConfig config{Field::Real, 3, {1, 1, 1, 1, 1}};
  const double rhs = static_cast<double>(config.total_rank()) / config.dim;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto frame = random_fusion_frame<double>(config, seed);
    const auto report = check_property_S(frame);
    CHECK(report.exhaustive);
    const bool oracle_violated = classical_max_ratio(frame) > rhs + 1e-9;
    CHECK((report.verdict == PropertySVerdict::Violated) == oracle_violated);
  }

  // Rigged duplicate vector: span(f1) contains two of the five vectors.
  auto frame = random_fusion_frame<double>(config, 123);
  auto blocks = frame.blocks();
  blocks[1] = blocks[0];
  const RealFrame rigged(config, blocks);
  const auto report = check_property_S(rigged);
  CHECK(report.verdict == PropertySVerdict::Violated);
  CHECK(classical_max_ratio(rigged) > rhs + 1e-9);
}

TEST_CASE("non-classical satisfied verdicts are inconclusive") {
  const auto report = check_property_S(fft::orthogonal_sum(4, {2, 2}));
  CHECK(report.verdict == PropertySVerdict::Inconclusive);
  CHECK_FALSE(report.exhaustive);
}

TEST_CASE("instability certificate at e1,e1,e2") {
  const auto cert = instability_certificate(fft::e1e1e2());
  REQUIRE(cert.has_value());
  CHECK(cert->top_eigenvalue == doctest::Approx(2.0));
  CHECK(cert->ell == 1);
  CHECK(cert->m == 2);
  CHECK(cert->weight_exponent == 1);
}

TEST_CASE("tight frames have no instability certificate") {
  for (const auto& tff : fft::tff_zoo(5))
    CHECK_FALSE(instability_certificate(tff).has_value());
}

TEST_CASE("instability certificate rejects non-critical frames") {
  const auto frame = random_fusion_frame<double>({Field::Real, 3, {1, 1, 2}}, 41);
  CHECK_THROWS_AS(instability_certificate(frame), std::invalid_argument);
}

TEST_CASE("one-parameter subgroup scales the plucker norm by t^(md-nl)") {
  const RealFrame frame = fft::e1e1e2();
  const auto cert = instability_certificate(frame);
  REQUIRE(cert.has_value());
  const int d = frame.dim();

  // Express the frame in the S-eigenbasis.
  std::vector<Matrix<double>> rotated;
  for (const auto& a : frame.blocks()) rotated.push_back(a * cert->basis_rotation);
  const RealFrame in_eigenbasis(frame.config(), rotated);
  const auto tau = plucker_embed(in_eigenbasis);

  RealVector weights(d);
  for (int j = 0; j < d; ++j)
    weights[j] = (j < cert->ell) ? static_cast<double>(d - cert->ell)
                                 : -static_cast<double>(cert->ell);

  for (double t : {0.9, 0.5, 0.1}) {
    std::vector<Matrix<double>> scaled;
    for (const auto& a : rotated) {
      Matrix<double> b = a;
      for (int j = 0; j < d; ++j) b.col(j) *= std::pow(t, weights[j]);
      scaled.push_back(b);
    }
    const double norm = plucker_embed(RealFrame(frame.config(), scaled)).norm();
    const double expected = std::pow(t, static_cast<double>(cert->weight_exponent)) * tau.norm();
    CHECK(std::abs(norm - expected) / expected < 1e-8);

    // The factored coordinate action agrees with re-embedding.
    const auto coordinate_route = one_ps_scale(tau, t, cert->ell);
    CHECK(std::abs(coordinate_route.norm() - norm) / norm < 1e-10);
  }

  // Iterating t -> 0 drives the image to zero: instability realized.
  double t = 0.5;
  double prev = tau.norm();
  int steps = 0;
  while (prev >= 1e-8 && steps < 60) {
    const double now = one_ps_scale(tau, t, cert->ell).norm();
    CHECK(now < prev);
    prev = now;
    t *= 0.5;
    ++steps;
  }
  CHECK(prev < 1e-8);
}

TEST_CASE("non-tight critical points always carry a positive certificate") {
  for (std::uint64_t seed = 51; seed < 56; ++seed) {
    const auto start = random_fusion_frame<double>({Field::Real, 3, {1, 1, 2}}, seed);
    const auto trace = descend(start, {});
    REQUIRE(trace.converged);
    const auto report = classify_critical_point(trace.final_frame, 1e-8);
    REQUIRE(report.is_critical);
    REQUIRE_FALSE(report.is_tight);
    const auto cert = instability_certificate(trace.final_frame);
    REQUIRE(cert.has_value());
    CHECK(cert->weight_exponent >= 1);
    CHECK(cert->m == 3);   // the two lines plus one in-plane direction at the top eigenvalue
    CHECK(cert->ell == 2);
  }
}

TEST_CASE("descent preserves property S along classical trajectories") {
  // Empirical check on the discretized flow: starting from frames that
  // satisfy the property exactly (classical case), no iterate is violated.
  const FrameConfig config{Field::Real, 2, {1, 1, 1, 1}};
  for (std::uint64_t seed = 70; seed < 75; ++seed) {
    const auto start = random_fusion_frame<double>(config, seed);
    if (check_property_S(start).verdict != PropertySVerdict::Satisfied) continue;
    for (std::int64_t iters : {1, 5, 20, 200}) {
      DescentSettings settings;
      settings.max_iters = iters;
      settings.grad_tol = 1e-300;
      const auto trace = descend(start, settings);
      CHECK(check_property_S(trace.final_frame).verdict != PropertySVerdict::Violated);
    }
    const auto full = descend(start, {});
    CHECK(check_property_S(full.final_frame).verdict != PropertySVerdict::Violated);
  }
}

TEST_CASE("welch_gap values") {
  CHECK(std::abs(welch_gap(fft::mercedes_benz())) < 1e-9);
  CHECK(welch_gap(fft::e1e1e2()) == doctest::Approx(0.5));
  const auto trace = descend(random_fusion_frame<double>({Field::Real, 3, {1, 1, 2}}, 61), {});
  CHECK(std::abs(welch_gap(trace.final_frame) - 1.0 / 6.0) < 1e-4);
}
