#pragma once

#include <cstdint>
#include <random>

#include "fusionframe/frame.hpp"

namespace ff {

/// splitmix64 hash; used to expand one master seed into per-run seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of run `index` in a batch with the given master seed.
inline std::uint64_t run_seed(std::uint64_t master_seed, std::uint64_t index) {
  return splitmix64(master_seed + 0x9e3779b97f4a7c15ULL * (index + 1));
}

/// Deterministic N(0,1) stream: Marsaglia polar transform over mt19937_64.
/// Unlike std::normal_distribution, the produced sequence depends only on
/// the seed, not on the standard library implementation.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : engine_(seed) {}

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double next() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

template <typename Scalar>
Scalar gaussian(GaussianStream& stream);

template <>
inline double gaussian<double>(GaussianStream& stream) {
  return stream.next();
}

template <>
inline Complex gaussian<Complex>(GaussianStream& stream) {
  const double re = stream.next();
  const double im = stream.next();
  return {re, im};
}

/// k x d matrix with independent standard Gaussian entries, drawn row-major.
template <typename Scalar>
Matrix<Scalar> gaussian_matrix(int rows, int cols, GaussianStream& stream) {
  Matrix<Scalar> m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = gaussian<Scalar>(stream);
  return m;
}

/// Modified Gram-Schmidt on the rows, with one reorthogonalization pass.
/// Returns false if some row collapses below tol (rank deficiency); the
/// matrix is modified in place either way.
template <typename Scalar>
bool orthonormalize_rows(Matrix<Scalar>& m, double tol = 1e-12) {
  const Eigen::Index k = m.rows();
  for (Eigen::Index j = 0; j < k; ++j) {
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index l = 0; l < j; ++l) {
        const Scalar c = (m.row(j) * m.row(l).adjoint())(0, 0);
        m.row(j) -= c * m.row(l);
      }
    }
    const double norm = m.row(j).norm();
    if (norm < tol) return false;
    m.row(j) /= norm;
  }
  return true;
}

/// Haar-distributed unitary (orthogonal in the real case): QR of a Gaussian
/// matrix with the R-diagonal phases absorbed into Q.
template <typename Scalar>
Matrix<Scalar> random_unitary(int d, GaussianStream& stream) {
  const Matrix<Scalar> g = gaussian_matrix<Scalar>(d, d, stream);
  Eigen::HouseholderQR<Matrix<Scalar>> qr(g);
  Matrix<Scalar> q = qr.householderQ();
  const Matrix<Scalar> r = qr.matrixQR().template triangularView<Eigen::Upper>();
  for (int j = 0; j < d; ++j) {
    const Scalar rjj = r(j, j);
    const double mag = std::abs(rjj);
    q.col(j) *= (mag > 0.0) ? rjj / Scalar(mag) : Scalar(1);
  }
  return q;
}

/// Random point of the fusion-frame space: per block, a standard Gaussian
/// k_i x d draw with rows orthonormalized. Deterministic given the seed.
/// Degenerate draws are redrawn; failure after the retry budget (which has
/// probability zero for continuous draws) raises std::runtime_error.
template <typename Scalar>
OperatorFrame<Scalar> random_fusion_frame(const FrameConfig& config, std::uint64_t seed) {
  config.validate();
  if (config.field != ScalarTraits<Scalar>::field)
    throw std::invalid_argument("random_fusion_frame: scalar type does not match config field");
  GaussianStream stream(seed);
  constexpr int kMaxRedraws = 64;
  std::vector<Matrix<Scalar>> blocks;
  blocks.reserve(config.ranks.size());
  for (int k : config.ranks) {
    Matrix<Scalar> block;
    bool ok = false;
    for (int attempt = 0; attempt < kMaxRedraws && !ok; ++attempt) {
      block = gaussian_matrix<Scalar>(k, config.dim, stream);
      ok = orthonormalize_rows(block);
    }
    if (!ok) throw std::runtime_error("random_fusion_frame: rank-deficient Gaussian draws");
    blocks.push_back(std::move(block));
  }
  return OperatorFrame<Scalar>(config, std::move(blocks));
}

}  // namespace ff
