#pragma once

#include <complex>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ff {

using Complex = std::complex<double>;

/// Scalar field of the ambient Hilbert space.
enum class Field { Real, Complex };

template <typename Scalar>
struct ScalarTraits;

template <>
struct ScalarTraits<double> {
  static constexpr Field field = Field::Real;
  static constexpr bool is_complex = false;
};

template <>
struct ScalarTraits<Complex> {
  static constexpr Field field = Field::Complex;
  static constexpr bool is_complex = true;
};

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using RealVector = Eigen::VectorXd;

inline const char* field_name(Field f) {
  return f == Field::Real ? "real" : "complex";
}

// Default tolerances. Structural checks (orthonormality, hermiticity,
// positive definiteness) and spectral comparisons use 1e-8; convergence
// decisions use 1e-10. Every operation taking a tolerance accepts an
// override.
inline constexpr double kStructuralTol = 1e-8;
inline constexpr double kSpectralTol = 1e-8;
inline constexpr double kConvergenceTol = 1e-10;

/// Parameters of a frame space: the field, the ambient dimension d, and the
/// block ranks (k_1, ..., k_N).
struct FrameConfig {
  Field field = Field::Real;
  int dim = 0;
  std::vector<int> ranks;

  int frame_count() const { return static_cast<int>(ranks.size()); }

  /// n = k_1 + ... + k_N.
  int total_rank() const { return std::accumulate(ranks.begin(), ranks.end(), 0); }

  /// Throws std::invalid_argument unless N >= 1, d >= 1 and 1 <= k_i <= d.
  void validate() const {
    if (dim < 1) throw std::invalid_argument("FrameConfig: dimension must be positive");
    if (ranks.empty()) throw std::invalid_argument("FrameConfig: at least one block required");
    for (int k : ranks) {
      if (k < 1) throw std::invalid_argument("FrameConfig: every rank must be positive");
      if (k > dim)
        throw std::invalid_argument("FrameConfig: rank " + std::to_string(k) +
                                    " exceeds dimension " + std::to_string(dim));
    }
  }

  bool operator==(const FrameConfig&) const = default;
};

/// Spectral targets: per-block spectra r_i (length k_i, decreasing positive)
/// and the frame-operator spectrum lambda (length d, decreasing positive).
struct SpectralData {
  std::vector<RealVector> block_spectra;
  RealVector frame_spectrum;

  void validate(const FrameConfig& config) const {
    auto check_decreasing_positive = [](const RealVector& v, const std::string& what) {
      for (Eigen::Index j = 0; j < v.size(); ++j) {
        if (!(v[j] > 0.0))
          throw std::invalid_argument("SpectralData: " + what + " must be positive");
        if (j > 0 && v[j] > v[j - 1])
          throw std::invalid_argument("SpectralData: " + what + " must be sorted decreasing");
      }
    };
    if (static_cast<int>(block_spectra.size()) != config.frame_count())
      throw std::invalid_argument("SpectralData: block spectrum count mismatch");
    for (int i = 0; i < config.frame_count(); ++i) {
      if (block_spectra[i].size() != config.ranks[i])
        throw std::invalid_argument("SpectralData: block spectrum length mismatch");
      check_decreasing_positive(block_spectra[i], "block spectrum");
    }
    if (frame_spectrum.size() != config.dim)
      throw std::invalid_argument("SpectralData: frame spectrum must have length d");
    check_decreasing_positive(frame_spectrum, "frame spectrum");
  }
};

}  // namespace ff
