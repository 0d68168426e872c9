#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "fusionframe/types.hpp"

namespace ff {

/// Majorization test for the classical admissibility problem: lambda
/// majorizes r iff the totals agree and every top-k partial sum of lambda
/// dominates that of r (both sorted decreasing; r is implicitly zero-padded
/// when shorter). Comparisons use an absolute tolerance.
inline bool majorizes(std::vector<double> lambda, std::vector<double> r, double tol = 1e-9) {
  if (lambda.empty() || r.empty())
    throw std::invalid_argument("majorizes: empty input list");
  std::sort(lambda.begin(), lambda.end(), std::greater<>());
  std::sort(r.begin(), r.end(), std::greater<>());

  double lambda_total = 0.0, r_total = 0.0;
  for (double x : lambda) lambda_total += x;
  for (double x : r) r_total += x;
  if (std::abs(lambda_total - r_total) > tol) return false;

  double lambda_partial = 0.0, r_partial = 0.0;
  for (size_t k = 0; k < lambda.size(); ++k) {
    lambda_partial += lambda[k];
    if (k < r.size()) r_partial += r[k];
    if (lambda_partial < r_partial - tol) return false;
  }
  return true;
}

struct TffNecessityReport {
  double trace_value = 0.0;  // n/d: the only possible tight eigenvalue
  std::string note;
};

/// The necessary trace condition for tight frames: a tight frame with these
/// parameters must have frame operator (n/d) I. Whether one exists is a
/// separate combinatorial question (non-vanishing of Littlewood-Richardson
/// coefficients) that this toolkit does not decide; the note records that
/// the general question is left undecided here.
inline TffNecessityReport tff_necessary_check(const FrameConfig& config) {
  config.validate();
  const double ratio = static_cast<double>(config.total_rank()) / config.dim;
  TffNecessityReport report;
  report.trace_value = ratio;
  report.note =
      "a tight frame with these parameters must have frame operator (n/d) I with n/d = " +
      std::to_string(ratio) +
      "; existence for general ranks reduces to non-vanishing of Littlewood-Richardson "
      "coefficients and is left undecided by this toolkit (the property-S checker and the "
      "descent command provide runtime evidence for specific parameters)";
  return report;
}

}  // namespace ff
