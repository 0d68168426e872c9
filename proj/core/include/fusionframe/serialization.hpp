#pragma once

#include <filesystem>
#include <string>
#include <variant>

#include <nlohmann/json.hpp>

#include "fusionframe/descent.hpp"
#include "fusionframe/frame.hpp"
#include "fusionframe/stability.hpp"

namespace ff {

/// Runtime-tagged frame, the unit of file I/O.
using AnyFrame = std::variant<RealFrame, ComplexFrame>;

struct FrameIoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Frame files are JSON objects
//   { "field": "real"|"complex", "d": int, "ranks": [int], "blocks": [...] }
// where block i is an array of k_i rows of d entries; a real entry is a
// number and a complex entry is a two-element array [re, im]. Writing then
// reading reproduces every finite double bit-exactly.
nlohmann::json frame_to_json(const AnyFrame& frame);
AnyFrame frame_from_json(const nlohmann::json& j);
void save_frame(const std::filesystem::path& path, const AnyFrame& frame);
AnyFrame load_frame(const std::filesystem::path& path);

const FrameConfig& config_of(const AnyFrame& frame);

// Matrices reuse the frame-file entry convention (rows of numbers or of
// [re, im] pairs).
nlohmann::json matrix_to_json(const Matrix<double>& m);
nlohmann::json matrix_to_json(const Matrix<Complex>& m);

nlohmann::json witness_to_json(const SubspaceWitness<double>& w);
nlohmann::json witness_to_json(const SubspaceWitness<Complex>& w);
nlohmann::json certificate_to_json(const OnePSCertificate<double>& c);
nlohmann::json certificate_to_json(const OnePSCertificate<Complex>& c);

// Descent traces export as CSV with header `iter,ffp,grad_norm`, one row per
// recorded iteration, 17 significant digits.
void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceSample>& samples);
std::vector<TraceSample> read_trace_csv(const std::filesystem::path& path);

}  // namespace ff
