#include "fusionframe/serialization.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>

namespace ff {

namespace {

nlohmann::json entry_to_json(double x) { return x; }
nlohmann::json entry_to_json(const Complex& x) {
  return nlohmann::json::array({x.real(), x.imag()});
}

template <typename Scalar>
nlohmann::json matrix_rows(const Matrix<Scalar>& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(entry_to_json(m(r, c)));
    rows.push_back(std::move(row));
  }
  return rows;
}

double entry_from_json_real(const nlohmann::json& j) {
  if (!j.is_number()) throw FrameIoError("real entry must be a number");
  return j.get<double>();
}

Complex entry_from_json_complex(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw FrameIoError("complex entry must be a two-element array [re, im]");
  return {j[0].get<double>(), j[1].get<double>()};
}

template <typename Scalar, typename EntryParser>
OperatorFrame<Scalar> frame_blocks_from_json(FrameConfig config, const nlohmann::json& blocks,
                                             EntryParser parse_entry) {
  if (!blocks.is_array() || static_cast<int>(blocks.size()) != config.frame_count())
    throw FrameIoError("blocks must be an array with one entry per rank");
  std::vector<Matrix<Scalar>> parsed;
  parsed.reserve(blocks.size());
  for (int i = 0; i < config.frame_count(); ++i) {
    const auto& rows = blocks[static_cast<size_t>(i)];
    if (!rows.is_array() || static_cast<int>(rows.size()) != config.ranks[i])
      throw FrameIoError("block " + std::to_string(i) + " must have k_i rows");
    Matrix<Scalar> m(config.ranks[i], config.dim);
    for (int r = 0; r < config.ranks[i]; ++r) {
      const auto& row = rows[static_cast<size_t>(r)];
      if (!row.is_array() || static_cast<int>(row.size()) != config.dim)
        throw FrameIoError("block " + std::to_string(i) + " row " + std::to_string(r) +
                           " must have d entries");
      for (int c = 0; c < config.dim; ++c) m(r, c) = parse_entry(row[static_cast<size_t>(c)]);
    }
    parsed.push_back(std::move(m));
  }
  return OperatorFrame<Scalar>(std::move(config), std::move(parsed));
}

std::string format_17g(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

nlohmann::json matrix_to_json(const Matrix<double>& m) { return matrix_rows(m); }
nlohmann::json matrix_to_json(const Matrix<Complex>& m) { return matrix_rows(m); }

nlohmann::json frame_to_json(const AnyFrame& frame) {
  return std::visit(
      [](const auto& f) {
        nlohmann::json j;
        j["field"] = field_name(f.config().field);
        j["d"] = f.config().dim;
        j["ranks"] = f.config().ranks;
        nlohmann::json blocks = nlohmann::json::array();
        for (const auto& b : f.blocks()) blocks.push_back(matrix_rows(b));
        j["blocks"] = std::move(blocks);
        return j;
      },
      frame);
}

AnyFrame frame_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object()) throw FrameIoError("frame file must be a JSON object");
    for (const char* key : {"field", "d", "ranks", "blocks"})
      if (!j.contains(key)) throw FrameIoError(std::string("missing key: ") + key);

    FrameConfig config;
    const std::string field = j["field"].get<std::string>();
    if (field == "real")
      config.field = Field::Real;
    else if (field == "complex")
      config.field = Field::Complex;
    else
      throw FrameIoError("field must be \"real\" or \"complex\"");
    config.dim = j["d"].get<int>();
    config.ranks = j["ranks"].get<std::vector<int>>();
    config.validate();

    if (config.field == Field::Real)
      return frame_blocks_from_json<double>(config, j["blocks"], entry_from_json_real);
    return frame_blocks_from_json<Complex>(config, j["blocks"], entry_from_json_complex);
  } catch (const FrameIoError&) {
    throw;
  } catch (const std::exception& e) {
    throw FrameIoError(std::string("invalid frame file: ") + e.what());
  }
}

void save_frame(const std::filesystem::path& path, const AnyFrame& frame) {
  std::ofstream out(path);
  if (!out) throw FrameIoError("cannot open " + path.string() + " for writing");
  out << frame_to_json(frame).dump(2) << "\n";
  if (!out) throw FrameIoError("failed writing " + path.string());
}

AnyFrame load_frame(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FrameIoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw FrameIoError("cannot parse " + path.string() + ": " + e.what());
  }
  return frame_from_json(j);
}

const FrameConfig& config_of(const AnyFrame& frame) {
  return std::visit([](const auto& f) -> const FrameConfig& { return f.config(); }, frame);
}

namespace {

template <typename Scalar>
nlohmann::json witness_json(const SubspaceWitness<Scalar>& w) {
  nlohmann::json j;
  j["q_dim"] = w.basis.cols();
  j["basis"] = matrix_rows(w.basis);
  j["intersection_dims"] = w.intersection_dims;
  j["lhs"] = w.lhs;
  j["rhs"] = w.rhs;
  j["margin"] = w.lhs - w.rhs;
  return j;
}

template <typename Scalar>
nlohmann::json certificate_json(const OnePSCertificate<Scalar>& c) {
  nlohmann::json j;
  j["top_eigenvalue"] = c.top_eigenvalue;
  j["ell"] = c.ell;
  j["m"] = c.m;
  j["weight_exponent"] = c.weight_exponent;
  j["basis_rotation"] = matrix_rows(c.basis_rotation);
  return j;
}

}  // namespace

nlohmann::json witness_to_json(const SubspaceWitness<double>& w) { return witness_json(w); }
nlohmann::json witness_to_json(const SubspaceWitness<Complex>& w) { return witness_json(w); }
nlohmann::json certificate_to_json(const OnePSCertificate<double>& c) {
  return certificate_json(c);
}
nlohmann::json certificate_to_json(const OnePSCertificate<Complex>& c) {
  return certificate_json(c);
}

void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceSample>& samples) {
  std::ofstream out(path);
  if (!out) throw FrameIoError("cannot open " + path.string() + " for writing");
  out << "iter,ffp,grad_norm\n";
  for (const auto& s : samples)
    out << s.iter << "," << format_17g(s.ffp) << "," << format_17g(s.grad_norm) << "\n";
  if (!out) throw FrameIoError("failed writing " + path.string());
}

std::vector<TraceSample> read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FrameIoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "iter,ffp,grad_norm")
    throw FrameIoError("bad trace header in " + path.string());
  std::vector<TraceSample> samples;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    TraceSample s;
    char* end = nullptr;
    s.iter = std::strtoll(line.c_str(), &end, 10);
    if (*end != ',') throw FrameIoError("bad trace row in " + path.string());
    s.ffp = std::strtod(end + 1, &end);
    if (*end != ',') throw FrameIoError("bad trace row in " + path.string());
    s.grad_norm = std::strtod(end + 1, &end);
    samples.push_back(s);
  }
  return samples;
}

}  // namespace ff
