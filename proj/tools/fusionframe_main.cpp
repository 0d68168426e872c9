// fusionframe: generate, tighten and certify fusion frames from the command
// line. Exit codes: 0 success/converged, 2 input error, 3 iteration budget
// exhausted, 4 numerical divergence.

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "fusionframe/admissibility.hpp"
#include "fusionframe/descent.hpp"
#include "fusionframe/experiment.hpp"
#include "fusionframe/frame.hpp"
#include "fusionframe/random.hpp"
#include "fusionframe/serialization.hpp"
#include "fusionframe/stability.hpp"
#include "fusionframe/version.hpp"

namespace {

using namespace ff;
namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kOk = 0;
constexpr int kInputError = 2;
constexpr int kBudgetExhausted = 3;
constexpr int kDiverged = 4;

struct Stopwatch {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

void write_manifest(const fs::path& path, const std::string& command, const json& parameters,
                    std::uint64_t seed, double duration_seconds,
                    const std::vector<std::string>& outputs) {
  json manifest;
  manifest["command"] = command;
  manifest["parameters"] = parameters;
  manifest["seed"] = seed;
  manifest["version"] = kVersion;
  manifest["duration_seconds"] = duration_seconds;
  manifest["outputs"] = outputs;
  std::ofstream out(path);
  out << manifest.dump(2) << "\n";
}

struct GenerateFlags {
  std::string field = "real";
  int d = 0;
  std::vector<int> ranks;
  std::uint64_t seed = 0;
};

FrameConfig config_from_flags(const GenerateFlags& flags) {
  FrameConfig config;
  config.field = flags.field == "complex" ? Field::Complex : Field::Real;
  config.dim = flags.d;
  config.ranks = flags.ranks;
  config.validate();
  return config;
}

AnyFrame generate_any(const FrameConfig& config, std::uint64_t seed) {
  if (config.field == Field::Real) return random_fusion_frame<double>(config, seed);
  return random_fusion_frame<Complex>(config, seed);
}

int parallelism_cap(int runs) {
  int threads = static_cast<int>(std::thread::hardware_concurrency());
  if (threads < 1) threads = 1;
  if (const char* env = std::getenv("FUSIONFRAME_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) threads = std::min(threads, cap);
  }
  return std::min(threads, runs);
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

int cmd_generate(const GenerateFlags& flags, const std::string& out_path,
                 const std::string& manifest_path) {
  Stopwatch watch;
  FrameConfig config;
  try {
    config = config_from_flags(flags);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  const AnyFrame frame = generate_any(config, flags.seed);
  try {
    save_frame(out_path, frame);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }

  const double potential = std::visit([](const auto& f) { return ffp(f); }, frame);
  const bool tight = std::visit([](const auto& f) { return is_tight(f); }, frame);
  std::cout << std::setprecision(17) << "wrote " << out_path << "\n"
            << "ffp          " << potential << "\n"
            << "welch_bound  " << welch_bound(config) << "\n"
            << "tight        " << (tight ? "yes" : "no") << "\n";

  if (!manifest_path.empty()) {
    json params = {{"field", field_name(config.field)},
                   {"d", config.dim},
                   {"ranks", config.ranks},
                   {"out", out_path}};
    write_manifest(manifest_path, "generate", params, flags.seed, watch.seconds(), {out_path});
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// tighten
// ---------------------------------------------------------------------------

struct TightenFlags {
  GenerateFlags generate;
  std::string in_path;
  std::string out_path;
  std::string trace_path;
  std::string manifest_path;
  DescentSettings settings;
};

template <typename Scalar>
int run_tighten(const OperatorFrame<Scalar>& start, const TightenFlags& flags,
                const Stopwatch& watch) {
  if (!is_fusion_frame(start)) {
    std::cerr << "error: input is not a fusion frame\n";
    return kInputError;
  }
  const fs::path frame_path = flags.out_path;
  fs::path trace_path = flags.trace_path.empty()
                            ? fs::path(flags.out_path).replace_extension(".csv")
                            : fs::path(flags.trace_path);

  DescentTrace<Scalar> trace{{}, start, false};
  int rc = kOk;
  try {
    trace = descend(start, flags.settings);
    rc = trace.converged ? kOk : kBudgetExhausted;
  } catch (const DescentDivergedError<Scalar>& e) {
    trace = e.trace;
    rc = kDiverged;
    std::cerr << "error: descent diverged after " << trace.samples.back().iter
              << " iterations; partial trace written\n";
  }

  write_trace_csv(trace_path, trace.samples);
  save_frame(frame_path, AnyFrame(trace.final_frame));

  const double final_ffp = trace.samples.back().ffp;
  const double gap = final_ffp - welch_bound(start.config());
  std::cout << std::setprecision(17) << "iterations   " << trace.samples.back().iter << "\n"
            << "final_ffp    " << final_ffp << "\n"
            << "welch_gap    " << gap << "\n"
            << "grad_norm    " << trace.samples.back().grad_norm << "\n"
            << "converged    " << (trace.converged ? "yes" : "no") << "\n"
            << "tight        " << (is_tight(trace.final_frame) ? "yes" : "no") << "\n";

  if (!flags.manifest_path.empty()) {
    json params = {{"in", flags.in_path},
                   {"field", field_name(start.config().field)},
                   {"d", start.config().dim},
                   {"ranks", start.config().ranks},
                   {"step", flags.settings.step_size},
                   {"max_iters", flags.settings.max_iters},
                   {"grad_tol", flags.settings.grad_tol},
                   {"record_every", flags.settings.record_every},
                   {"out", flags.out_path},
                   {"trace", trace_path.string()}};
    write_manifest(flags.manifest_path, "tighten", params, flags.generate.seed, watch.seconds(),
                   {flags.out_path, trace_path.string()});
  }
  return rc;
}

int cmd_tighten(const TightenFlags& flags, bool have_generate_flags) {
  Stopwatch watch;
  AnyFrame start = RealFrame({Field::Real, 1, {1}}, {Matrix<double>::Ones(1, 1)});
  try {
    if (!flags.in_path.empty()) {
      if (have_generate_flags) {
        std::cerr << "error: pass either --in or generation flags, not both\n";
        return kInputError;
      }
      start = load_frame(flags.in_path);
    } else if (have_generate_flags) {
      start = generate_any(config_from_flags(flags.generate), flags.generate.seed);
    } else {
      std::cerr << "error: pass --in PATH or --d/--ranks generation flags\n";
      return kInputError;
    }
    flags.settings.validate();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  return std::visit([&](const auto& f) { return run_tighten(f, flags, watch); }, start);
}

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

struct CheckFlags {
  std::string in_path;
  std::string which = "tight";
  std::string out_path;
  double tol = kStructuralTol;
  std::vector<double> lambda;
  std::vector<double> r;
};

template <typename Scalar>
json check_report(const OperatorFrame<Scalar>& frame, const CheckFlags& flags, int& rc) {
  json report;
  report["which"] = flags.which;
  report["field"] = field_name(frame.config().field);
  report["d"] = frame.config().dim;
  report["ranks"] = frame.config().ranks;

  if (flags.which == "tight") {
    report["is_fusion_frame"] = is_fusion_frame(frame, flags.tol);
    report["tight"] = is_tight(frame, flags.tol);
    report["ffp"] = ffp(frame);
    report["welch_bound"] = welch_bound(frame.config());
    report["welch_gap"] = ffp(frame) - welch_bound(frame.config());
  } else if (flags.which == "critical") {
    const auto cp = classify_critical_point(frame, std::max(flags.tol, kConvergenceTol));
    report["gradient_norm"] = cp.gradient_norm;
    report["is_critical"] = cp.is_critical;
    report["is_tight"] = cp.is_tight;
    report["row_spaces_invariant"] = cp.row_spaces_invariant;
  } else if (flags.which == "property-s") {
    PropertySOptions options;
    options.tol = flags.tol;
    const auto ps = check_property_S(frame, options);
    report["verdict"] = to_string(ps.verdict);
    report["exhaustive"] = ps.exhaustive;
    if (ps.witness)
      report["witness"] = witness_to_json(*ps.witness);
    else
      report["witness"] = nullptr;
  } else if (flags.which == "certificate") {
    const auto cp = classify_critical_point(frame, std::max(flags.tol, kConvergenceTol));
    report["is_critical"] = cp.is_critical;
    report["is_tight"] = cp.is_tight;
    report["gradient_norm"] = cp.gradient_norm;
    if (!cp.is_critical) {
      report["certificate"] = nullptr;
      report["note"] = "frame is not a critical point; no certificate applies";
    } else if (cp.is_tight) {
      report["certificate"] = nullptr;
      report["note"] = "frame is tight; it is semistable and carries no instability certificate";
    } else {
      report["certificate"] = certificate_to_json(*instability_certificate(frame));
    }
  } else if (flags.which == "spectra") {
    const auto& config = frame.config();
    const RealVector s_spec = spectrum(frame_operator(frame));
    report["frame_spectrum"] = std::vector<double>(s_spec.data(), s_spec.data() + s_spec.size());
    json blocks = json::array();
    for (int i = 0; i < frame.frame_count(); ++i) {
      const Matrix<Scalar> p = frame.block(i).adjoint() * frame.block(i);
      const RealVector p_spec = spectrum(p).head(config.ranks[i]);
      blocks.push_back(std::vector<double>(p_spec.data(), p_spec.data() + p_spec.size()));
    }
    report["block_spectra"] = blocks;

    bool match = true;
    bool have_target = false;
    if (!flags.lambda.empty()) {
      if (static_cast<int>(flags.lambda.size()) != config.dim)
        throw std::invalid_argument("--lambda must list d values");
      have_target = true;
      std::vector<double> target = flags.lambda;
      std::sort(target.begin(), target.end(), std::greater<>());
      report["lambda_target"] = target;
      for (int j = 0; j < config.dim; ++j)
        match = match && std::abs(s_spec[j] - target[static_cast<size_t>(j)]) <= flags.tol;
    }
    if (!flags.r.empty()) {
      if (static_cast<int>(flags.r.size()) != config.total_rank())
        throw std::invalid_argument("--r must list n values (block spectra concatenated)");
      have_target = true;
      report["r_target"] = flags.r;
      size_t pos = 0;
      for (int i = 0; i < frame.frame_count(); ++i) {
        std::vector<double> target(flags.r.begin() + static_cast<long>(pos),
                                   flags.r.begin() + static_cast<long>(pos) + config.ranks[i]);
        pos += static_cast<size_t>(config.ranks[i]);
        std::sort(target.begin(), target.end(), std::greater<>());
        const auto& measured = report["block_spectra"][static_cast<size_t>(i)];
        for (int j = 0; j < config.ranks[i]; ++j)
          match = match &&
                  std::abs(measured[static_cast<size_t>(j)].get<double>() -
                           target[static_cast<size_t>(j)]) <= flags.tol;
      }
    }
    if (have_target)
      report["match"] = match;
    else
      report["note"] = "no --lambda or --r targets given; reporting measured spectra only";
  } else {
    throw std::invalid_argument("unknown --which value: " + flags.which);
  }
  rc = kOk;
  return report;
}

int cmd_check(const CheckFlags& flags) {
  AnyFrame frame = RealFrame({Field::Real, 1, {1}}, {Matrix<double>::Ones(1, 1)});
  try {
    frame = load_frame(flags.in_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  int rc = kOk;
  json report;
  try {
    report = std::visit([&](const auto& f) { return check_report(f, flags, rc); }, frame);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  if (flags.out_path.empty()) {
    std::cout << report.dump(2) << "\n";
  } else {
    std::ofstream out(flags.out_path);
    out << report.dump(2) << "\n";
  }
  return rc;
}

// ---------------------------------------------------------------------------
// reproduce-fig
// ---------------------------------------------------------------------------

struct ReproduceFlags {
  int seeds = 100;
  std::uint64_t master_seed = 0;
  std::string out_dir;
  DescentSettings settings;
};

struct RunOutcome {
  std::uint64_t seed = 0;
  bool converged = false;
  bool reached_minimum = false;
  double final_ffp = 0.0;
  std::int64_t iterations = 0;
  std::optional<MinimizerGeometry> geometry;
  std::string trace_file;
  std::string frame_file;
  std::string error;
};

int cmd_reproduce_fig(const ReproduceFlags& flags) {
  Stopwatch watch;
  if (flags.seeds < 1) {
    std::cerr << "error: --seeds must be >= 1\n";
    return kInputError;
  }
  const fs::path out_dir = flags.out_dir;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) {
    std::cerr << "error: cannot create " << out_dir << ": " << ec.message() << "\n";
    return kInputError;
  }

  const FrameConfig config{Field::Real, 3, {1, 1, 2}};
  const double target = 5.5;  // the minimum of the potential for these parameters
  const double target_tol = 1e-4;

  std::vector<RunOutcome> outcomes(static_cast<size_t>(flags.seeds));
  std::atomic<int> next{0};
  auto worker = [&]() {
    while (true) {
      const int run = next.fetch_add(1);
      if (run >= flags.seeds) break;
      RunOutcome& outcome = outcomes[static_cast<size_t>(run)];
      outcome.seed = run_seed(flags.master_seed, static_cast<std::uint64_t>(run));
      char tag[32];
      std::snprintf(tag, sizeof(tag), "run_%04d", run);
      const fs::path trace_path = out_dir / (std::string(tag) + "_trace.csv");
      const fs::path frame_path = out_dir / (std::string(tag) + "_frame.json");
      try {
        const auto start = random_fusion_frame<double>(config, outcome.seed);
        DescentTrace<double> trace{{}, start, false};
        try {
          trace = descend(start, flags.settings);
        } catch (const DescentDivergedError<double>& e) {
          trace = e.trace;
          outcome.error = "diverged";
        }
        outcome.converged = trace.converged;
        outcome.final_ffp = trace.samples.back().ffp;
        outcome.iterations = trace.samples.back().iter;
        outcome.reached_minimum = std::abs(outcome.final_ffp - target) <= target_tol;
        write_trace_csv(trace_path, trace.samples);
        save_frame(frame_path, AnyFrame(trace.final_frame));
        outcome.trace_file = trace_path.string();
        outcome.frame_file = frame_path.string();
        if (outcome.converged) outcome.geometry = analyze_112_geometry(trace.final_frame);
      } catch (const std::exception& e) {
        outcome.error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  const int threads = parallelism_cap(flags.seeds);
  pool.reserve(static_cast<size_t>(threads));
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  int reached = 0, converged = 0, mercedes = 0;
  json runs = json::array();
  std::vector<std::string> outputs;
  for (int run = 0; run < flags.seeds; ++run) {
    const RunOutcome& o = outcomes[static_cast<size_t>(run)];
    reached += o.reached_minimum ? 1 : 0;
    converged += o.converged ? 1 : 0;
    json entry = {{"run", run},
                  {"seed", o.seed},
                  {"converged", o.converged},
                  {"reached_minimum", o.reached_minimum},
                  {"final_ffp", o.final_ffp},
                  {"iterations", o.iterations},
                  {"trace", o.trace_file},
                  {"frame", o.frame_file}};
    if (!o.error.empty()) entry["error"] = o.error;
    if (o.geometry) {
      mercedes += o.geometry->mercedes_benz ? 1 : 0;
      entry["geometry"] = {{"q_meets_plane_dim", o.geometry->q_meets_plane_dim},
                           {"dihedral_angle_rad", o.geometry->dihedral_angle},
                           {"pairwise_angles_rad", o.geometry->pairwise_angles},
                           {"mercedes_benz", o.geometry->mercedes_benz},
                           {"max_angle_error_rad", o.geometry->max_angle_error}};
    }
    runs.push_back(std::move(entry));
    if (!o.trace_file.empty()) outputs.push_back(o.trace_file);
    if (!o.frame_file.empty()) outputs.push_back(o.frame_file);
  }

  json summary;
  summary["config"] = {{"field", "real"}, {"d", 3}, {"ranks", {1, 1, 2}}};
  summary["master_seed"] = flags.master_seed;
  summary["seeds"] = flags.seeds;
  summary["step"] = flags.settings.step_size;
  summary["max_iters"] = flags.settings.max_iters;
  summary["grad_tol"] = flags.settings.grad_tol;
  summary["target_ffp"] = target;
  summary["target_tol"] = target_tol;
  summary["welch_bound"] = welch_bound(config);
  summary["converged_count"] = converged;
  summary["reached_minimum_count"] = reached;
  summary["fraction_reached"] = static_cast<double>(reached) / flags.seeds;
  summary["mercedes_benz_count"] = mercedes;
  summary["runs"] = std::move(runs);

  const fs::path summary_path = out_dir / "summary.json";
  {
    std::ofstream out(summary_path);
    out << summary.dump(2) << "\n";
  }
  outputs.push_back(summary_path.string());
  json params = {{"seeds", flags.seeds},
                 {"out", out_dir.string()},
                 {"step", flags.settings.step_size},
                 {"max_iters", flags.settings.max_iters},
                 {"grad_tol", flags.settings.grad_tol}};
  write_manifest(out_dir / "manifest.json", "reproduce-fig", params, flags.master_seed,
                 watch.seconds(), outputs);

  std::cout << std::setprecision(17) << "seeds            " << flags.seeds << "\n"
            << "converged        " << converged << "\n"
            << "reached_minimum  " << reached << "\n"
            << "fraction         " << static_cast<double>(reached) / flags.seeds << "\n"
            << "summary          " << summary_path.string() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fusion frame toolkit: random generation, potential descent, "
               "tightness and semistability certification"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  // generate
  GenerateFlags gen_flags;
  std::string gen_out, gen_manifest;
  auto* gen = app.add_subcommand("generate", "draw a random fusion frame and write it as JSON");
  gen->add_option("--field", gen_flags.field)->check(CLI::IsMember({"real", "complex"}));
  gen->add_option("--d", gen_flags.d, "ambient dimension")->required();
  gen->add_option("--ranks", gen_flags.ranks, "block ranks k_1,...,k_N")
      ->required()
      ->delimiter(',');
  gen->add_option("--seed", gen_flags.seed);
  gen->add_option("--out", gen_out, "output frame file")->required();
  gen->add_option("--manifest", gen_manifest, "write a run manifest here");

  // tighten
  TightenFlags tighten_flags;
  auto* tighten = app.add_subcommand("tighten", "gradient descent on the fusion frame potential");
  tighten->add_option("--in", tighten_flags.in_path, "input frame file");
  auto* t_field = tighten->add_option("--field", tighten_flags.generate.field)
                      ->check(CLI::IsMember({"real", "complex"}));
  auto* t_d = tighten->add_option("--d", tighten_flags.generate.d);
  auto* t_ranks = tighten->add_option("--ranks", tighten_flags.generate.ranks)->delimiter(',');
  tighten->add_option("--seed", tighten_flags.generate.seed);
  tighten->add_option("--step", tighten_flags.settings.step_size);
  tighten->add_option("--max-iters", tighten_flags.settings.max_iters);
  tighten->add_option("--grad-tol", tighten_flags.settings.grad_tol);
  tighten->add_option("--record-every", tighten_flags.settings.record_every);
  tighten->add_option("--max-backtracks", tighten_flags.settings.max_backtracks);
  tighten->add_flag("--line-search", tighten_flags.settings.line_search);
  tighten->add_option("--out", tighten_flags.out_path, "final frame file")->required();
  tighten->add_option("--trace", tighten_flags.trace_path,
                      "trace CSV (default: --out with .csv extension)");
  tighten->add_option("--manifest", tighten_flags.manifest_path);

  // check
  CheckFlags check_flags;
  auto* check = app.add_subcommand("check", "verdicts on a frame file, as JSON");
  check->add_option("--in", check_flags.in_path)->required();
  check->add_option("--which", check_flags.which)
      ->check(CLI::IsMember({"tight", "critical", "property-s", "certificate", "spectra"}));
  check->add_option("--tol", check_flags.tol);
  check->add_option("--lambda", check_flags.lambda, "target frame-operator spectrum")
      ->delimiter(',');
  check->add_option("--r", check_flags.r, "target block spectra, concatenated")->delimiter(',');
  check->add_option("--out", check_flags.out_path, "report file (default: stdout)");

  // reproduce-fig
  ReproduceFlags repro_flags;
  repro_flags.settings.record_every = 1;
  auto* repro = app.add_subcommand(
      "reproduce-fig", "batch-tighten random frames with d=3, ranks (1,1,2) over many seeds");
  repro->add_option("--seeds", repro_flags.seeds, "number of runs");
  repro->add_option("--seed", repro_flags.master_seed, "master seed");
  repro->add_option("--step", repro_flags.settings.step_size);
  repro->add_option("--max-iters", repro_flags.settings.max_iters);
  repro->add_option("--grad-tol", repro_flags.settings.grad_tol);
  repro->add_option("--out", repro_flags.out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInputError;
  }

  if (gen->parsed()) return cmd_generate(gen_flags, gen_out, gen_manifest);
  if (tighten->parsed()) {
    const bool have_generate = t_d->count() > 0 || t_ranks->count() > 0 || t_field->count() > 0;
    return cmd_tighten(tighten_flags, have_generate);
  }
  if (check->parsed()) return cmd_check(check_flags);
  if (repro->parsed()) return cmd_reproduce_fig(repro_flags);
  return kInputError;
}
