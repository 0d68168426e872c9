#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>

#include "fusionframe/serialization.hpp"
#include "test_support.hpp"

using namespace ff;
namespace fs = std::filesystem;
namespace fft = ff::testing;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("ff_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static inline int counter = 0;
};

int run_cli(const std::string& args, const fs::path& stdout_file = {}) {
  std::string command = std::string(FUSIONFRAME_CLI_PATH) + " " + args;
  if (!stdout_file.empty()) command += " > " + stdout_file.string();
  command += " 2>/dev/null";
  const int status = std::system(command.c_str());
  REQUIRE(status != -1);
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

nlohmann::json slurp_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

}  // namespace

TEST_CASE("generate writes a valid deterministic frame file") {
  TempDir dir;
  const auto a = dir.path / "a.json";
  const auto b = dir.path / "b.json";
  CHECK(run_cli("generate --field real --d 3 --ranks 1,1,2 --seed 7 --out " + a.string()) == 0);
  CHECK(run_cli("generate --field real --d 3 --ranks 1,1,2 --seed 7 --out " + b.string()) == 0);
  CHECK(slurp(a) == slurp(b));

  const AnyFrame frame = load_frame(a);
  REQUIRE(std::holds_alternative<RealFrame>(frame));
  const auto& real = std::get<RealFrame>(frame);
  CHECK(is_fusion_frame(real));
  CHECK(ffp(real) >= 16.0 / 3.0 - 1e-9);
}

TEST_CASE("generate rejects impossible shapes with exit 2") {
  TempDir dir;
  CHECK(run_cli("generate --d 3 --ranks 5 --out " + (dir.path / "x.json").string()) == 2);
}

TEST_CASE("tighten reaches the welch bound for d=2 ranks (1,1,1,1)") {
  TempDir dir;
  const auto out = dir.path / "tight.json";
  const auto trace = dir.path / "trace.csv";
  const int rc = run_cli("tighten --field real --d 2 --ranks 1,1,1,1 --seed 3 --out " +
                         out.string() + " --trace " + trace.string());
  CHECK(rc == 0);
  const auto frame = std::get<RealFrame>(load_frame(out));
  CHECK(std::abs(ffp(frame) - 8.0) < 1e-6);
  CHECK(is_tight(frame));

  const auto samples = read_trace_csv(trace);
  REQUIRE(!samples.empty());
  CHECK(std::abs(samples.back().ffp - 8.0) < 1e-6);
  for (size_t t = 1; t < samples.size(); ++t)
    CHECK(samples[t].ffp <= samples[t - 1].ffp + 1e-9);
}

TEST_CASE("tighten reproduces the 11/2 minimum from files") {
  TempDir dir;
  const auto in = dir.path / "in.json";
  const auto out = dir.path / "out.json";
  CHECK(run_cli("generate --field real --d 3 --ranks 1,1,2 --seed 11 --out " + in.string()) == 0);
  CHECK(run_cli("tighten --in " + in.string() + " --out " + out.string()) == 0);
  CHECK(std::abs(ffp(std::get<RealFrame>(load_frame(out))) - 5.5) < 1e-4);
}

TEST_CASE("tighten output files are bit-identical across reruns") {
  TempDir dir;
  auto run = [&](const std::string& tag) {
    const auto out = dir.path / (tag + ".json");
    const auto trace = dir.path / (tag + ".csv");
    CHECK(run_cli("tighten --field complex --d 2 --ranks 1,1,1 --seed 5 --out " + out.string() +
                  " --trace " + trace.string()) == 0);
    return slurp(out) + "\x1e" + slurp(trace);
  };
  CHECK(run("first") == run("second"));
}

TEST_CASE("tighten of an already tight frame stops immediately") {
  TempDir dir;
  const auto in = dir.path / "mb.json";
  const auto out = dir.path / "out.json";
  const auto trace = dir.path / "trace.csv";
  save_frame(in, AnyFrame(fft::mercedes_benz()));
  CHECK(run_cli("tighten --in " + in.string() + " --out " + out.string() + " --trace " +
                trace.string()) == 0);
  CHECK(read_trace_csv(trace).size() == 1);
}

TEST_CASE("tighten exit codes for budget exhaustion and divergence") {
  TempDir dir;
  const auto out = dir.path / "out.json";
  CHECK(run_cli("tighten --field real --d 3 --ranks 1,1,2 --seed 2 --max-iters 3 --out " +
                out.string()) == 3);

  const auto trace = dir.path / "partial.csv";
  const int rc = run_cli("tighten --field real --d 2 --ranks 1,1,1 --seed 6 --step 50 "
                         "--max-backtracks 0 --out " +
                         out.string() + " --trace " + trace.string());
  CHECK(rc == 4);
  CHECK(!read_trace_csv(trace).empty());  // partial trace still written
}

TEST_CASE("tighten requires exactly one input source") {
  TempDir dir;
  const auto out = dir.path / "out.json";
  CHECK(run_cli("tighten --out " + out.string()) == 2);
  const auto in = dir.path / "in.json";
  save_frame(in, AnyFrame(fft::mercedes_benz()));
  CHECK(run_cli("tighten --in " + in.string() + " --d 2 --ranks 1,1 --out " + out.string()) == 2);
}

TEST_CASE("check certificate on e1,e1,e2 reports exponent 1") {
  TempDir dir;
  const auto in = dir.path / "frame.json";
  const auto report_path = dir.path / "report.json";
  save_frame(in, AnyFrame(fft::e1e1e2()));
  CHECK(run_cli("check --in " + in.string() + " --which certificate", report_path) == 0);
  const auto report = slurp_json(report_path);
  CHECK(report["is_critical"] == true);
  CHECK(report["is_tight"] == false);
  CHECK(report["certificate"]["weight_exponent"] == 1);
  CHECK(report["certificate"]["ell"] == 1);
  CHECK(report["certificate"]["m"] == 2);
  CHECK(report["certificate"]["top_eigenvalue"] == 2.0);
}

TEST_CASE("check property-s never reports tight frames violated") {
  TempDir dir;
  const auto in = dir.path / "tff.json";
  const auto report_path = dir.path / "report.json";
  save_frame(in, AnyFrame(fft::rotate_frame(fft::mercedes_benz(), 19)));
  CHECK(run_cli("check --in " + in.string() + " --which property-s", report_path) == 0);
  CHECK(slurp_json(report_path)["verdict"] != "violated");

  save_frame(in, AnyFrame(fft::e1e1e2()));
  CHECK(run_cli("check --in " + in.string() + " --which property-s", report_path) == 0);
  const auto report = slurp_json(report_path);
  CHECK(report["verdict"] == "violated");
  CHECK(report["witness"]["lhs"] == 2.0);
  CHECK(report["witness"]["margin"] == 0.5);
}

TEST_CASE("check critical and certificate verdicts on a tight frame") {
  TempDir dir;
  const auto in = dir.path / "mb.json";
  const auto report_path = dir.path / "report.json";
  save_frame(in, AnyFrame(fft::mercedes_benz()));
  CHECK(run_cli("check --in " + in.string() + " --which critical", report_path) == 0);
  const auto critical = slurp_json(report_path);
  CHECK(critical["is_critical"] == true);
  CHECK(critical["is_tight"] == true);
  CHECK(critical["row_spaces_invariant"] == true);

  CHECK(run_cli("check --in " + in.string() + " --which certificate", report_path) == 0);
  const auto cert = slurp_json(report_path);
  CHECK(cert["certificate"].is_null());
  CHECK(cert["is_tight"] == true);
}

TEST_CASE("tighten with line search converges too") {
  TempDir dir;
  const auto out = dir.path / "out.json";
  CHECK(run_cli("tighten --field real --d 3 --ranks 1,1,2 --seed 8 --line-search --out " +
                out.string()) == 0);
  CHECK(std::abs(ffp(std::get<RealFrame>(load_frame(out))) - 5.5) < 1e-4);
}

TEST_CASE("check spectra matches explicit targets") {
  TempDir dir;
  const auto in = dir.path / "frame.json";
  const auto report_path = dir.path / "report.json";
  save_frame(in, AnyFrame(fft::e1e1e2()));
  CHECK(run_cli("check --in " + in.string() + " --which spectra --lambda 2,1", report_path) == 0);
  CHECK(slurp_json(report_path)["match"] == true);
  CHECK(run_cli("check --in " + in.string() + " --which spectra --lambda 1.5,1.5",
                report_path) == 0);
  CHECK(slurp_json(report_path)["match"] == false);
  CHECK(run_cli("check --in " + in.string() + " --which spectra --r 1,1,1", report_path) == 0);
  CHECK(slurp_json(report_path)["match"] == true);
}

TEST_CASE("check verdicts are data: exit 0 either way, exit 2 on bad files") {
  TempDir dir;
  const auto in = dir.path / "frame.json";
  save_frame(in, AnyFrame(fft::e1e1e2()));
  CHECK(run_cli("check --in " + in.string() + " --which tight") == 0);

  const auto bad = dir.path / "bad.json";
  std::ofstream(bad) << "{not json";
  CHECK(run_cli("check --in " + bad.string() + " --which tight") == 2);
  CHECK(run_cli("check --in " + (dir.path / "missing.json").string() + " --which tight") == 2);
}

TEST_CASE("reproduce-fig writes per-run traces and a summary") {
  TempDir dir;
  const auto out_dir = dir.path / "repro";
  CHECK(run_cli("reproduce-fig --seeds 5 --seed 4 --out " + out_dir.string()) == 0);
  const auto summary = slurp_json(out_dir / "summary.json");
  CHECK(summary["seeds"] == 5);
  CHECK(summary["reached_minimum_count"] == 5);
  CHECK(summary["mercedes_benz_count"] == 5);
  for (int run = 0; run < 5; ++run) {
    const auto& entry = summary["runs"][static_cast<size_t>(run)];
    CHECK(entry["converged"] == true);
    CHECK(std::abs(entry["final_ffp"].get<double>() - 5.5) <= 1e-4);
    CHECK(entry["final_ffp"].get<double>() > 16.0 / 3.0 + 0.1);
    CHECK(entry["geometry"]["q_meets_plane_dim"] == 1);
    CHECK(std::abs(entry["geometry"]["dihedral_angle_rad"].get<double>() - M_PI / 2.0) < 1e-6);
    CHECK(fs::exists(entry["trace"].get<std::string>()));
    CHECK(fs::exists(entry["frame"].get<std::string>()));
  }
  CHECK(fs::exists(out_dir / "manifest.json"));
  const auto manifest = slurp_json(out_dir / "manifest.json");
  CHECK(manifest["command"] == "reproduce-fig");
  CHECK(manifest["seed"] == 4);
}

TEST_CASE("manifest records parameters and outputs") {
  TempDir dir;
  const auto out = dir.path / "f.json";
  const auto manifest_path = dir.path / "m.json";
  CHECK(run_cli("generate --d 2 --ranks 1,1 --seed 9 --out " + out.string() + " --manifest " +
                manifest_path.string()) == 0);
  const auto manifest = slurp_json(manifest_path);
  CHECK(manifest["command"] == "generate");
  CHECK(manifest["seed"] == 9);
  CHECK(manifest["parameters"]["ranks"] == std::vector<int>{1, 1});
  CHECK(manifest["outputs"] == std::vector<std::string>{out.string()});
}
