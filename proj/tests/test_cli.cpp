#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

// End-to-end checks of the psir binary. The test runner passes its path in
// PSIR_BIN; every invocation goes through std::system with captured output.

#include "psir/cxf.hpp"
#include "psir/types.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using namespace psir;

namespace {

std::string psir_bin() {
  const char* bin = std::getenv("PSIR_BIN");
  REQUIRE_MESSAGE(bin != nullptr, "PSIR_BIN must point at the psir binary");
  return bin;
}

fs::path work_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "psir_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

struct RunResult {
  int exit_code = -1;
  std::string output; // stdout + stderr
};

RunResult run(const std::string& args) {
  const auto out_file = work_dir() / "cmd_output.txt";
  const std::string cmd =
      psir_bin() + " " + args + " > " + out_file.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream is(out_file);
  std::stringstream ss;
  ss << is.rdbuf();
  r.output = ss.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// small/fast simulation flags shared by the pipeline tests
const std::string kSmallSim =
    " --rows 40 --cols 40 --coils 2 --n-avg 2 --accel 1 --acs 20"
    " --noise-sigma 0 --motion-amp 0 --seed 7";

} // namespace

TEST_CASE("simulate is deterministic: identical manifests across runs") {
  const auto dir1 = work_dir() / "series_det1";
  const auto dir2 = work_dir() / "series_det2";
  CHECK(run("simulate --out " + dir1.string() + kSmallSim).exit_code == 0);
  CHECK(run("simulate --out " + dir2.string() + kSmallSim).exit_code == 0);
  const std::string m1 = slurp(dir1 / "manifest.txt");
  CHECK(!m1.empty());
  CHECK(m1 == slurp(dir2 / "manifest.txt"));
  CHECK(slurp(dir1 / "pair000_ir.cxf") == slurp(dir2 / "pair000_ir.cxf"));
}

TEST_CASE("simulate rejects bad flags with exit 2, unwritable output with exit 3") {
  const auto r = run("simulate --out " + (work_dir() / "x").string() + " --n-avg 0");
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("--n-avg") != std::string::npos);

  const auto r2 = run("simulate --out /proc/psir_forbidden/series" + kSmallSim);
  CHECK(r2.exit_code == 3);
}

TEST_CASE("recon and moco agree on a motionless noiseless series") {
  const auto series = work_dir() / "series_equal";
  REQUIRE(run("simulate --out " + series.string() + kSmallSim).exit_code == 0);

  const auto recon_out = work_dir() / "recon.cxf";
  const auto moco_out = work_dir() / "moco.cxf";
  const auto r1 = run("recon --series " + series.string() + " --out " +
                      recon_out.string() + " --png");
  CHECK(r1.exit_code == 0);
  CHECK(r1.output.find("ms") != std::string::npos); // wall time logged
  const auto r2 =
      run("moco --series " + series.string() + " --out " + moco_out.string());
  CHECK(r2.exit_code == 0);

  const RealImage a = read_real(recon_out);
  const RealImage b = read_real(moco_out);
  REQUIRE(a.rows == b.rows);
  double peak = 0;
  for (double v : a.data) peak = std::max(peak, std::abs(v));
  for (Index i = 0; i < a.size(); ++i)
    CHECK(std::abs(a.data[i] - b.data[i]) < 1e-6 * (1 + peak));

  // png written next to the cxf with the window recorded
  CHECK(fs::exists(work_dir() / "recon.png"));
  CHECK(r1.output.find("png window") != std::string::npos);
}

TEST_CASE("recon without a manifest exits 2; corrupt cxf exits 3") {
  const auto empty = work_dir() / "no_series";
  fs::create_directories(empty);
  const auto r = run("recon --series " + empty.string() + " --out " +
                     (work_dir() / "o.cxf").string());
  CHECK(r.exit_code == 2);

  // corrupt one array of an otherwise good series
  const auto series = work_dir() / "series_corrupt";
  REQUIRE(run("simulate --out " + series.string() + kSmallSim).exit_code == 0);
  {
    std::ofstream os(series / "pair000_ir.cxf", std::ios::binary | std::ios::trunc);
    os << "XXXX garbage";
  }
  const auto r2 = run("recon --series " + series.string() + " --out " +
                      (work_dir() / "o.cxf").string());
  CHECK(r2.exit_code == 3);
}

TEST_CASE("metrics on identical pairs reports ssim 1.0") {
  // build two identical images through simulate+recon
  const auto series = work_dir() / "series_metrics";
  REQUIRE(run("simulate --out " + series.string() + kSmallSim).exit_code == 0);
  const auto img = work_dir() / "m.cxf";
  REQUIRE(run("recon --series " + series.string() + " --out " + img.string())
              .exit_code == 0);

  const auto pairs = work_dir() / "pairs.csv";
  {
    std::ofstream os(pairs);
    os << "patient_id,slice_id,test_path,ref_path\n";
    os << "p1,s0," << img.string() << "," << img.string() << "\n";
  }
  const auto report_path = work_dir() / "report.csv";
  const auto r = run("metrics --pairs " + pairs.string() + " --out " +
                     report_path.string());
  CHECK(r.exit_code == 0);
  const std::string report = slurp(report_path);
  CHECK(report.find("p1,s0,1,") != std::string::npos); // ssim column exactly 1

  // empty csv -> exit 2
  const auto empty_csv = work_dir() / "empty.csv";
  std::ofstream(empty_csv.string()) << "";
  CHECK(run("metrics --pairs " + empty_csv.string() + " --out " +
            (work_dir() / "r2.csv").string())
            .exit_code == 2);
}

TEST_CASE("stats reproduces the one-superior-one-equivalent merge") {
  const auto scores = work_dir() / "scores.csv";
  {
    std::ofstream os(scores);
    os << "patient_id,variant,reader,score_a,score_b\n";
    for (int p = 0; p < 12; ++p) {
      os << "p" << p << ",bright,1," << 4.5 << "," << 4.0 << "\n"; // superior
      os << "p" << p << ",bright,2," << 4.0 << "," << 4.0 << "\n"; // equivalent
    }
  }
  const auto out = work_dir() / "verdicts.csv";
  const auto r = run("stats --scores " + scores.string() + " --out " +
                     out.string() + " --bootstrap-iters 2000");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("conservative conclusion: equivalent") != std::string::npos);
  const std::string csv = slurp(out);
  CHECK(csv.find("superior") != std::string::npos);
  CHECK(csv.find("equivalent") != std::string::npos);

  // malformed row -> exit 2 with the line number
  const auto bad = work_dir() / "bad_scores.csv";
  std::ofstream(bad.string()) << "p1,bright,1,4.5,4.0\np2,bright,oops\n";
  const auto r2 = run("stats --scores " + bad.string());
  CHECK(r2.exit_code == 2);
  CHECK(r2.output.find("line 2") != std::string::npos);
}

TEST_CASE("train writes a run log and selected params") {
  const auto out = work_dir() / "train_run";
  const auto r = run("train --out " + out.string() +
                     " --steps 1 --eval-every 1 --train-cases 1 --val-cases 1"
                     " --n-avg 2 --coils 2 --n-iters 2 --seed 5");
  CHECK(r.exit_code == 0);
  CHECK(fs::exists(out / "run.csv"));
  CHECK(fs::exists(out / "selected_params.txt"));
  const std::string log = slurp(out / "run.csv");
  CHECK(log.rfind("step,train_ssim,val_ssim", 0) == 0);
  CHECK(r.output.find("selected checkpoint") != std::string::npos);
}

TEST_CASE("unknown flags and missing subcommand exit 2") {
  CHECK(run("simulate --does-not-exist 1").exit_code == 2);
  CHECK(run("").exit_code == 2);
  CHECK(run("recon --series missing_dir --out x.cxf").exit_code == 2);
}
