// psir: simulate synthetic multi-coil LGE acquisitions, reconstruct them with
// the single-shot unrolled pipeline or the motion-corrected averaging
// reference, score reconstructions, run the reader-study statistics, and
// train the step-size schedule.
//
// Exit codes: 0 success, 2 invalid configuration or malformed input,
// 3 I/O failure or corrupt data.

#include "CLI11.hpp"

#include "psir/cxf.hpp"
#include "psir/imageops.hpp"
#include "psir/keyvalue.hpp"
#include "psir/metrics.hpp"
#include "psir/moco.hpp"
#include "psir/phantom.hpp"
#include "psir/png_io.hpp"
#include "psir/preprocess.hpp"
#include "psir/recon.hpp"
#include "psir/series.hpp"
#include "psir/stats.hpp"
#include "psir/train.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace psir;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - start)
      .count();
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string read_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open: " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

struct SimulateOptions {
  std::string out;
  std::uint64_t seed = 7;
  Index rows = 144, cols = 256, coils = 4;
  Index n_avg = 8;
  int accel = 2;
  Index acs = 24;
  double noise_sigma = 1.2e-3;
  double noise_rho = 0.1;
  double motion_amp = 4.0;
  double motion_period = 12.0;
  std::string phantom_file;
};

int cmd_simulate(const SimulateOptions& opt) {
  if (opt.n_avg < 1) throw ConfigError("--n-avg must be >= 1");
  if (opt.coils < 1) throw ConfigError("--coils must be >= 1");
  if (opt.noise_sigma < 0) throw ConfigError("--noise-sigma must be >= 0");

  phantom::PhantomSpec spec;
  if (!opt.phantom_file.empty()) {
    if (!fs::exists(opt.phantom_file))
      throw ConfigError("--phantom file not found: " + opt.phantom_file);
    spec = phantom::PhantomSpec::load(opt.phantom_file);
  } else {
    spec = phantom::PhantomSpec::cardiac_default(opt.rows, opt.cols, opt.seed);
  }

  const auto mask = SamplingMask::uniform(spec.rows, opt.accel, opt.acs);
  const auto maps =
      phantom::simulate_coil_maps(opt.coils, spec.rows, spec.cols, opt.seed);
  const auto motion = phantom::MotionTrace::sinusoidal(
      2 * opt.n_avg, opt.motion_amp, opt.motion_period, opt.seed);
  const auto cov =
      phantom::correlated_covariance(opt.coils, opt.noise_sigma, opt.noise_rho);
  const auto series =
      phantom::simulate_series(spec, maps, mask, motion, cov, opt.n_avg, opt.seed);

  series::write_series(opt.out, series);
  const auto manifest = series::manifest_path(opt.out);
  std::cerr << "wrote series to " << opt.out << " (manifest fnv1a="
            << std::hex << fnv1a(read_file(manifest)) << std::dec << ")\n";
  return kExitOk;
}

struct ReconOptions {
  std::string series_dir;
  std::string out;
  std::string params_file;
  bool png = false;
  bool truth_sens = false;
  bool independent_pd = false;
  double sens_sigma = 4.0;
};

recon::ReconParams load_params_or_default(const std::string& file) {
  if (file.empty()) return recon::ReconParams{};
  if (!fs::exists(file)) throw ConfigError("--params file not found: " + file);
  return recon::ReconParams::load(file);
}

// Shared front half of recon/moco: read, prewhiten, pick sensitivities.
struct PreparedSeries {
  phantom::AcquisitionSeries series;
  CoilSensitivities sens;
};

PreparedSeries prepare(const std::string& dir, bool truth_sens,
                       double sens_sigma) {
  PreparedSeries p;
  p.series = series::read_series(dir);
  double cov_norm = 0;
  for (const auto& v : p.series.noise_cov.m) cov_norm += std::norm(v);
  if (cov_norm > 0) { // a zero covariance marks a noise-free simulation
    for (Index i = 0; i < p.series.n_avg; ++i) {
      p.series.k_ir[i] = preprocess::prewhiten(p.series.k_ir[i], p.series.noise_cov);
      p.series.k_pd[i] = preprocess::prewhiten(p.series.k_pd[i], p.series.noise_cov);
    }
  }
  p.sens = truth_sens ? p.series.sim_sens
                      : preprocess::estimate_sensitivities(
                            p.series.k_pd[0], p.series.mask, sens_sigma);
  return p;
}

void write_outputs(const RealImage& img, const std::string& out, bool png) {
  write_array(out, img);
  if (png) {
    fs::path png_path(out);
    png_path.replace_extension(".png");
    const auto window = write_png_percentile(png_path, img);
    std::cerr << "png window [" << window.first << ", " << window.second
              << "] -> " << png_path.string() << "\n";
  }
}

int cmd_recon(const ReconOptions& opt) {
  const auto params = load_params_or_default(opt.params_file);
  const auto start = std::chrono::steady_clock::now();
  const PreparedSeries p = prepare(opt.series_dir, opt.truth_sens, opt.sens_sigma);
  const RealImage out = recon::reconstruct_single_shot(p.series, p.sens, params);
  std::cerr << "slice 0: single-shot recon " << elapsed_ms(start) << " ms\n";
  write_outputs(out, opt.out, opt.png);
  return kExitOk;
}

int cmd_moco(const ReconOptions& opt) {
  const auto params = load_params_or_default(opt.params_file);
  const auto start = std::chrono::steady_clock::now();
  const PreparedSeries p = prepare(opt.series_dir, opt.truth_sens, opt.sens_sigma);
  moco::MocoConfig cfg;
  cfg.independent_pd_selection = opt.independent_pd;
  const RealImage out = moco::moco_psir_reference(p.series, p.sens, params, cfg);
  std::cerr << "slice 0: moco reference recon " << elapsed_ms(start) << " ms\n";
  write_outputs(out, opt.out, opt.png);
  return kExitOk;
}

struct MetricsOptions {
  std::string pairs_csv;
  std::string out;
};

int cmd_metrics(const MetricsOptions& opt) {
  if (!fs::exists(opt.pairs_csv))
    throw ConfigError("--pairs file not found: " + opt.pairs_csv);
  std::istringstream is(read_file(opt.pairs_csv));
  std::string line;
  int lineno = 0;
  std::vector<metrics::SliceMetrics> slices;
  while (std::getline(is, line)) {
    ++lineno;
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
      line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("patient_id", 0) == 0) continue;
    std::vector<std::string> fields;
    std::string f;
    std::istringstream ls(line);
    while (std::getline(ls, f, ',')) fields.push_back(f);
    if (fields.size() != 4)
      throw ConfigError("pairs csv: line " + std::to_string(lineno) +
                        ": expected patient_id,slice_id,test_path,ref_path");
    const RealImage test = read_real(fields[2]);
    const RealImage ref = read_real(fields[3]);
    double lo = std::min(*std::min_element(test.data.begin(), test.data.end()),
                         *std::min_element(ref.data.begin(), ref.data.end()));
    double hi = std::max(*std::max_element(test.data.begin(), test.data.end()),
                         *std::max_element(ref.data.begin(), ref.data.end()));
    metrics::SliceMetrics m;
    m.patient_id = fields[0];
    m.slice_id = fields[1];
    m.ssim = metrics::ssim(test, ref);
    m.psnr_db = metrics::psnr(test, ref, hi - lo);
    m.nrmse = metrics::nrmse(test, ref);
    slices.push_back(std::move(m));
  }
  if (slices.empty()) throw ConfigError("pairs csv: no data rows");
  const auto report = metrics::macro_aggregate(slices);
  report.save_csv(opt.out);
  std::cout << "macro ssim " << report.ssim.macro_mean << " +- "
            << report.ssim.standard_error << " over " << report.ssim.n_patients
            << " patients\n";
  return kExitOk;
}

struct StatsOptions {
  std::string scores_csv;
  std::string out;
  bool aggregate = false;
  double alpha = 0.05;
  double margin = 0.25;
  Index bootstrap_iters = 100000;
  std::uint64_t seed = 1;
};

int cmd_stats(const StatsOptions& opt) {
  if (!fs::exists(opt.scores_csv))
    throw ConfigError("--scores file not found: " + opt.scores_csv);
  stats::PairedScoreTable table = stats::parse_score_csv(read_file(opt.scores_csv));
  if (opt.aggregate) table = stats::aggregate_by_patient(table);

  stats::ProtocolConfig cfg;
  cfg.alpha = opt.alpha;
  cfg.margin = opt.margin;
  cfg.bootstrap_iters = opt.bootstrap_iters;
  cfg.seed = opt.seed;
  const auto report = stats::evaluate_protocol(table, cfg);
  std::cout << report.to_table();
  if (!opt.out.empty()) {
    std::ofstream os(opt.out, std::ios::trunc);
    if (!os) throw Error("stats: cannot open for write: " + opt.out);
    os << report.to_csv();
    os.flush();
    if (!os) throw Error("stats: write failed: " + opt.out);
  }
  return kExitOk;
}

struct TrainOptions {
  std::string out;
  std::uint64_t seed = 7;
  Index steps = 12;
  double lr = 0.2;
  Index eval_every = 3;
  Index n_train = 4;
  Index n_val = 2;
  Index n_avg = 8;
  Index coils = 4;
  int accel = 2;
  double noise_sigma = 1.2e-3;
  std::string refinement = "gaussian_residual";
  Index n_iters = 12;
};

int cmd_train(const TrainOptions& opt) {
  if (opt.steps < 0) throw ConfigError("--steps must be >= 0");
  fs::create_directories(opt.out);

  recon::ReconParams reference;
  reference.steps = recon::StepSchedule::constant(opt.n_iters, 0.5);
  if (opt.refinement == "none")
    reference.refinement.kind = recon::RefinementKind::None;
  else if (opt.refinement == "tikhonov")
    reference.refinement.kind = recon::RefinementKind::Tikhonov;
  else if (opt.refinement == "gaussian_residual")
    reference.refinement.kind = recon::RefinementKind::GaussianResidual;
  else
    throw ConfigError("--refinement must be none|tikhonov|gaussian_residual");

  train::SyntheticDatasetConfig dcfg;
  dcfg.seed = opt.seed;
  dcfg.n_train = opt.n_train;
  dcfg.n_val = opt.n_val;
  dcfg.n_avg = opt.n_avg;
  dcfg.coils = opt.coils;
  dcfg.accel = opt.accel;
  dcfg.noise_sigma = opt.noise_sigma;

  recon::ReconParams moco_params; // plain defaults for the reference pipeline
  std::cerr << "building synthetic dataset (" << opt.n_train << " train / "
            << opt.n_val << " val patients)...\n";
  auto [train_ds, val_ds] = train::build_synthetic_dataset(dcfg, moco_params);

  train::TrainConfig tcfg;
  tcfg.steps = opt.steps;
  tcfg.lr = opt.lr;
  tcfg.eval_every = opt.eval_every;

  const auto start = std::chrono::steady_clock::now();
  const auto run =
      train::optimize(train::pack(reference), reference, train_ds, val_ds, tcfg);
  std::cerr << "optimized " << opt.steps << " steps in " << elapsed_ms(start)
            << " ms" << (run.aborted ? " (aborted early)" : "") << "\n";

  run.save_log(fs::path(opt.out) / "run.csv");
  train::save_params(fs::path(opt.out) / "selected_params.txt",
                     run.best().params, reference);
  for (const auto& ck : run.history)
    train::save_params(fs::path(opt.out) /
                           ("params_step" + std::to_string(ck.step) + ".txt"),
                       ck.params, reference);
  std::cout << "selected checkpoint: step " << run.best().step
            << " val_ssim " << run.best().val_objective << "\n";
  return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic-data toolkit for single-shot PSIR reconstruction, the "
               "MOCO-averaged reference, image metrics, reader-study "
               "statistics, and step-size training"};
  app.require_subcommand(1);

  SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "simulate an acquisition series");
  simulate->add_option("--out", sim.out, "output series directory")->required();
  simulate->add_option("--seed", sim.seed, "rng seed");
  simulate->add_option("--rows", sim.rows);
  simulate->add_option("--cols", sim.cols);
  simulate->add_option("--coils", sim.coils);
  simulate->add_option("--n-avg", sim.n_avg, "IR/PD pairs to acquire");
  simulate->add_option("--accel", sim.accel, "undersampling factor")
      ->check(CLI::IsMember({1, 2, 3}));
  simulate->add_option("--acs", sim.acs, "fully sampled center rows");
  simulate->add_option("--noise-sigma", sim.noise_sigma);
  simulate->add_option("--noise-rho", sim.noise_rho, "inter-coil correlation");
  simulate->add_option("--motion-amp", sim.motion_amp, "pixels");
  simulate->add_option("--motion-period", sim.motion_period, "heartbeats");
  simulate->add_option("--phantom", sim.phantom_file, "phantom spec file");

  ReconOptions rec;
  auto add_recon_opts = [&](CLI::App* cmd) {
    cmd->add_option("--series", rec.series_dir, "series directory")->required();
    cmd->add_option("--out", rec.out, "output CXF image")->required();
    cmd->add_option("--params", rec.params_file, "recon params file");
    cmd->add_flag("--png", rec.png, "also export a windowed grayscale PNG");
    cmd->add_flag("--truth-sens", rec.truth_sens,
                  "use the simulation's ground-truth coil maps");
    cmd->add_option("--sens-sigma", rec.sens_sigma,
                    "sensitivity estimation smoothing (pixels)");
  };
  auto* reconc = app.add_subcommand("recon", "single-shot reconstruction");
  add_recon_opts(reconc);
  auto* mococ = app.add_subcommand("moco", "MOCO-averaged reference reconstruction");
  add_recon_opts(mococ);
  mococ->add_flag("--independent-pd-selection", rec.independent_pd,
                  "select PD frames from PD shifts instead of reusing IR");

  MetricsOptions met;
  auto* metricsc = app.add_subcommand("metrics", "score image pairs");
  metricsc->add_option("--pairs", met.pairs_csv,
                       "csv: patient_id,slice_id,test_path,ref_path")
      ->required();
  metricsc->add_option("--out", met.out, "report csv")->required();

  StatsOptions st;
  auto* statsc = app.add_subcommand("stats", "reader-study statistics");
  statsc->add_option("--scores", st.scores_csv,
                     "csv: patient_id,variant,reader,score_a,score_b")
      ->required();
  statsc->add_option("--out", st.out, "verdicts csv");
  statsc->add_flag("--aggregate", st.aggregate,
                   "aggregate per-stack rows to patient level first");
  statsc->add_option("--alpha", st.alpha);
  statsc->add_option("--margin", st.margin, "equivalence margin (Likert points)");
  statsc->add_option("--bootstrap-iters", st.bootstrap_iters);
  statsc->add_option("--seed", st.seed);

  TrainOptions tr;
  auto* trainc = app.add_subcommand("train", "optimize the step-size schedule");
  trainc->add_option("--out", tr.out, "output directory")->required();
  trainc->add_option("--seed", tr.seed);
  trainc->add_option("--steps", tr.steps);
  trainc->add_option("--lr", tr.lr);
  trainc->add_option("--eval-every", tr.eval_every);
  trainc->add_option("--train-cases", tr.n_train);
  trainc->add_option("--val-cases", tr.n_val);
  trainc->add_option("--n-avg", tr.n_avg);
  trainc->add_option("--coils", tr.coils);
  trainc->add_option("--accel", tr.accel)->check(CLI::IsMember({1, 2, 3}));
  trainc->add_option("--noise-sigma", tr.noise_sigma);
  trainc->add_option("--refinement", tr.refinement,
                     "none|tikhonov|gaussian_residual");
  trainc->add_option("--n-iters", tr.n_iters, "cascade depth");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e); // --help
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(sim);
    if (reconc->parsed()) return cmd_recon(rec);
    if (mococ->parsed()) return cmd_moco(rec);
    if (metricsc->parsed()) return cmd_metrics(met);
    if (statsc->parsed()) return cmd_stats(st);
    if (trainc->parsed()) return cmd_train(tr);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const series::MissingManifestError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ValueError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const CxfError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitConfig;
}
