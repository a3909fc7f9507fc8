#include "psir/train.hpp"

#include "psir/keyvalue.hpp"
#include "psir/moco.hpp"
#include "psir/parallel.hpp"
#include "psir/preprocess.hpp"
#include "psir/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace psir::train {

TrainableParams pack(const recon::ReconParams& params) {
  TrainableParams p;
  p.values = params.steps.lambda_ir;
  p.values.insert(p.values.end(), params.steps.lambda_pd.begin(),
                  params.steps.lambda_pd.end());
  p.values.push_back(params.refinement.scalar);
  return p;
}

recon::ReconParams unpack(const TrainableParams& p,
                          const recon::ReconParams& reference) {
  p.validate();
  const Index n = reference.steps.n_iters();
  if (static_cast<Index>(p.values.size()) != 2 * n + 1)
    throw ValueError("trainable params: expected " + std::to_string(2 * n + 1) +
                     " values, got " + std::to_string(p.values.size()));
  recon::ReconParams out = reference;
  out.steps.lambda_ir.assign(p.values.begin(), p.values.begin() + n);
  out.steps.lambda_pd.assign(p.values.begin() + n, p.values.begin() + 2 * n);
  out.refinement.scalar = p.values[2 * n];
  out.refinement.per_iter_scalar.reset(); // packing trains the shared scalar
  return out;
}

ObjectiveValue objective(const TrainableParams& params,
                         const recon::ReconParams& reference,
                         const Dataset& dataset) {
  if (dataset.empty()) throw ValueError("objective: empty dataset");
  const recon::ReconParams rp = unpack(params, reference);

  std::vector<double> ssims(dataset.size(), 0.0);
  std::vector<std::uint8_t> diverged(dataset.size(), 0);
  parallel_for(dataset.size(), [&](std::size_t i) {
    const TrainCase& tc = dataset[i];
    try {
      const RealImage out = recon::reconstruct_single_shot(tc.series, tc.sens, rp);
      ssims[i] = metrics::ssim(out, tc.moco_reference);
    } catch (const DivergenceError&) {
      diverged[i] = 1; // contributes SSIM 0
    }
  });

  ObjectiveValue v;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    v.mean_ssim += ssims[i];
    v.diverged_cases += diverged[i];
  }
  v.mean_ssim /= static_cast<double>(dataset.size());
  return v;
}

std::vector<double> fd_gradient(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& p, double h) {
  if (!(h > 0)) throw ValueError("fd_gradient: h must be positive");
  std::vector<double> g(p.size());
  std::vector<double> probe = p;
  for (std::size_t i = 0; i < p.size(); ++i) {
    probe[i] = p[i] + h;
    const double up = f(probe);
    probe[i] = p[i] - h;
    const double down = f(probe);
    probe[i] = p[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

std::vector<double> fd_gradient(const TrainableParams& params,
                                const recon::ReconParams& reference,
                                const Dataset& dataset, double h) {
  return fd_gradient(
      [&](const std::vector<double>& v) {
        return objective(TrainableParams{v}, reference, dataset).mean_ssim;
      },
      params.values, h);
}

namespace {

void check_disjoint(const Dataset& train, const Dataset& val) {
  std::set<std::string> train_ids;
  for (const auto& c : train) train_ids.insert(c.patient_id);
  for (const auto& c : val)
    if (train_ids.count(c.patient_id))
      throw ValueError("optimize: patient '" + c.patient_id +
                       "' appears in both splits");
}

} // namespace

TrainRun optimize(const TrainableParams& initial,
                  const recon::ReconParams& reference,
                  const Dataset& dataset_train, const Dataset& dataset_val,
                  const TrainConfig& cfg) {
  if (cfg.steps < 0) throw ValueError("optimize: negative step count");
  if (cfg.eval_every < 1) throw ValueError("optimize: eval_every must be >= 1");
  check_disjoint(dataset_train, dataset_val);

  TrainRun run;
  for (const auto& c : dataset_train) run.train_patients.push_back(c.patient_id);
  for (const auto& c : dataset_val) run.val_patients.push_back(c.patient_id);

  auto evaluate = [&](Index step, const TrainableParams& p) {
    Checkpoint ck;
    ck.step = step;
    ck.params = p;
    ck.train_objective = objective(p, reference, dataset_train).mean_ssim;
    ck.val_objective = objective(p, reference, dataset_val).mean_ssim;
    run.history.push_back(std::move(ck));
  };

  TrainableParams params = initial;
  evaluate(0, params);
  double lr = cfg.lr;

  for (Index step = 1; step <= cfg.steps; ++step) {
    const auto grad = fd_gradient(params, reference, dataset_train, cfg.fd_h);

    TrainableParams proposed = params;
    bool accepted = false;
    double step_lr = lr;
    for (int attempt = 0; attempt <= cfg.max_backoff; ++attempt) {
      for (std::size_t i = 0; i < params.values.size(); ++i)
        proposed.values[i] = params.values[i] + step_lr * grad[i];
      const ObjectiveValue v = objective(proposed, reference, dataset_train);
      if (std::isfinite(v.mean_ssim) && v.diverged_cases == 0) {
        accepted = true;
        break;
      }
      step_lr *= 0.5;
    }
    if (!accepted) {
      run.aborted = true; // keep the last good checkpoint
      break;
    }
    params = proposed;

    if (step % cfg.eval_every == 0 || step == cfg.steps) {
      evaluate(step, params);
      lr *= cfg.lr_decay;
    }
  }

  run.selected = 0;
  for (Index i = 1; i < static_cast<Index>(run.history.size()); ++i)
    if (run.history[i].val_objective > run.history[run.selected].val_objective)
      run.selected = i;
  return run;
}

std::string TrainRun::log_csv() const {
  std::ostringstream os;
  os.precision(10);
  os << "step,train_ssim,val_ssim\n";
  for (const auto& ck : history)
    os << ck.step << "," << ck.train_objective << "," << ck.val_objective << "\n";
  return os.str();
}

void TrainRun::save_log(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("train: cannot open log for write: " + path.string());
  os << log_csv();
  os.flush();
  if (!os) throw Error("train: log write failed: " + path.string());
}

void save_params(const std::filesystem::path& path, const TrainableParams& p,
                 const recon::ReconParams& reference) {
  unpack(p, reference).save(path);
}

TrainableParams load_params(const std::filesystem::path& path,
                            const recon::ReconParams& reference) {
  const recon::ReconParams loaded = recon::ReconParams::load(path);
  if (loaded.steps.n_iters() != reference.steps.n_iters())
    throw ValueError("trainable params: iteration count mismatch in " +
                     path.string());
  return pack(loaded);
}

std::pair<Dataset, Dataset> build_synthetic_dataset(
    const SyntheticDatasetConfig& cfg, const recon::ReconParams& moco_params) {
  const SamplingMask mask =
      SamplingMask::uniform(cfg.rows, cfg.accel, cfg.acs_lines);
  const NoiseCovariance cov =
      phantom::correlated_covariance(cfg.coils, cfg.noise_sigma, cfg.noise_rho);

  auto make_case = [&](Index patient, std::uint64_t seed) {
    TrainCase tc;
    tc.patient_id = "patient" + std::to_string(patient);
    const auto spec =
        phantom::PhantomSpec::cardiac_default(cfg.rows, cfg.cols, seed);
    const auto maps =
        phantom::simulate_coil_maps(cfg.coils, cfg.rows, cfg.cols, seed);
    const auto motion = phantom::MotionTrace::sinusoidal(
        2 * cfg.n_avg, cfg.motion_amp, cfg.motion_period, seed);
    tc.series = phantom::simulate_series(spec, maps, mask, motion, cov,
                                         cfg.n_avg, seed);

    // Mirror the acquisition pipeline: prewhiten, then estimate maps from
    // the first PD shot's ACS block.
    for (Index i = 0; i < tc.series.n_avg; ++i) {
      tc.series.k_ir[i] = preprocess::prewhiten(tc.series.k_ir[i], cov);
      tc.series.k_pd[i] = preprocess::prewhiten(tc.series.k_pd[i], cov);
    }
    tc.sens = preprocess::estimate_sensitivities(tc.series.k_pd[0], mask, 4.0);
    tc.moco_reference = moco::moco_psir_reference(tc.series, tc.sens, moco_params);
    return tc;
  };

  Dataset train, val;
  for (Index i = 0; i < cfg.n_train; ++i)
    train.push_back(make_case(i, substream(cfg.seed, 100 + i)));
  for (Index i = 0; i < cfg.n_val; ++i)
    val.push_back(make_case(cfg.n_train + i, substream(cfg.seed, 500 + i)));
  return {std::move(train), std::move(val)};
}

} // namespace psir::train
