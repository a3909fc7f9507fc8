#pragma once

#include "psir/metrics.hpp"
#include "psir/phantom.hpp"
#include "psir/recon.hpp"

#include <filesystem>
#include <functional>

namespace psir::train {

/// Flat trainable vector: lambda_ir[0..N), lambda_pd[0..N), then the
/// refinement scalar (always packed, even for kind none, so the layout does
/// not depend on the refinement choice).
struct TrainableParams {
  std::vector<double> values;

  void validate() const {
    if (!all_finite(values)) throw ValueError("trainable params: non-finite value");
  }
};

TrainableParams pack(const recon::ReconParams& params);
/// Inverse of pack; `reference` supplies the structural configuration.
recon::ReconParams unpack(const TrainableParams& p,
                          const recon::ReconParams& reference);

struct TrainCase {
  std::string patient_id;
  phantom::AcquisitionSeries series;
  CoilSensitivities sens;  // maps the reconstruction will use
  RealImage moco_reference;
};

using Dataset = std::vector<TrainCase>;

struct ObjectiveValue {
  double mean_ssim = 0;
  Index diverged_cases = 0; // contributed SSIM 0 each
};

/// Mean SSIM of the single-shot reconstruction against each case's MOCO
/// reference. A diverging reconstruction contributes 0 instead of aborting.
ObjectiveValue objective(const TrainableParams& params,
                         const recon::ReconParams& reference,
                         const Dataset& dataset);

/// Central finite differences of an arbitrary scalar function.
std::vector<double> fd_gradient(const std::function<double(const std::vector<double>&)>& f,
                                const std::vector<double>& p, double h);

/// Central finite differences of the training objective.
std::vector<double> fd_gradient(const TrainableParams& params,
                                const recon::ReconParams& reference,
                                const Dataset& dataset, double h);

struct TrainConfig {
  Index steps = 12;
  double lr = 0.2;
  double lr_decay = 0.98; // applied at every evaluation point
  Index eval_every = 3;
  double fd_h = 1e-3;
  int max_backoff = 5; // lr halvings when a step diverges
};

struct Checkpoint {
  Index step = 0;
  TrainableParams params;
  double train_objective = 0;
  double val_objective = 0;
};

struct TrainRun {
  std::vector<Checkpoint> history;
  Index selected = 0; // argmax validation objective (earliest on ties)
  bool aborted = false;
  std::vector<std::string> train_patients;
  std::vector<std::string> val_patients;

  const Checkpoint& best() const { return history[selected]; }

  std::string log_csv() const; // step,train_ssim,val_ssim
  void save_log(const std::filesystem::path& path) const;
};

/// Gradient ascent on the packed parameters; splits must be disjoint by
/// patient id. Checkpoints every eval_every steps; the checkpoint with the
/// highest validation objective is selected.
TrainRun optimize(const TrainableParams& initial,
                  const recon::ReconParams& reference,
                  const Dataset& dataset_train, const Dataset& dataset_val,
                  const TrainConfig& cfg);

void save_params(const std::filesystem::path& path, const TrainableParams& p,
                 const recon::ReconParams& reference);
TrainableParams load_params(const std::filesystem::path& path,
                            const recon::ReconParams& reference);

struct SyntheticDatasetConfig {
  Index rows = 144;
  Index cols = 256;
  Index coils = 4;
  int accel = 2;
  Index acs_lines = 24;
  Index n_avg = 8;
  double noise_sigma = 1.2e-3;
  double noise_rho = 0.1;
  double motion_amp = 4.0;
  double motion_period = 12.0;
  Index n_train = 4;
  Index n_val = 2;
  std::uint64_t seed = 7;
};

/// Per-patient phantom jitter, simulated series, estimated sensitivities from
/// the prewhitened first PD shot, and the all-averages MOCO reference.
std::pair<Dataset, Dataset> build_synthetic_dataset(
    const SyntheticDatasetConfig& cfg, const recon::ReconParams& moco_params);

} // namespace psir::train
