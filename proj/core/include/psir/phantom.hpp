#pragma once

#include "psir/types.hpp"

#include <filesystem>

namespace psir::phantom {

/// Elliptical tissue region; center and semi-axes are fractions of the image
/// extent, rotation in radians. Later regions in the list paint over earlier
/// ones, so specs list regions outer to inner.
struct Region {
  double center_row = 0.5; // fraction of rows
  double center_col = 0.5; // fraction of cols
  double semi_row = 0.25;  // fraction of rows
  double semi_col = 0.25;  // fraction of cols
  double rotation = 0.0;   // radians
  std::string tissue;
};

struct Tissue {
  double t1_msec = 0;
  double proton_density = 0;
};

struct PhantomSpec {
  Index rows = 144;
  Index cols = 256;
  std::vector<Region> regions;
  std::vector<std::pair<std::string, Tissue>> tissues;
  double ti_msec = 300.0;
  double phase_amplitude = 0.6; // peak of the smooth background phase, radians
  std::uint64_t seed = 1;

  const Tissue& tissue(const std::string& name) const;
  void validate() const;

  std::string to_text() const;
  static PhantomSpec from_text(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static PhantomSpec load(const std::filesystem::path& path);

  /// Chest ellipse, myocardial ring with blood pool, and a scar lesion
  /// covering roughly a 60 degree arc of the ring. T1/PD values are
  /// plausible post-contrast defaults, tunable through the spec file.
  static PhantomSpec cardiac_default(Index rows = 144, Index cols = 256,
                                     std::uint64_t seed = 1);
};

/// Per-heartbeat rigid translation in pixels.
struct MotionTrace {
  std::vector<double> dy;
  std::vector<double> dx;

  Index n_beats() const { return static_cast<Index>(dy.size()); }
  void validate() const;

  static MotionTrace none(Index n_beats);
  /// dy(t) = amp * sin(2*pi*t/period), dx = 0.4 * that, phase from seed.
  static MotionTrace sinusoidal(Index n_beats, double amp_px = 4.0,
                                double period_beats = 12.0,
                                std::uint64_t seed = 0);
};

/// One simulated free-breathing acquisition: n_avg interleaved IR/PD k-space
/// pairs plus the ground truth the simulation started from.
struct AcquisitionSeries {
  Index n_avg = 0;
  std::vector<MultiCoilKSpace> k_ir;
  std::vector<MultiCoilKSpace> k_pd;
  SamplingMask mask;
  CoilSensitivities sim_sens; // maps used by the simulation (ground truth)
  NoiseCovariance noise_cov;
  MotionTrace motion;
  ComplexImage truth_ir;
  ComplexImage truth_pd;
};

/// Ideal single-inversion recovery signal pd * (1 - 2*exp(-ti/t1)).
double ir_signal(double t1_msec, double ti_msec, double proton_density);

/// Ground-truth IR and PD images with a shared smooth phase.
std::pair<ComplexImage, ComplexImage> render_phantom(const PhantomSpec& spec);

/// Smooth unit-RSS maps: Gaussian magnitude lobes centered outside the field
/// of view plus mild random phase ramps.
CoilSensitivities simulate_coil_maps(Index n_coils, Index rows, Index cols,
                                     std::uint64_t seed);

/// sigma^2 on the diagonal, rho*sigma^2 off-diagonal.
NoiseCovariance correlated_covariance(Index coils, double sigma, double rho);

AcquisitionSeries simulate_series(const PhantomSpec& spec,
                                  const CoilSensitivities& coils,
                                  const SamplingMask& mask,
                                  const MotionTrace& motion,
                                  const NoiseCovariance& noise_cov,
                                  Index n_avg, std::uint64_t seed);

} // namespace psir::phantom
