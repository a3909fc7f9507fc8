#pragma once

#include "psir/types.hpp"

#include <filesystem>
#include <optional>

namespace psir::recon {

/// Coil-sensitivity weighting, centered FFT, and row sampling.
struct EncodingOperator {
  CoilSensitivities sens;
  SamplingMask mask;

  EncodingOperator(CoilSensitivities s, SamplingMask m)
      : sens(std::move(s)), mask(std::move(m)) {
    if (sens.rows != mask.rows)
      throw DimensionError("encoding operator: sensitivity/mask rows mismatch");
  }
};

/// Per-iteration data-consistency step sizes for the IR and PD channels.
struct StepSchedule {
  std::vector<double> lambda_ir;
  std::vector<double> lambda_pd;

  Index n_iters() const { return static_cast<Index>(lambda_ir.size()); }
  void validate() const;

  static StepSchedule constant(Index n_iters, double lambda);
};

enum class RefinementKind { None, Tikhonov, GaussianResidual };

/// Joint IR-PD refinement residual (r_ir, r_pd), subtracted from the iterate.
///   none:              r = 0
///   tikhonov:          r = scalar * x
///   gaussian_residual: r = scalar * (x - blur(x, sigma))
/// `scalar` means mu for tikhonov and beta for gaussian_residual; it is
/// carried (and trainable) for every kind so parameter packing is uniform.
struct RefinementConfig {
  RefinementKind kind = RefinementKind::None;
  double scalar = 0.0;
  double sigma = 3.0;
  std::optional<std::vector<double>> per_iter_scalar; // overrides `scalar`

  void validate(Index n_iters) const;
  double scalar_at(Index iter) const {
    return per_iter_scalar ? (*per_iter_scalar)[iter] : scalar;
  }
};

/// Surface coil correction built from the low-pass PD magnitude.
struct SccConfig {
  double sigma = 16.0;     // blur width, pixels
  double epsilon = 0.05;   // regularization fraction
  double percentile = 90.0; // normalization percentile

  void validate() const;
};

struct ReconParams {
  StepSchedule steps = StepSchedule::constant(12, 0.5);
  RefinementConfig refinement;
  SccConfig scc;

  void validate() const;

  std::string to_text() const;
  static ReconParams from_text(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static ReconParams load(const std::filesystem::path& path);
};

/// Iterate norms past blowup_factor * (1 + |x0|) are treated as divergence,
/// together with any non-finite sample.
constexpr double kBlowupFactor = 1e6;

MultiCoilKSpace encode(const ComplexImage& x, const EncodingOperator& op);
ComplexImage adjoint(const MultiCoilKSpace& k, const EncodingOperator& op);

std::pair<ComplexImage, ComplexImage> apply_refinement(
    const ComplexImage& x_ir, const ComplexImage& x_pd,
    const RefinementConfig& cfg, Index iter);

/// N data-consistency steps with the refinement residual, both channels,
/// starting from the coil-combined adjoint images.
std::pair<ComplexImage, ComplexImage> landweber_reconstruct(
    const MultiCoilKSpace& k_ir, const MultiCoilKSpace& k_pd,
    const EncodingOperator& op, const ReconParams& params);

/// m / (blur(|x_pd|) + eps*m) with m the percentile of the blurred magnitude.
/// Strictly positive and finite; an all-zero PD gives a flat unit profile.
RealImage scc_profile(const ComplexImage& x_pd, const SccConfig& cfg);

/// Re{x_ir * exp(-i arg x_pd)} * scc_profile(x_pd).
RealImage psir_scc(const ComplexImage& x_ir, const ComplexImage& x_pd,
                   const SccConfig& cfg);

// Forward declaration; full type in phantom.hpp.
} // namespace psir::recon

namespace psir::phantom {
struct AcquisitionSeries;
}

namespace psir::recon {

/// Full single-shot pipeline on the first measurement pair.
RealImage reconstruct_single_shot(const phantom::AcquisitionSeries& series,
                                  const CoilSensitivities& sens,
                                  const ReconParams& params);

} // namespace psir::recon
