#pragma once

#include "psir/recon.hpp"
#include "psir/types.hpp"

namespace psir::moco {

/// Per-frame translation estimates relative to a common reference frame.
struct ShiftEstimate {
  std::vector<double> dy;
  std::vector<double> dx;
  std::vector<double> confidence; // phase-correlation peak height

  Index n_frames() const { return static_cast<Index>(dy.size()); }
  void push(double y, double x, double conf) {
    dy.push_back(y);
    dx.push_back(x);
    confidence.push_back(conf);
  }
};

struct MocoConfig {
  // When false (default), PD frame retention reuses the IR-derived selection;
  // paired beats share a respiratory phase.
  bool independent_pd_selection = false;
};

/// Phase-correlation shift with parabolic subpixel refinement, computed on
/// the magnitude images. The returned (dy, dx) is the translation that maps
/// `moving` onto `reference`.
std::pair<double, double> estimate_shift(const ComplexImage& reference,
                                         const ComplexImage& moving);

/// Like estimate_shift but also returns the correlation peak height.
std::tuple<double, double, double> estimate_shift_confidence(
    const ComplexImage& reference, const ComplexImage& moving);

/// Drop-half rule: displacement is measured from the medoid frame (the frame
/// minimizing total distance to all others); the ceil(n/2) frames with the
/// smallest displacement are retained, ties broken by lower index.
std::vector<Index> select_frames(const ShiftEstimate& shifts);

/// Translates each retained frame by its negative shift (Fourier, subpixel)
/// and returns the complex mean.
ComplexImage moco_average(const std::vector<ComplexImage>& frames,
                          const ShiftEstimate& shifts,
                          const std::vector<Index>& retained);

/// Conventional reference: per-pair Landweber (no refinement), register all
/// IR frames, drop half, average, same for PD, then PSIR with SCC.
RealImage moco_psir_reference(const phantom::AcquisitionSeries& series,
                              const CoilSensitivities& sens,
                              const recon::ReconParams& params,
                              const MocoConfig& cfg = {});

} // namespace psir::moco
