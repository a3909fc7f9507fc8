#pragma once

#include "psir/types.hpp"

namespace psir::preprocess {

/// Sample covariance (1/m) X X^H of coil noise samples (coils x m,
/// row-major), Hermitian-symmetrized. Requires m >= coils.
NoiseCovariance estimate_noise_covariance(const std::vector<Complex>& samples,
                                          Index coils, Index m);

/// Checks the Hermitian / positive-semidefinite invariants; throws otherwise.
void validate_covariance(const NoiseCovariance& cov);

/// Applies L^-1 across the coil axis of every k-space sample, where
/// cov = L L^H (lower Cholesky). Output noise covariance is identity.
MultiCoilKSpace prewhiten(const MultiCoilKSpace& k, const NoiseCovariance& cov);

/// Low-resolution ACS images, Gaussian-smoothed, divided by their
/// root-sum-of-squares. Pixels with RSS below 1% of the maximum are zeroed.
CoilSensitivities estimate_sensitivities(const MultiCoilKSpace& k_pd,
                                         const SamplingMask& mask,
                                         double smoothing_sigma);

} // namespace psir::preprocess
