#pragma once

#include "psir/types.hpp"

namespace psir {

/// Separable Gaussian blur, kernel truncated at 3*sigma and renormalized at
/// the borders so constants are preserved exactly.
RealImage gaussian_blur(const RealImage& img, double sigma);
ComplexImage gaussian_blur(const ComplexImage& img, double sigma);

/// Subpixel circular translation via a Fourier-domain phase ramp. Exact
/// circular shift for integer (dy, dx).
ComplexImage translate(const ComplexImage& img, double dy, double dx);

/// Nearest-rank percentile, q in [0, 100]. Sorts a copy.
double percentile(std::vector<double> values, double q);

RealImage magnitude(const ComplexImage& img);

} // namespace psir
