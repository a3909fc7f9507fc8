#pragma once

#include "psir/types.hpp"

namespace psir {

// Centered orthonormal 2D transforms: DC sits at (rows/2, cols/2) and both
// directions carry the 1/sqrt(rows*cols) scale, so fft2c is unitary and
// ifft2c is simultaneously its inverse and its adjoint.

ComplexImage fft2c(const ComplexImage& img);
ComplexImage ifft2c(const ComplexImage& k);

/// Circular roll moving index 0 to index rows/2 (the centering shift).
ComplexImage fftshift(const ComplexImage& img);
ComplexImage ifftshift(const ComplexImage& img);

} // namespace psir
