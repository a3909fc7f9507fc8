#pragma once

#include "psir/types.hpp"

#include <filesystem>

namespace psir {

/// 8-bit grayscale PNG, linearly windowed to [window_lo, window_hi]. The
/// window is recorded in a tEXt chunk ("window") for auditability.
void write_png_gray8(const std::filesystem::path& path, const RealImage& img,
                     double window_lo, double window_hi);

/// Windows to the 1st-99th percentile of the image before export; returns
/// the window used.
std::pair<double, double> write_png_percentile(const std::filesystem::path& path,
                                               const RealImage& img);

} // namespace psir
