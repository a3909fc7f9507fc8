#pragma once

#include "psir/phantom.hpp"

#include <filesystem>

namespace psir::series {

// On-disk layout of a simulated acquisition: manifest.txt plus CXF arrays
// (truth_ir, truth_pd, sens, noise_cov, pairNNN_ir/pd). The manifest holds
// the mask, motion trace, and provenance as flat key-value text.

class MissingManifestError : public Error {
public:
  using Error::Error;
};

void write_series(const std::filesystem::path& dir,
                  const phantom::AcquisitionSeries& series);

phantom::AcquisitionSeries read_series(const std::filesystem::path& dir);

std::filesystem::path manifest_path(const std::filesystem::path& dir);

} // namespace psir::series
