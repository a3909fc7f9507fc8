#pragma once

#include "psir/types.hpp"

#include <filesystem>
#include <variant>

namespace psir {

// CXF array file, little-endian:
//   magic "PSIR", u32 version=1, u8 kind (0=real, 1=complex, 2=multicoil
//   complex), u8 reserved[3], u32 ndim, u64 dims[ndim], float32 payload.
// Complex samples are stored interleaved re,im. Multicoil dims are
// [coils, rows, cols]. Values are quantized to float32 on write.

enum class CxfErrorKind {
  BadMagic,
  BadVersion,
  BadKind,
  DimOverflow,
  Truncated,
  Io,
};

class CxfError : public Error {
public:
  CxfError(CxfErrorKind kind, const std::string& what) : Error(what), kind_(kind) {}
  CxfErrorKind kind() const { return kind_; }

private:
  CxfErrorKind kind_;
};

using CxfArray = std::variant<RealImage, ComplexImage, MultiCoilKSpace>;

void write_array(const std::filesystem::path& path, const RealImage& img);
void write_array(const std::filesystem::path& path, const ComplexImage& img);
void write_array(const std::filesystem::path& path, const MultiCoilKSpace& k);

CxfArray read_array(const std::filesystem::path& path);

// Typed readers; throw CxfError(BadKind) if the file holds a different kind.
RealImage read_real(const std::filesystem::path& path);
ComplexImage read_complex(const std::filesystem::path& path);
MultiCoilKSpace read_multicoil(const std::filesystem::path& path);

} // namespace psir
