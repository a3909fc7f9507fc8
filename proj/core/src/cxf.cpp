#include "psir/cxf.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace psir {
namespace {

constexpr std::uint8_t kMagic[4] = {0x50, 0x53, 0x49, 0x52}; // "PSIR"
constexpr std::uint32_t kVersion = 1;
constexpr std::uint64_t kMaxDim = std::uint64_t(1) << 32;
constexpr std::uint64_t kMaxElements = std::uint64_t(1) << 36;

// Host is assumed little-endian; the format is little-endian on disk.
static_assert(std::endian::native == std::endian::little,
              "CXF writer assumes a little-endian host");

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <class T>
T get(std::istream& is, const char* ctx) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!is) throw CxfError(CxfErrorKind::Truncated,
                          std::string("cxf: truncated while reading ") + ctx);
  return v;
}

void write_header(std::ostream& os, std::uint8_t kind,
                  const std::vector<std::uint64_t>& dims) {
  os.write(reinterpret_cast<const char*>(kMagic), 4);
  put<std::uint32_t>(os, kVersion);
  put<std::uint8_t>(os, kind);
  const std::uint8_t reserved[3] = {0, 0, 0};
  os.write(reinterpret_cast<const char*>(reserved), 3);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(dims.size()));
  for (auto d : dims) put<std::uint64_t>(os, d);
}

void write_payload(std::ostream& os, const double* vals, std::size_t n) {
  std::vector<float> buf(n);
  for (std::size_t i = 0; i < n; ++i) buf[i] = static_cast<float>(vals[i]);
  os.write(reinterpret_cast<const char*>(buf.data()),
           static_cast<std::streamsize>(n * sizeof(float)));
}

void write_payload_complex(std::ostream& os, const Complex* vals, std::size_t n) {
  std::vector<float> buf(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    buf[2 * i] = static_cast<float>(vals[i].real());
    buf[2 * i + 1] = static_cast<float>(vals[i].imag());
  }
  os.write(reinterpret_cast<const char*>(buf.data()),
           static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw CxfError(CxfErrorKind::Io, "cxf: cannot open for write: " + path.string());
  return os;
}

void finish(std::ofstream& os, const std::filesystem::path& path) {
  os.flush();
  if (!os) throw CxfError(CxfErrorKind::Io, "cxf: write failed: " + path.string());
}

std::vector<float> read_floats(std::istream& is, std::size_t n) {
  std::vector<float> buf(n);
  is.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(n * sizeof(float)));
  if (static_cast<std::size_t>(is.gcount()) != n * sizeof(float))
    throw CxfError(CxfErrorKind::Truncated, "cxf: payload shorter than header declares");
  return buf;
}

void check_eof(std::istream& is) {
  char extra;
  if (is.read(&extra, 1))
    throw CxfError(CxfErrorKind::Truncated, "cxf: trailing bytes after payload");
}

} // namespace

void write_array(const std::filesystem::path& path, const RealImage& img) {
  auto os = open_out(path);
  write_header(os, 0, {std::uint64_t(img.rows), std::uint64_t(img.cols)});
  write_payload(os, img.data.data(), img.data.size());
  finish(os, path);
}

void write_array(const std::filesystem::path& path, const ComplexImage& img) {
  auto os = open_out(path);
  write_header(os, 1, {std::uint64_t(img.rows), std::uint64_t(img.cols)});
  write_payload_complex(os, img.data.data(), img.data.size());
  finish(os, path);
}

void write_array(const std::filesystem::path& path, const MultiCoilKSpace& k) {
  auto os = open_out(path);
  write_header(os, 2, {std::uint64_t(k.coils), std::uint64_t(k.rows), std::uint64_t(k.cols)});
  write_payload_complex(os, k.data.data(), k.data.size());
  finish(os, path);
}

CxfArray read_array(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CxfError(CxfErrorKind::Io, "cxf: cannot open: " + path.string());

  std::uint8_t magic[4];
  is.read(reinterpret_cast<char*>(magic), 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw CxfError(CxfErrorKind::BadMagic, "cxf: bad magic in " + path.string());

  const auto version = get<std::uint32_t>(is, "version");
  if (version != kVersion)
    throw CxfError(CxfErrorKind::BadVersion,
                   "cxf: unsupported version " + std::to_string(version));

  const auto kind = get<std::uint8_t>(is, "kind");
  std::uint8_t reserved[3];
  is.read(reinterpret_cast<char*>(reserved), 3);
  if (!is) throw CxfError(CxfErrorKind::Truncated, "cxf: truncated header");

  const auto ndim = get<std::uint32_t>(is, "ndim");
  const std::uint32_t expect_ndim = (kind == 2) ? 3 : 2;
  if (kind > 2) throw CxfError(CxfErrorKind::BadKind,
                               "cxf: unknown kind " + std::to_string(kind));
  if (ndim != expect_ndim)
    throw CxfError(CxfErrorKind::DimOverflow,
                   "cxf: kind " + std::to_string(kind) + " requires ndim " +
                       std::to_string(expect_ndim));

  std::vector<std::uint64_t> dims(ndim);
  std::uint64_t total = 1;
  for (auto& d : dims) {
    d = get<std::uint64_t>(is, "dims");
    if (d == 0 || d > kMaxDim)
      throw CxfError(CxfErrorKind::DimOverflow, "cxf: dimension out of range");
    total *= d;
    if (total > kMaxElements)
      throw CxfError(CxfErrorKind::DimOverflow, "cxf: element count overflow");
  }

  const std::size_t n = static_cast<std::size_t>(total);
  if (kind == 0) {
    RealImage img(static_cast<Index>(dims[0]), static_cast<Index>(dims[1]));
    auto buf = read_floats(is, n);
    for (std::size_t i = 0; i < n; ++i) img.data[i] = buf[i];
    check_eof(is);
    return img;
  }
  if (kind == 1) {
    ComplexImage img(static_cast<Index>(dims[0]), static_cast<Index>(dims[1]));
    auto buf = read_floats(is, 2 * n);
    for (std::size_t i = 0; i < n; ++i) img.data[i] = Complex(buf[2 * i], buf[2 * i + 1]);
    check_eof(is);
    return img;
  }
  MultiCoilKSpace k(static_cast<Index>(dims[0]), static_cast<Index>(dims[1]),
                    static_cast<Index>(dims[2]));
  auto buf = read_floats(is, 2 * n);
  for (std::size_t i = 0; i < n; ++i) k.data[i] = Complex(buf[2 * i], buf[2 * i + 1]);
  check_eof(is);
  return k;
}

RealImage read_real(const std::filesystem::path& path) {
  auto a = read_array(path);
  if (auto* p = std::get_if<RealImage>(&a)) return std::move(*p);
  throw CxfError(CxfErrorKind::BadKind, "cxf: expected real array in " + path.string());
}

ComplexImage read_complex(const std::filesystem::path& path) {
  auto a = read_array(path);
  if (auto* p = std::get_if<ComplexImage>(&a)) return std::move(*p);
  throw CxfError(CxfErrorKind::BadKind, "cxf: expected complex array in " + path.string());
}

MultiCoilKSpace read_multicoil(const std::filesystem::path& path) {
  auto a = read_array(path);
  if (auto* p = std::get_if<MultiCoilKSpace>(&a)) return std::move(*p);
  throw CxfError(CxfErrorKind::BadKind, "cxf: expected multicoil array in " + path.string());
}

} // namespace psir
