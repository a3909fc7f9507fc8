#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace psir {

using Index = std::int64_t;
using Complex = std::complex<double>;

class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Precondition / argument violations.
class ValueError : public Error {
public:
  using Error::Error;
};

class DimensionError : public Error {
public:
  using Error::Error;
};

// Landweber iterate left the finite range (step size too large).
class DivergenceError : public Error {
public:
  using Error::Error;
};

inline bool finite(double v) { return std::isfinite(v); }
inline bool finite(const Complex& v) {
  return std::isfinite(v.real()) && std::isfinite(v.imag());
}

template <class T>
bool all_finite(const std::vector<T>& v) {
  for (const auto& x : v)
    if (!finite(x)) return false;
  return true;
}

/// Dense 2D complex array, row-major.
struct ComplexImage {
  Index rows = 0;
  Index cols = 0;
  std::vector<Complex> data;

  ComplexImage() = default;
  ComplexImage(Index r, Index c) : rows(r), cols(c), data(check_size(r, c)) {}

  Complex& operator()(Index r, Index c) { return data[r * cols + c]; }
  const Complex& operator()(Index r, Index c) const { return data[r * cols + c]; }

  Index size() const { return rows * cols; }
  bool same_shape(const ComplexImage& o) const { return rows == o.rows && cols == o.cols; }

  static std::size_t check_size(Index r, Index c) {
    if (r <= 0 || c <= 0) throw ValueError("image dimensions must be positive");
    return static_cast<std::size_t>(r) * static_cast<std::size_t>(c);
  }
};

/// Dense 2D real array, row-major.
struct RealImage {
  Index rows = 0;
  Index cols = 0;
  std::vector<double> data;

  RealImage() = default;
  RealImage(Index r, Index c) : rows(r), cols(c), data(ComplexImage::check_size(r, c)) {}

  double& operator()(Index r, Index c) { return data[r * cols + c]; }
  const double& operator()(Index r, Index c) const { return data[r * cols + c]; }

  Index size() const { return rows * cols; }
  bool same_shape(const RealImage& o) const { return rows == o.rows && cols == o.cols; }
};

/// Per-coil k-space, coil-major then row-major.
struct MultiCoilKSpace {
  Index coils = 0;
  Index rows = 0;
  Index cols = 0;
  std::vector<Complex> data;

  MultiCoilKSpace() = default;
  MultiCoilKSpace(Index nc, Index r, Index c)
      : coils(nc), rows(r), cols(c),
        data(check_size(nc, r, c)) {}

  Complex& operator()(Index coil, Index r, Index c) {
    return data[(coil * rows + r) * cols + c];
  }
  const Complex& operator()(Index coil, Index r, Index c) const {
    return data[(coil * rows + r) * cols + c];
  }

  Complex* coil_ptr(Index coil) { return data.data() + coil * rows * cols; }
  const Complex* coil_ptr(Index coil) const { return data.data() + coil * rows * cols; }

  static std::size_t check_size(Index nc, Index r, Index c) {
    if (nc <= 0) throw ValueError("coil count must be positive");
    return static_cast<std::size_t>(nc) * ComplexImage::check_size(r, c);
  }
};

/// Smooth complex receive maps, same layout as MultiCoilKSpace but image domain.
/// Root-sum-of-squares across coils is 1 at every pixel (0 where all coils are 0).
struct CoilSensitivities {
  Index coils = 0;
  Index rows = 0;
  Index cols = 0;
  std::vector<Complex> data;

  CoilSensitivities() = default;
  CoilSensitivities(Index nc, Index r, Index c)
      : coils(nc), rows(r), cols(c), data(MultiCoilKSpace::check_size(nc, r, c)) {}

  Complex& operator()(Index coil, Index r, Index c) {
    return data[(coil * rows + r) * cols + c];
  }
  const Complex& operator()(Index coil, Index r, Index c) const {
    return data[(coil * rows + r) * cols + c];
  }
};

/// Hermitian coil noise covariance.
struct NoiseCovariance {
  Index coils = 0;
  std::vector<Complex> m; // row-major coils x coils

  NoiseCovariance() = default;
  explicit NoiseCovariance(Index nc) : coils(nc), m(nc * nc) {
    if (nc <= 0) throw ValueError("coil count must be positive");
  }

  Complex& operator()(Index i, Index j) { return m[i * coils + j]; }
  const Complex& operator()(Index i, Index j) const { return m[i * coils + j]; }

  static NoiseCovariance identity(Index nc) {
    NoiseCovariance cov(nc);
    for (Index i = 0; i < nc; ++i) cov(i, i) = 1.0;
    return cov;
  }
};

/// Row undersampling pattern along the phase-encode axis.
struct SamplingMask {
  Index rows = 0;
  std::vector<std::uint8_t> sampled; // one flag per phase-encode row
  int acceleration = 1;
  Index acs_lines = 0; // contiguous fully sampled center rows

  bool row_sampled(Index r) const { return sampled[r] != 0; }

  Index acs_start() const { return rows / 2 - acs_lines / 2; }

  /// Uniform undersampling: every `accel`-th row plus a fully sampled center block.
  static SamplingMask uniform(Index rows, int accel, Index acs_lines) {
    if (rows <= 0) throw ValueError("mask rows must be positive");
    if (accel < 1) throw ValueError("acceleration must be >= 1");
    if (acs_lines < 0 || acs_lines > rows) throw ValueError("bad acs_lines");
    SamplingMask m;
    m.rows = rows;
    m.acceleration = accel;
    m.acs_lines = acs_lines;
    m.sampled.assign(rows, 0);
    for (Index r = 0; r < rows; r += accel) m.sampled[r] = 1;
    const Index a0 = rows / 2 - acs_lines / 2;
    for (Index r = a0; r < a0 + acs_lines; ++r) m.sampled[r] = 1;
    m.validate();
    return m;
  }

  void validate() const {
    if (rows <= 0 || static_cast<Index>(sampled.size()) != rows)
      throw ValueError("mask row count mismatch");
    bool any = false;
    for (auto s : sampled) any = any || (s != 0);
    if (!any) throw ValueError("mask must sample at least one row");
    const Index a0 = acs_start();
    for (Index r = a0; r < a0 + acs_lines; ++r)
      if (r < 0 || r >= rows || !sampled[r])
        throw ValueError("ACS center rows must all be sampled");
  }
};

inline void require_same_shape(const ComplexImage& a, const ComplexImage& b,
                               const char* what) {
  if (!a.same_shape(b)) throw DimensionError(std::string(what) + ": shape mismatch");
}

inline double norm2(const std::vector<Complex>& v) {
  double s = 0;
  for (const auto& x : v) s += std::norm(x);
  return std::sqrt(s);
}

inline double norm2(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

} // namespace psir
