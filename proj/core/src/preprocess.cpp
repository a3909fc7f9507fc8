#include "psir/preprocess.hpp"

#include "psir/fft.hpp"
#include "psir/imageops.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace psir::preprocess {
namespace {

using Mat = Eigen::MatrixXcd;

Mat to_eigen(const NoiseCovariance& cov) {
  Mat m(cov.coils, cov.coils);
  for (Index i = 0; i < cov.coils; ++i)
    for (Index j = 0; j < cov.coils; ++j) m(i, j) = cov(i, j);
  return m;
}

} // namespace

NoiseCovariance estimate_noise_covariance(const std::vector<Complex>& samples,
                                          Index coils, Index m) {
  if (coils < 1) throw ValueError("noise covariance: need at least one coil");
  if (m < coils)
    throw ValueError("noise covariance: need at least as many samples as coils");
  if (static_cast<Index>(samples.size()) != coils * m)
    throw DimensionError("noise covariance: sample matrix size mismatch");
  NoiseCovariance cov(coils);
  for (Index i = 0; i < coils; ++i)
    for (Index j = i; j < coils; ++j) {
      Complex acc = 0;
      for (Index s = 0; s < m; ++s)
        acc += samples[i * m + s] * std::conj(samples[j * m + s]);
      acc /= static_cast<double>(m);
      if (i == j) {
        cov(i, i) = Complex(acc.real(), 0.0);
      } else {
        cov(i, j) = acc;
        cov(j, i) = std::conj(acc);
      }
    }
  return cov;
}

void validate_covariance(const NoiseCovariance& cov) {
  if (cov.coils < 1 || static_cast<Index>(cov.m.size()) != cov.coils * cov.coils)
    throw ValueError("covariance: bad shape");
  if (!all_finite(cov.m)) throw ValueError("covariance: non-finite entries");
  double trace = 0;
  for (Index i = 0; i < cov.coils; ++i) trace += cov(i, i).real();
  for (Index i = 0; i < cov.coils; ++i)
    for (Index j = 0; j < cov.coils; ++j)
      if (std::abs(cov(i, j) - std::conj(cov(j, i))) > 1e-10 * std::max(1.0, trace))
        throw ValueError("covariance: not Hermitian");
  Eigen::SelfAdjointEigenSolver<Mat> eig(to_eigen(cov), Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-10 * trace)
    throw ValueError("covariance: not positive semidefinite");
}

MultiCoilKSpace prewhiten(const MultiCoilKSpace& k, const NoiseCovariance& cov) {
  if (cov.coils != k.coils)
    throw DimensionError("prewhiten: covariance coil count mismatch");
  validate_covariance(cov);
  Eigen::LLT<Mat> llt(to_eigen(cov));
  if (llt.info() != Eigen::Success)
    throw ValueError("prewhiten: covariance is singular");
  const Mat l = llt.matrixL();
  for (Index i = 0; i < cov.coils; ++i)
    if (!(l(i, i).real() > 0))
      throw ValueError("prewhiten: covariance is singular");

  // Forward-substitute L y = k for every k-space location.
  MultiCoilKSpace out(k.coils, k.rows, k.cols);
  const Index n = k.rows * k.cols;
  std::vector<Complex> y(k.coils);
  for (Index idx = 0; idx < n; ++idx) {
    for (Index i = 0; i < k.coils; ++i) {
      Complex acc = k.data[i * n + idx];
      for (Index j = 0; j < i; ++j) acc -= l(i, j) * y[j];
      y[i] = acc / l(i, i);
    }
    for (Index i = 0; i < k.coils; ++i) out.data[i * n + idx] = y[i];
  }
  return out;
}

CoilSensitivities estimate_sensitivities(const MultiCoilKSpace& k_pd,
                                         const SamplingMask& mask,
                                         double smoothing_sigma) {
  mask.validate();
  if (mask.rows != k_pd.rows)
    throw DimensionError("sensitivities: mask rows mismatch");
  if (mask.acs_lines < 8)
    throw ValueError("sensitivities: need at least 8 ACS lines");
  if (!(smoothing_sigma > 0))
    throw ValueError("sensitivities: smoothing sigma must be positive");

  const Index rows = k_pd.rows, cols = k_pd.cols, nc = k_pd.coils;
  const Index a0 = mask.acs_start();

  // Raised-cosine taper over the ACS band keeps ringing out of the ratio.
  std::vector<double> taper(rows, 0.0);
  for (Index r = a0; r < a0 + mask.acs_lines; ++r) {
    const double t = (r - a0 + 0.5) / mask.acs_lines;
    taper[r] = 0.5 * (1.0 - std::cos(2.0 * M_PI * t));
  }

  std::vector<ComplexImage> lowres;
  lowres.reserve(nc);
  for (Index coil = 0; coil < nc; ++coil) {
    ComplexImage kc(rows, cols);
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c)
        kc(r, c) = k_pd(coil, r, c) * taper[r];
    lowres.push_back(gaussian_blur(ifft2c(kc), smoothing_sigma));
  }

  RealImage rss(rows, cols);
  double rss_max = 0;
  for (Index i = 0; i < rows * cols; ++i) {
    double s = 0;
    for (Index coil = 0; coil < nc; ++coil) s += std::norm(lowres[coil].data[i]);
    rss.data[i] = std::sqrt(s);
    rss_max = std::max(rss_max, rss.data[i]);
  }

  CoilSensitivities sens(nc, rows, cols);
  const double floor = 0.01 * rss_max;
  for (Index i = 0; i < rows * cols; ++i) {
    if (rss.data[i] <= floor || rss.data[i] == 0.0) continue; // stays zero
    for (Index coil = 0; coil < nc; ++coil)
      sens.data[coil * rows * cols + i] = lowres[coil].data[i] / rss.data[i];
  }
  return sens;
}

} // namespace psir::preprocess
