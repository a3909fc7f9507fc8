#include "psir/imageops.hpp"

#include "psir/fft.hpp"

#include <algorithm>
#include <cmath>

namespace psir {
namespace {

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0)) throw ValueError("gaussian_blur: sigma must be positive");
  const Index radius = std::max<Index>(1, static_cast<Index>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  for (Index i = -radius; i <= radius; ++i)
    k[i + radius] = std::exp(-0.5 * (i / sigma) * (i / sigma));
  double sum = 0;
  for (double v : k) sum += v;
  for (double& v : k) v /= sum;
  return k;
}

// 1D pass along one axis with border renormalization.
template <class T>
void blur_axis(const std::vector<T>& src, std::vector<T>& dst, Index n_outer,
               Index n_axis, Index stride_outer, Index stride_axis,
               const std::vector<double>& kernel) {
  const Index radius = static_cast<Index>(kernel.size() / 2);
  for (Index o = 0; o < n_outer; ++o) {
    const T* in = src.data() + o * stride_outer;
    T* out = dst.data() + o * stride_outer;
    for (Index i = 0; i < n_axis; ++i) {
      T acc{};
      double wsum = 0;
      const Index lo = std::max<Index>(-radius, -i);
      const Index hi = std::min<Index>(radius, n_axis - 1 - i);
      for (Index d = lo; d <= hi; ++d) {
        const double w = kernel[d + radius];
        acc += in[(i + d) * stride_axis] * w;
        wsum += w;
      }
      out[i * stride_axis] = acc * (1.0 / wsum);
    }
  }
}

template <class ImageT>
ImageT blur_impl(const ImageT& img, double sigma) {
  const auto kernel = gaussian_kernel(sigma);
  ImageT tmp(img.rows, img.cols);
  ImageT out(img.rows, img.cols);
  // along columns (within each row), then along rows
  blur_axis(img.data, tmp.data, img.rows, img.cols, img.cols, 1, kernel);
  blur_axis(tmp.data, out.data, img.cols, img.rows, 1, img.cols, kernel);
  return out;
}

} // namespace

RealImage gaussian_blur(const RealImage& img, double sigma) {
  return blur_impl(img, sigma);
}

ComplexImage gaussian_blur(const ComplexImage& img, double sigma) {
  return blur_impl(img, sigma);
}

ComplexImage translate(const ComplexImage& img, double dy, double dx) {
  ComplexImage k = fft2c(img);
  const Index rc = img.rows / 2, cc = img.cols / 2;
  for (Index r = 0; r < img.rows; ++r) {
    const double fy = static_cast<double>(r - rc) / img.rows;
    for (Index c = 0; c < img.cols; ++c) {
      const double fx = static_cast<double>(c - cc) / img.cols;
      const double phase = -2.0 * M_PI * (fy * dy + fx * dx);
      k(r, c) *= Complex(std::cos(phase), std::sin(phase));
    }
  }
  return ifft2c(k);
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw ValueError("percentile: empty input");
  if (!(q >= 0.0 && q <= 100.0)) throw ValueError("percentile: q out of range");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  std::size_t rank = static_cast<std::size_t>(std::ceil(q / 100.0 * n));
  if (rank < 1) rank = 1;
  if (rank > n) rank = n;
  return values[rank - 1];
}

RealImage magnitude(const ComplexImage& img) {
  RealImage out(img.rows, img.cols);
  for (Index i = 0; i < img.size(); ++i) out.data[i] = std::abs(img.data[i]);
  return out;
}

} // namespace psir
