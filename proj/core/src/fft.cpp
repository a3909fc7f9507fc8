#include "psir/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <map>
#include <mutex>

namespace psir {
namespace {

// Plans are created once per (rows, cols, sign) under a lock; fftw_execute_dft
// on caller-owned arrays is safe concurrently. FFTW_UNALIGNED lets the plan
// run on any heap buffer.
class PlanCache {
public:
  static fftw_plan get(Index rows, Index cols, int sign) {
    static PlanCache cache;
    std::scoped_lock lock(cache.mutex_);
    const Key key{rows, cols, sign};
    auto it = cache.plans_.find(key);
    if (it != cache.plans_.end()) return it->second;
    std::vector<Complex> dummy_in(rows * cols), dummy_out(rows * cols);
    fftw_plan p = fftw_plan_dft_2d(
        static_cast<int>(rows), static_cast<int>(cols),
        reinterpret_cast<fftw_complex*>(dummy_in.data()),
        reinterpret_cast<fftw_complex*>(dummy_out.data()), sign,
        FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!p) throw Error("fftw plan creation failed");
    cache.plans_.emplace(key, p);
    return p;
  }

private:
  using Key = std::tuple<Index, Index, int>;
  std::mutex mutex_;
  std::map<Key, fftw_plan> plans_;
};

ComplexImage roll(const ComplexImage& img, Index sr, Index sc) {
  ComplexImage out(img.rows, img.cols);
  const Index cols = img.cols;
  for (Index r = 0; r < img.rows; ++r) {
    const Index rr = (r + sr) % img.rows;
    const Complex* src = img.data.data() + r * cols;
    Complex* dst = out.data.data() + rr * cols;
    // column roll as two contiguous segment copies
    std::copy(src, src + cols - sc, dst + sc);
    std::copy(src + cols - sc, src + cols, dst);
  }
  return out;
}

ComplexImage transform(const ComplexImage& img, int sign, const char* name) {
  if (!all_finite(img.data))
    throw ValueError(std::string(name) + ": non-finite input");
  // ifftshift -> DFT -> fftshift, unit scale on both directions
  ComplexImage in = roll(img, (img.rows + 1) / 2, (img.cols + 1) / 2);
  ComplexImage out(img.rows, img.cols);
  fftw_plan plan = PlanCache::get(img.rows, img.cols, sign);
  fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(in.data.data()),
                   reinterpret_cast<fftw_complex*>(out.data.data()));
  const double scale = 1.0 / std::sqrt(static_cast<double>(img.rows * img.cols));
  for (auto& v : out.data) v *= scale;
  return roll(out, img.rows / 2, img.cols / 2);
}

} // namespace

ComplexImage fft2c(const ComplexImage& img) {
  return transform(img, FFTW_FORWARD, "fft2c");
}

ComplexImage ifft2c(const ComplexImage& k) {
  return transform(k, FFTW_BACKWARD, "ifft2c");
}

ComplexImage fftshift(const ComplexImage& img) {
  return roll(img, img.rows / 2, img.cols / 2);
}

ComplexImage ifftshift(const ComplexImage& img) {
  return roll(img, (img.rows + 1) / 2, (img.cols + 1) / 2);
}

} // namespace psir
