#include "psir/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace psir::metrics {
namespace {

std::vector<double> ssim_kernel(int window, double sigma) {
  std::vector<double> k(window);
  const double mid = (window - 1) / 2.0;
  double sum = 0;
  for (int i = 0; i < window; ++i) {
    k[i] = std::exp(-0.5 * (i - mid) * (i - mid) / (sigma * sigma));
    sum += k[i];
  }
  for (auto& v : k) v /= sum;
  return k;
}

// Weighted valid-mode correlation along columns then rows.
RealImage valid_filter(const RealImage& img, const std::vector<double>& k) {
  const Index w = static_cast<Index>(k.size());
  RealImage tmp(img.rows, img.cols - w + 1);
  for (Index r = 0; r < img.rows; ++r)
    for (Index c = 0; c + w <= img.cols; ++c) {
      double acc = 0;
      for (Index i = 0; i < w; ++i) acc += k[i] * img(r, c + i);
      tmp(r, c) = acc;
    }
  RealImage out(img.rows - w + 1, tmp.cols);
  for (Index c = 0; c < tmp.cols; ++c)
    for (Index r = 0; r + w <= img.rows; ++r) {
      double acc = 0;
      for (Index i = 0; i < w; ++i) acc += k[i] * tmp(r + i, c);
      out(r, c) = acc;
    }
  return out;
}

RealImage product(const RealImage& a, const RealImage& b) {
  RealImage out(a.rows, a.cols);
  for (Index i = 0; i < a.size(); ++i) out.data[i] = a.data[i] * b.data[i];
  return out;
}

double rmse(const RealImage& test, const RealImage& ref) {
  double acc = 0;
  for (Index i = 0; i < test.size(); ++i) {
    const double d = test.data[i] - ref.data[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(test.size()));
}

} // namespace

double ssim(const RealImage& test, const RealImage& ref, const SsimConfig& cfg) {
  if (!test.same_shape(ref)) throw DimensionError("ssim: shape mismatch");
  if (test.rows < cfg.window || test.cols < cfg.window)
    throw ValueError("ssim: image smaller than the window");

  double lo = ref.data[0], hi = ref.data[0];
  for (double v : ref.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (cfg.joint_range)
    for (double v : test.data) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  const double range = hi - lo;
  if (range <= 0.0) throw ValueError("ssim: degenerate dynamic range");

  const double c1 = (cfg.k1 * range) * (cfg.k1 * range);
  const double c2 = (cfg.k2 * range) * (cfg.k2 * range);
  const auto kernel = ssim_kernel(cfg.window, cfg.window_sigma);

  const RealImage mu1 = valid_filter(test, kernel);
  const RealImage mu2 = valid_filter(ref, kernel);
  const RealImage m11 = valid_filter(product(test, test), kernel);
  const RealImage m22 = valid_filter(product(ref, ref), kernel);
  const RealImage m12 = valid_filter(product(test, ref), kernel);

  double acc = 0;
  for (Index i = 0; i < mu1.size(); ++i) {
    const double u1 = mu1.data[i], u2 = mu2.data[i];
    const double s11 = m11.data[i] - u1 * u1;
    const double s22 = m22.data[i] - u2 * u2;
    const double s12 = m12.data[i] - u1 * u2;
    acc += ((2 * u1 * u2 + c1) * (2 * s12 + c2)) /
           ((u1 * u1 + u2 * u2 + c1) * (s11 + s22 + c2));
  }
  return acc / static_cast<double>(mu1.size());
}

double psnr(const RealImage& test, const RealImage& ref, double dynamic_range) {
  if (!test.same_shape(ref)) throw DimensionError("psnr: shape mismatch");
  if (!(dynamic_range > 0)) throw ValueError("psnr: dynamic range must be positive");
  const double e = rmse(test, ref);
  if (e == 0.0) return std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(dynamic_range / e);
}

double nrmse(const RealImage& test, const RealImage& ref) {
  if (!test.same_shape(ref)) throw DimensionError("nrmse: shape mismatch");
  const double den = norm2(ref.data);
  if (den == 0.0) throw ValueError("nrmse: zero reference");
  double acc = 0;
  for (Index i = 0; i < test.size(); ++i) {
    const double d = test.data[i] - ref.data[i];
    acc += d * d;
  }
  return std::sqrt(acc) / den;
}

MetricsReport macro_aggregate(const std::vector<SliceMetrics>& slices) {
  if (slices.empty()) throw ValueError("macro_aggregate: no records");
  MetricsReport report;
  report.slices = slices;

  // Group by patient, keeping first-appearance order.
  std::vector<std::string> order;
  std::map<std::string, std::vector<const SliceMetrics*>> groups;
  for (const auto& s : slices) {
    auto [it, inserted] = groups.try_emplace(s.patient_id);
    if (inserted) order.push_back(s.patient_id);
    it->second.push_back(&s);
  }

  std::vector<double> pat_ssim, pat_psnr, pat_nrmse;
  for (const auto& pid : order) {
    const auto& g = groups[pid];
    PatientMetrics p;
    p.patient_id = pid;
    p.n_slices = static_cast<Index>(g.size());
    double psnr_acc = 0;
    Index psnr_n = 0;
    for (const auto* s : g) {
      p.ssim += s->ssim;
      p.nrmse += s->nrmse;
      if (std::isinf(s->psnr_db)) {
        ++report.psnr_excluded;
      } else {
        psnr_acc += s->psnr_db;
        ++psnr_n;
      }
    }
    p.ssim /= g.size();
    p.nrmse /= g.size();
    p.psnr_db = psnr_n > 0 ? psnr_acc / psnr_n
                           : std::numeric_limits<double>::quiet_NaN();
    report.patients.push_back(p);
    pat_ssim.push_back(p.ssim);
    pat_nrmse.push_back(p.nrmse);
    if (psnr_n > 0) pat_psnr.push_back(p.psnr_db);
  }

  auto summarize = [](const std::vector<double>& v) {
    MetricSummary s;
    s.n_patients = static_cast<Index>(v.size());
    if (v.empty()) {
      s.macro_mean = std::numeric_limits<double>::quiet_NaN();
      s.standard_error = std::numeric_limits<double>::quiet_NaN();
      return s;
    }
    double mean = 0;
    for (double x : v) mean += x;
    mean /= v.size();
    s.macro_mean = mean;
    if (v.size() > 1) {
      double ss = 0;
      for (double x : v) ss += (x - mean) * (x - mean);
      s.standard_error = std::sqrt(ss / (v.size() - 1)) / std::sqrt(double(v.size()));
    }
    return s;
  };

  report.ssim = summarize(pat_ssim);
  report.psnr_db = summarize(pat_psnr);
  report.nrmse = summarize(pat_nrmse);
  return report;
}

std::string MetricsReport::to_csv() const {
  std::ostringstream os;
  os.precision(10);
  os << "patient_id,slice_id,ssim,psnr_db,nrmse\n";
  for (const auto& s : slices)
    os << s.patient_id << "," << s.slice_id << "," << s.ssim << "," << s.psnr_db
       << "," << s.nrmse << "\n";
  os << "# macro,metric,mean,stderr,n_patients\n";
  auto line = [&](const char* name, const MetricSummary& m) {
    os << "# macro," << name << "," << m.macro_mean << "," << m.standard_error
       << "," << m.n_patients << "\n";
  };
  line("ssim", ssim);
  line("psnr_db", psnr_db);
  line("nrmse", nrmse);
  os << "# psnr_excluded," << psnr_excluded << "\n";
  return os.str();
}

void MetricsReport::save_csv(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("metrics: cannot open for write: " + path.string());
  os << to_csv();
  os.flush();
  if (!os) throw Error("metrics: write failed: " + path.string());
}

} // namespace psir::metrics
