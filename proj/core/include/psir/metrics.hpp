#pragma once

#include "psir/types.hpp"

#include <filesystem>

namespace psir::metrics {

struct SsimConfig {
  double k1 = 0.01;
  double k2 = 0.03;
  int window = 11;
  double window_sigma = 1.5;
  // Dynamic range from the joint min/max of both images (symmetric metric).
  // Set false for the reference-range convention used by some libraries.
  bool joint_range = true;
};

/// Mean local SSIM over fully overlapped window positions (Gaussian window).
double ssim(const RealImage& test, const RealImage& ref, const SsimConfig& cfg = {});

/// 20*log10(L / RMSE); identical images give +infinity.
double psnr(const RealImage& test, const RealImage& ref, double dynamic_range);

/// ||test - ref||_2 / ||ref||_2.
double nrmse(const RealImage& test, const RealImage& ref);

struct SliceMetrics {
  std::string patient_id;
  std::string slice_id;
  double ssim = 0;
  double psnr_db = 0;
  double nrmse = 0;
};

struct MetricSummary {
  double macro_mean = 0;
  double standard_error = 0; // sample SD across patients / sqrt(n)
  Index n_patients = 0;
};

struct PatientMetrics {
  std::string patient_id;
  double ssim = 0;
  double psnr_db = 0;
  double nrmse = 0;
  Index n_slices = 0;
};

struct MetricsReport {
  std::vector<SliceMetrics> slices;
  std::vector<PatientMetrics> patients; // per-patient means
  MetricSummary ssim;
  MetricSummary psnr_db;
  MetricSummary nrmse;
  Index psnr_excluded = 0; // +inf slices left out of means

  std::string to_csv() const;
  void save_csv(const std::filesystem::path& path) const;
};

/// Patient means first, then mean +- standard error across patients.
MetricsReport macro_aggregate(const std::vector<SliceMetrics>& slices);

} // namespace psir::metrics
