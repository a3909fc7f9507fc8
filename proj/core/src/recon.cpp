#include "psir/recon.hpp"

#include "psir/fft.hpp"
#include "psir/imageops.hpp"
#include "psir/keyvalue.hpp"
#include "psir/phantom.hpp"

#include <cmath>

namespace psir::recon {

void StepSchedule::validate() const {
  if (lambda_ir.empty()) throw ValueError("step schedule: need at least one iteration");
  if (lambda_ir.size() != lambda_pd.size())
    throw ValueError("step schedule: IR/PD length mismatch");
  if (!all_finite(lambda_ir) || !all_finite(lambda_pd))
    throw ValueError("step schedule: non-finite step size");
}

StepSchedule StepSchedule::constant(Index n_iters, double lambda) {
  if (n_iters < 1) throw ValueError("step schedule: need at least one iteration");
  StepSchedule s;
  s.lambda_ir.assign(n_iters, lambda);
  s.lambda_pd.assign(n_iters, lambda);
  return s;
}

void RefinementConfig::validate(Index n_iters) const {
  if (!std::isfinite(scalar)) throw ValueError("refinement: non-finite scalar");
  if (kind == RefinementKind::GaussianResidual && !(sigma > 0))
    throw ValueError("refinement: sigma must be positive");
  if (per_iter_scalar) {
    if (static_cast<Index>(per_iter_scalar->size()) != n_iters)
      throw ValueError("refinement: per-iteration scalars must match iteration count");
    if (!all_finite(*per_iter_scalar))
      throw ValueError("refinement: non-finite per-iteration scalar");
  }
  if (kind == RefinementKind::Tikhonov) {
    for (Index i = 0; i < n_iters; ++i)
      if (scalar_at(i) < 0) throw ValueError("refinement: tikhonov mu must be >= 0");
  }
}

void SccConfig::validate() const {
  if (!(sigma > 0)) throw ValueError("scc: sigma must be positive");
  if (!(epsilon > 0 && epsilon < 1)) throw ValueError("scc: epsilon must be in (0,1)");
  if (!(percentile >= 50 && percentile <= 100))
    throw ValueError("scc: percentile must be in [50,100]");
}

void ReconParams::validate() const {
  steps.validate();
  refinement.validate(steps.n_iters());
  scc.validate();
}

namespace {

const char* kind_name(RefinementKind k) {
  switch (k) {
    case RefinementKind::None: return "none";
    case RefinementKind::Tikhonov: return "tikhonov";
    case RefinementKind::GaussianResidual: return "gaussian_residual";
  }
  return "none";
}

RefinementKind kind_from(const std::string& s) {
  if (s == "none") return RefinementKind::None;
  if (s == "tikhonov") return RefinementKind::Tikhonov;
  if (s == "gaussian_residual") return RefinementKind::GaussianResidual;
  throw ValueError("recon params: unknown refinement kind '" + s + "'");
}

} // namespace

std::string ReconParams::to_text() const {
  KeyValueFile kv;
  kv.set_i64("n_iters", steps.n_iters());
  kv.set_f64_list("lambda_ir", steps.lambda_ir);
  kv.set_f64_list("lambda_pd", steps.lambda_pd);
  kv.set("refinement", kind_name(refinement.kind));
  kv.set_f64("refinement_scalar", refinement.scalar);
  kv.set_f64("refinement_sigma", refinement.sigma);
  if (refinement.per_iter_scalar)
    kv.set_f64_list("refinement_per_iter", *refinement.per_iter_scalar);
  kv.set_f64("scc_sigma", scc.sigma);
  kv.set_f64("scc_epsilon", scc.epsilon);
  kv.set_f64("scc_percentile", scc.percentile);
  return kv.to_string();
}

ReconParams ReconParams::from_text(const std::string& text) {
  const KeyValueFile kv = KeyValueFile::parse(text);
  ReconParams p;
  const Index n = kv.require_i64("n_iters");
  p.steps.lambda_ir = kv.require_f64_list("lambda_ir");
  p.steps.lambda_pd = kv.require_f64_list("lambda_pd");
  if (static_cast<Index>(p.steps.lambda_ir.size()) != n ||
      static_cast<Index>(p.steps.lambda_pd.size()) != n)
    throw ValueError("recon params: lambda lists must have n_iters entries");
  p.refinement.kind = kind_from(kv.require("refinement"));
  p.refinement.scalar = kv.get_f64_or("refinement_scalar", 0.0);
  p.refinement.sigma = kv.get_f64_or("refinement_sigma", 3.0);
  if (kv.has("refinement_per_iter"))
    p.refinement.per_iter_scalar = kv.require_f64_list("refinement_per_iter");
  p.scc.sigma = kv.get_f64_or("scc_sigma", 16.0);
  p.scc.epsilon = kv.get_f64_or("scc_epsilon", 0.05);
  p.scc.percentile = kv.get_f64_or("scc_percentile", 90.0);
  p.validate();
  return p;
}

void ReconParams::save(const std::filesystem::path& path) const {
  KeyValueFile::parse(to_text()).save(path);
}

ReconParams ReconParams::load(const std::filesystem::path& path) {
  return from_text(KeyValueFile::load(path).to_string());
}

MultiCoilKSpace encode(const ComplexImage& x, const EncodingOperator& op) {
  if (x.rows != op.sens.rows || x.cols != op.sens.cols)
    throw DimensionError("encode: image/sensitivity shape mismatch");
  const Index nc = op.sens.coils, n = x.size();
  MultiCoilKSpace out(nc, x.rows, x.cols);
  for (Index coil = 0; coil < nc; ++coil) {
    ComplexImage weighted(x.rows, x.cols);
    for (Index i = 0; i < n; ++i)
      weighted.data[i] = op.sens.data[coil * n + i] * x.data[i];
    ComplexImage kc = fft2c(weighted);
    for (Index r = 0; r < x.rows; ++r)
      if (!op.mask.row_sampled(r))
        for (Index c = 0; c < x.cols; ++c) kc(r, c) = 0.0;
    std::copy(kc.data.begin(), kc.data.end(), out.coil_ptr(coil));
  }
  return out;
}

ComplexImage adjoint(const MultiCoilKSpace& k, const EncodingOperator& op) {
  if (k.rows != op.sens.rows || k.cols != op.sens.cols || k.coils != op.sens.coils)
    throw DimensionError("adjoint: k-space/sensitivity shape mismatch");
  const Index n = k.rows * k.cols;
  ComplexImage out(k.rows, k.cols);
  for (Index coil = 0; coil < k.coils; ++coil) {
    ComplexImage kc(k.rows, k.cols);
    std::copy(k.coil_ptr(coil), k.coil_ptr(coil) + n, kc.data.begin());
    for (Index r = 0; r < k.rows; ++r)
      if (!op.mask.row_sampled(r))
        for (Index c = 0; c < k.cols; ++c) kc(r, c) = 0.0;
    const ComplexImage img = ifft2c(kc);
    for (Index i = 0; i < n; ++i)
      out.data[i] += std::conj(op.sens.data[coil * n + i]) * img.data[i];
  }
  return out;
}

std::pair<ComplexImage, ComplexImage> apply_refinement(
    const ComplexImage& x_ir, const ComplexImage& x_pd,
    const RefinementConfig& cfg, Index iter) {
  const double s = cfg.scalar_at(iter);
  switch (cfg.kind) {
    case RefinementKind::None: {
      ComplexImage r_ir(x_ir.rows, x_ir.cols), r_pd(x_pd.rows, x_pd.cols);
      return {std::move(r_ir), std::move(r_pd)};
    }
    case RefinementKind::Tikhonov: {
      ComplexImage r_ir = x_ir, r_pd = x_pd;
      for (auto& v : r_ir.data) v *= s;
      for (auto& v : r_pd.data) v *= s;
      return {std::move(r_ir), std::move(r_pd)};
    }
    case RefinementKind::GaussianResidual: {
      ComplexImage b_ir = gaussian_blur(x_ir, cfg.sigma);
      ComplexImage b_pd = gaussian_blur(x_pd, cfg.sigma);
      for (Index i = 0; i < x_ir.size(); ++i)
        b_ir.data[i] = s * (x_ir.data[i] - b_ir.data[i]);
      for (Index i = 0; i < x_pd.size(); ++i)
        b_pd.data[i] = s * (x_pd.data[i] - b_pd.data[i]);
      return {std::move(b_ir), std::move(b_pd)};
    }
  }
  throw ValueError("refinement: unknown kind");
}

namespace {

void check_iterate(const ComplexImage& x, double limit, const char* channel) {
  double peak = 0;
  for (const auto& v : x.data) {
    if (!finite(v))
      throw DivergenceError(std::string("landweber: non-finite ") + channel +
                            " iterate");
    peak = std::max(peak, std::abs(v));
  }
  if (peak > limit)
    throw DivergenceError(std::string("landweber: ") + channel +
                          " iterate blew up (divergent step size)");
}

} // namespace

std::pair<ComplexImage, ComplexImage> landweber_reconstruct(
    const MultiCoilKSpace& k_ir, const MultiCoilKSpace& k_pd,
    const EncodingOperator& op, const ReconParams& params) {
  params.validate();
  ComplexImage x_ir = adjoint(k_ir, op);
  ComplexImage x_pd = adjoint(k_pd, op);
  require_same_shape(x_ir, x_pd, "landweber");

  double peak0 = 0;
  for (const auto& v : x_ir.data) peak0 = std::max(peak0, std::abs(v));
  for (const auto& v : x_pd.data) peak0 = std::max(peak0, std::abs(v));
  const double limit = kBlowupFactor * (1.0 + peak0);

  const Index n_iters = params.steps.n_iters();
  for (Index it = 0; it < n_iters; ++it) {
    auto [r_ir, r_pd] = apply_refinement(x_ir, x_pd, params.refinement, it);

    auto step = [&](ComplexImage& x, const MultiCoilKSpace& k,
                    const ComplexImage& r, double lambda, const char* channel) {
      MultiCoilKSpace ax = encode(x, op);
      for (Index i = 0; i < static_cast<Index>(ax.data.size()); ++i)
        ax.data[i] -= k.data[i];
      const ComplexImage grad = adjoint(ax, op);
      for (Index i = 0; i < x.size(); ++i)
        x.data[i] -= lambda * grad.data[i] + r.data[i];
      check_iterate(x, limit, channel);
    };

    step(x_ir, k_ir, r_ir, params.steps.lambda_ir[it], "IR");
    step(x_pd, k_pd, r_pd, params.steps.lambda_pd[it], "PD");
  }
  return {std::move(x_ir), std::move(x_pd)};
}

RealImage scc_profile(const ComplexImage& x_pd, const SccConfig& cfg) {
  cfg.validate();
  const RealImage blurred = gaussian_blur(magnitude(x_pd), cfg.sigma);
  const double m = percentile(blurred.data, cfg.percentile);
  RealImage out(x_pd.rows, x_pd.cols);
  if (m <= 0.0) {
    // All-zero PD: flat unit profile rather than a division by zero.
    for (auto& v : out.data) v = 1.0;
    return out;
  }
  for (Index i = 0; i < out.size(); ++i)
    out.data[i] = m / (blurred.data[i] + cfg.epsilon * m);
  return out;
}

RealImage psir_scc(const ComplexImage& x_ir, const ComplexImage& x_pd,
                   const SccConfig& cfg) {
  require_same_shape(x_ir, x_pd, "psir_scc");
  const RealImage profile = scc_profile(x_pd, cfg);
  RealImage out(x_ir.rows, x_ir.cols);
  for (Index i = 0; i < out.size(); ++i) {
    const Complex pd = x_pd.data[i];
    const double mag = std::abs(pd);
    // arg of a zero PD pixel is defined as 0
    const Complex unit = mag > 0.0 ? std::conj(pd) / mag : Complex(1.0, 0.0);
    out.data[i] = (x_ir.data[i] * unit).real() * profile.data[i];
  }
  return out;
}

RealImage reconstruct_single_shot(const phantom::AcquisitionSeries& series,
                                  const CoilSensitivities& sens,
                                  const ReconParams& params) {
  if (series.n_avg < 1 || series.k_ir.empty() || series.k_pd.empty())
    throw ValueError("single shot: series has no measurement pairs");
  const EncodingOperator op(sens, series.mask);
  auto [x_ir, x_pd] =
      landweber_reconstruct(series.k_ir[0], series.k_pd[0], op, params);
  return psir_scc(x_ir, x_pd, params.scc);
}

} // namespace psir::recon
