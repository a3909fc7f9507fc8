#include "psir/moco.hpp"

#include "psir/fft.hpp"
#include "psir/imageops.hpp"
#include "psir/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace psir::moco {
namespace {

// Parabolic vertex through (-1,l), (0,c), (1,r); zero when flat.
double parabolic_offset(double l, double c, double r) {
  const double denom = l - 2.0 * c + r;
  if (denom == 0.0) return 0.0;
  double d = 0.5 * (l - r) / denom;
  return std::clamp(d, -0.5, 0.5);
}

} // namespace

std::tuple<double, double, double> estimate_shift_confidence(
    const ComplexImage& reference, const ComplexImage& moving) {
  require_same_shape(reference, moving, "estimate_shift");

  ComplexImage a(reference.rows, reference.cols);
  ComplexImage b(reference.rows, reference.cols);
  double ea = 0, eb = 0;
  for (Index i = 0; i < reference.size(); ++i) {
    a.data[i] = std::abs(reference.data[i]);
    b.data[i] = std::abs(moving.data[i]);
    ea += std::norm(a.data[i]);
    eb += std::norm(b.data[i]);
  }
  if (ea == 0.0 || eb == 0.0)
    throw ValueError("estimate_shift: all-zero input, correlation undefined");

  const ComplexImage fa = fft2c(a);
  const ComplexImage fb = fft2c(b);
  ComplexImage cross(reference.rows, reference.cols);
  for (Index i = 0; i < cross.size(); ++i) {
    const Complex prod = fa.data[i] * std::conj(fb.data[i]);
    const double mag = std::abs(prod);
    cross.data[i] = mag > 0.0 ? prod / mag : Complex(0.0, 0.0);
  }
  const ComplexImage corr = ifft2c(cross);

  // The correlation peak sits at the centered origin plus the shift.
  const Index rows = corr.rows, cols = corr.cols;
  RealImage surface(rows, cols);
  Index pr = 0, pc = 0;
  double peak = -1.0;
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) {
      surface(r, c) = std::abs(corr(r, c));
      if (surface(r, c) > peak) {
        peak = surface(r, c);
        pr = r;
        pc = c;
      }
    }

  auto wrap = [](Index i, Index n) { return (i % n + n) % n; };
  const double offr = parabolic_offset(surface(wrap(pr - 1, rows), pc),
                                       surface(pr, pc),
                                       surface(wrap(pr + 1, rows), pc));
  const double offc = parabolic_offset(surface(pr, wrap(pc - 1, cols)),
                                       surface(pr, pc),
                                       surface(pr, wrap(pc + 1, cols)));

  // Peak sits at the centered origin minus the shift.
  const double dy = (rows / 2 - pr) - offr;
  const double dx = (cols / 2 - pc) - offc;
  return {dy, dx, peak};
}

std::pair<double, double> estimate_shift(const ComplexImage& reference,
                                         const ComplexImage& moving) {
  auto [dy, dx, conf] = estimate_shift_confidence(reference, moving);
  (void)conf;
  return {dy, dx};
}

std::vector<Index> select_frames(const ShiftEstimate& shifts) {
  const Index n = shifts.n_frames();
  if (n < 2) throw ValueError("select_frames: need at least 2 frames");
  if (!all_finite(shifts.dy) || !all_finite(shifts.dx))
    throw ValueError("select_frames: non-finite shifts");

  // Medoid: frame minimizing total distance to all others, ties to lower index.
  Index medoid = 0;
  double best = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < n; ++i) {
    double total = 0;
    for (Index j = 0; j < n; ++j)
      total += std::hypot(shifts.dy[i] - shifts.dy[j], shifts.dx[i] - shifts.dx[j]);
    if (total < best) {
      best = total;
      medoid = i;
    }
  }

  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> disp(n);
  for (Index i = 0; i < n; ++i)
    disp[i] = std::hypot(shifts.dy[i] - shifts.dy[medoid],
                         shifts.dx[i] - shifts.dx[medoid]);
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    if (disp[a] != disp[b]) return disp[a] < disp[b];
    return a < b;
  });

  const Index keep = (n + 1) / 2;
  std::vector<Index> retained(order.begin(), order.begin() + keep);
  std::sort(retained.begin(), retained.end());
  return retained;
}

ComplexImage moco_average(const std::vector<ComplexImage>& frames,
                          const ShiftEstimate& shifts,
                          const std::vector<Index>& retained) {
  if (retained.empty()) throw ValueError("moco_average: empty retention");
  if (shifts.n_frames() != static_cast<Index>(frames.size()))
    throw DimensionError("moco_average: shifts/frames length mismatch");
  ComplexImage acc(frames[0].rows, frames[0].cols);
  for (Index idx : retained) {
    if (idx < 0 || idx >= static_cast<Index>(frames.size()))
      throw ValueError("moco_average: retained index out of range");
    require_same_shape(acc, frames[idx], "moco_average");
    const ComplexImage aligned =
        translate(frames[idx], -shifts.dy[idx], -shifts.dx[idx]);
    for (Index i = 0; i < acc.size(); ++i) acc.data[i] += aligned.data[i];
  }
  const double inv = 1.0 / static_cast<double>(retained.size());
  for (auto& v : acc.data) v *= inv;
  return acc;
}

RealImage moco_psir_reference(const phantom::AcquisitionSeries& series,
                              const CoilSensitivities& sens,
                              const recon::ReconParams& params,
                              const MocoConfig& cfg) {
  if (series.n_avg < 1) throw ValueError("moco reference: empty series");
  recon::ReconParams pair_params = params;
  pair_params.refinement = recon::RefinementConfig{}; // plain Landweber per pair
  const recon::EncodingOperator op(sens, series.mask);

  std::vector<ComplexImage> ir_frames, pd_frames;
  ir_frames.reserve(series.n_avg);
  pd_frames.reserve(series.n_avg);
  for (Index i = 0; i < series.n_avg; ++i) {
    auto [x_ir, x_pd] = recon::landweber_reconstruct(series.k_ir[i],
                                                     series.k_pd[i], op,
                                                     pair_params);
    ir_frames.push_back(std::move(x_ir));
    pd_frames.push_back(std::move(x_pd));
  }

  auto register_all = [](const std::vector<ComplexImage>& frames) {
    ShiftEstimate shifts;
    for (const auto& f : frames) {
      if (&f == &frames[0]) {
        shifts.push(0.0, 0.0, 1.0);
        continue;
      }
      auto [dy, dx, conf] = estimate_shift_confidence(frames[0], f);
      shifts.push(dy, dx, conf);
    }
    return shifts;
  };

  if (series.n_avg == 1) {
    return recon::psir_scc(ir_frames[0], pd_frames[0], params.scc);
  }

  const ShiftEstimate ir_shifts = register_all(ir_frames);
  const std::vector<Index> retained = select_frames(ir_shifts);
  const ComplexImage avg_ir = moco_average(ir_frames, ir_shifts, retained);

  const ShiftEstimate pd_shifts = register_all(pd_frames);
  const std::vector<Index> pd_retained =
      cfg.independent_pd_selection ? select_frames(pd_shifts) : retained;
  const ComplexImage avg_pd = moco_average(pd_frames, pd_shifts, pd_retained);

  return recon::psir_scc(avg_ir, avg_pd, params.scc);
}

} // namespace psir::moco
