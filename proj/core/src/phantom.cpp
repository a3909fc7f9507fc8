#include "psir/phantom.hpp"

#include "psir/fft.hpp"
#include "psir/imageops.hpp"
#include "psir/keyvalue.hpp"
#include "psir/rng.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace psir::phantom {
namespace {

bool inside(const Region& reg, Index rows, Index cols, Index r, Index c) {
  const double y = (r - reg.center_row * rows) / (reg.semi_row * rows);
  const double x = (c - reg.center_col * cols) / (reg.semi_col * cols);
  const double ct = std::cos(reg.rotation), st = std::sin(reg.rotation);
  const double u = ct * x + st * y;
  const double v = -st * x + ct * y;
  return u * u + v * v <= 1.0;
}

} // namespace

const Tissue& PhantomSpec::tissue(const std::string& name) const {
  for (const auto& [n, t] : tissues)
    if (n == name) return t;
  throw ValueError("phantom: unknown tissue '" + name + "'");
}

void PhantomSpec::validate() const {
  if (rows <= 0 || cols <= 0) throw ValueError("phantom: dimensions must be positive");
  if (regions.empty()) throw ValueError("phantom: at least one region required");
  if (!(ti_msec > 0)) throw ValueError("phantom: TI must be positive");
  for (const auto& [name, t] : tissues) {
    if (!(t.t1_msec > 0)) throw ValueError("phantom: T1 must be positive for " + name);
    if (!(t.proton_density >= 0))
      throw ValueError("phantom: proton density must be >= 0 for " + name);
  }
  for (const auto& reg : regions) {
    tissue(reg.tissue); // must resolve
    if (!(reg.semi_row > 0) || !(reg.semi_col > 0))
      throw ValueError("phantom: region semi-axes must be positive");
  }
}

std::string PhantomSpec::to_text() const {
  KeyValueFile kv;
  kv.set_i64("rows", rows);
  kv.set_i64("cols", cols);
  kv.set_f64("ti_msec", ti_msec);
  kv.set_f64("phase_amplitude", phase_amplitude);
  kv.set_i64("seed", static_cast<std::int64_t>(seed));
  std::string tissue_names;
  for (const auto& [n, t] : tissues) {
    if (!tissue_names.empty()) tissue_names += ",";
    tissue_names += n;
    kv.set_f64_list("tissue_" + n, {t.t1_msec, t.proton_density});
  }
  kv.set("tissues", tissue_names);
  kv.set_i64("n_regions", static_cast<std::int64_t>(regions.size()));
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const auto& reg = regions[i];
    kv.set_f64_list("region" + std::to_string(i),
                    {reg.center_row, reg.center_col, reg.semi_row, reg.semi_col,
                     reg.rotation});
    kv.set("region" + std::to_string(i) + "_tissue", reg.tissue);
  }
  return kv.to_string();
}

PhantomSpec PhantomSpec::from_text(const std::string& text) {
  const KeyValueFile kv = KeyValueFile::parse(text);
  PhantomSpec spec;
  spec.rows = kv.require_i64("rows");
  spec.cols = kv.require_i64("cols");
  spec.ti_msec = kv.require_f64("ti_msec");
  spec.phase_amplitude = kv.get_f64_or("phase_amplitude", 0.6);
  spec.seed = static_cast<std::uint64_t>(kv.get_i64_or("seed", 1));
  std::istringstream names(kv.require("tissues"));
  std::string name;
  while (std::getline(names, name, ',')) {
    const auto v = kv.require_f64_list("tissue_" + name);
    if (v.size() != 2) throw ValueError("phantom: tissue_" + name + " needs t1,pd");
    spec.tissues.emplace_back(name, Tissue{v[0], v[1]});
  }
  const auto n_regions = kv.require_i64("n_regions");
  for (std::int64_t i = 0; i < n_regions; ++i) {
    const auto v = kv.require_f64_list("region" + std::to_string(i));
    if (v.size() != 5)
      throw ValueError("phantom: region" + std::to_string(i) +
                       " needs cy,cx,ry,rx,rot");
    Region reg{v[0], v[1], v[2], v[3], v[4],
               kv.require("region" + std::to_string(i) + "_tissue")};
    spec.regions.push_back(reg);
  }
  spec.validate();
  return spec;
}

void PhantomSpec::save(const std::filesystem::path& path) const {
  KeyValueFile::parse(to_text()).save(path);
}

PhantomSpec PhantomSpec::load(const std::filesystem::path& path) {
  return from_text(KeyValueFile::load(path).to_string());
}

PhantomSpec PhantomSpec::cardiac_default(Index rows, Index cols,
                                         std::uint64_t seed) {
  PhantomSpec spec;
  spec.rows = rows;
  spec.cols = cols;
  spec.seed = seed;
  // Post-contrast ballpark T1s; TI close to the myocardial null.
  spec.tissues = {
      {"body", {800.0, 0.55}},
      {"myocardium", {450.0, 0.80}},
      {"blood", {320.0, 0.90}},
      {"scar", {280.0, 0.95}},
  };
  spec.ti_msec = 450.0 * std::numbers::ln2; // nulls normal myocardium

  // Small deterministic jitter so different seeds give different anatomy.
  Rng rng(substream(seed, 0xF0));
  auto jitter = [&](double v, double rel) {
    return v * (1.0 + rel * (2.0 * rng.uniform01() - 1.0));
  };

  Region chest{0.52, 0.50, jitter(0.44, 0.05), jitter(0.42, 0.05), 0.0, "body"};
  Region myo{0.50, 0.46, jitter(0.26, 0.08), jitter(0.15, 0.08), 0.0, "myocardium"};
  Region blood{0.50, 0.46, myo.semi_row * 0.62, myo.semi_col * 0.62, 0.0, "blood"};
  // Lesion sitting on the ring, sized to span roughly a 60 degree arc.
  const double ang = rng.uniform(0.0, 2.0 * M_PI);
  const double ring_r = 0.5 * (myo.semi_row + blood.semi_row);
  const double ring_c = 0.5 * (myo.semi_col + blood.semi_col);
  Region scar{myo.center_row + ring_r * std::sin(ang),
              myo.center_col + ring_c * std::cos(ang),
              0.30 * ring_r + 0.02, 0.30 * ring_c + 0.02, 0.0, "scar"};
  spec.regions = {chest, myo, blood, scar};
  return spec;
}

void MotionTrace::validate() const {
  if (dy.size() != dx.size()) throw ValueError("motion: dy/dx length mismatch");
  if (!all_finite(dy) || !all_finite(dx)) throw ValueError("motion: non-finite entries");
}

MotionTrace MotionTrace::none(Index n_beats) {
  MotionTrace m;
  m.dy.assign(n_beats, 0.0);
  m.dx.assign(n_beats, 0.0);
  return m;
}

MotionTrace MotionTrace::sinusoidal(Index n_beats, double amp_px,
                                    double period_beats, std::uint64_t seed) {
  if (!(period_beats > 0)) throw ValueError("motion: period must be positive");
  Rng rng(substream(seed, 0x11));
  const double phase = rng.uniform(0.0, 2.0 * M_PI);
  MotionTrace m;
  m.dy.resize(n_beats);
  m.dx.resize(n_beats);
  for (Index t = 0; t < n_beats; ++t) {
    const double s = std::sin(2.0 * M_PI * t / period_beats + phase);
    m.dy[t] = amp_px * s;
    m.dx[t] = 0.4 * amp_px * s;
  }
  return m;
}

double ir_signal(double t1_msec, double ti_msec, double proton_density) {
  if (!(t1_msec > 0)) throw ValueError("ir_signal: T1 must be positive");
  if (!(ti_msec > 0)) throw ValueError("ir_signal: TI must be positive");
  if (!(proton_density >= 0)) throw ValueError("ir_signal: PD must be >= 0");
  return proton_density * (1.0 - 2.0 * std::exp(-ti_msec / t1_msec));
}

std::pair<ComplexImage, ComplexImage> render_phantom(const PhantomSpec& spec) {
  spec.validate();
  ComplexImage ir(spec.rows, spec.cols);
  ComplexImage pd(spec.rows, spec.cols);

  // Smooth background phase: quadratic polynomial in normalized coordinates,
  // coefficients from the seed, scaled to peak at phase_amplitude.
  Rng rng(substream(spec.seed, 0x22));
  double coef[6];
  for (double& c : coef) c = 2.0 * rng.uniform01() - 1.0;

  for (Index r = 0; r < spec.rows; ++r) {
    const double u = 2.0 * r / (spec.rows - 1 > 0 ? spec.rows - 1 : 1) - 1.0;
    for (Index c = 0; c < spec.cols; ++c) {
      const double v = 2.0 * c / (spec.cols - 1 > 0 ? spec.cols - 1 : 1) - 1.0;
      const Region* hit = nullptr;
      for (const auto& reg : spec.regions)
        if (inside(reg, spec.rows, spec.cols, r, c)) hit = &reg; // innermost last
      double s_ir = 0.0, s_pd = 0.0;
      if (hit) {
        const Tissue& t = spec.tissue(hit->tissue);
        s_ir = ir_signal(t.t1_msec, spec.ti_msec, t.proton_density);
        s_pd = t.proton_density;
      }
      const double phi = spec.phase_amplitude *
                         (coef[0] + coef[1] * u + coef[2] * v + coef[3] * u * u +
                          coef[4] * u * v + coef[5] * v * v);
      const Complex ph(std::cos(phi), std::sin(phi));
      ir(r, c) = s_ir * ph;
      pd(r, c) = s_pd * ph;
    }
  }
  return {std::move(ir), std::move(pd)};
}

CoilSensitivities simulate_coil_maps(Index n_coils, Index rows, Index cols,
                                     std::uint64_t seed) {
  if (n_coils < 1) throw ValueError("coil maps: need at least one coil");
  CoilSensitivities maps(n_coils, rows, cols);
  Rng rng(substream(seed, 0xC0));
  const double extent = static_cast<double>(std::max(rows, cols));
  for (Index coil = 0; coil < n_coils; ++coil) {
    // Lobe center on a ring outside the FOV border.
    const double ang = 2.0 * M_PI * coil / n_coils + rng.uniform(-0.2, 0.2);
    const double cy = rows / 2.0 + 0.75 * extent * std::sin(ang);
    const double cx = cols / 2.0 + 0.75 * extent * std::cos(ang);
    const double width = extent * rng.uniform(0.6, 0.9);
    const double py = rng.uniform(-1.5, 1.5) / rows;
    const double px = rng.uniform(-1.5, 1.5) / cols;
    const double p0 = rng.uniform(0.0, 2.0 * M_PI);
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c) {
        const double d2 = (r - cy) * (r - cy) + (c - cx) * (c - cx);
        const double mag = std::exp(-0.5 * d2 / (width * width));
        const double phi = p0 + 2.0 * M_PI * (py * r + px * c);
        maps(coil, r, c) = mag * Complex(std::cos(phi), std::sin(phi));
      }
  }
  // Unit RSS per pixel (Gaussian lobes are strictly positive, so RSS > 0).
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) {
      double rss = 0;
      for (Index coil = 0; coil < n_coils; ++coil) rss += std::norm(maps(coil, r, c));
      const double inv = 1.0 / std::sqrt(rss);
      for (Index coil = 0; coil < n_coils; ++coil) maps(coil, r, c) *= inv;
    }
  return maps;
}

NoiseCovariance correlated_covariance(Index coils, double sigma, double rho) {
  if (!(sigma >= 0)) throw ValueError("covariance: sigma must be >= 0");
  if (!(rho >= 0 && rho < 1)) throw ValueError("covariance: rho must be in [0,1)");
  NoiseCovariance cov(coils);
  for (Index i = 0; i < coils; ++i)
    for (Index j = 0; j < coils; ++j)
      cov(i, j) = sigma * sigma * (i == j ? 1.0 : rho);
  return cov;
}

AcquisitionSeries simulate_series(const PhantomSpec& spec,
                                  const CoilSensitivities& coils,
                                  const SamplingMask& mask,
                                  const MotionTrace& motion,
                                  const NoiseCovariance& noise_cov,
                                  Index n_avg, std::uint64_t seed) {
  spec.validate();
  mask.validate();
  motion.validate();
  if (n_avg < 1) throw ValueError("simulate_series: n_avg must be >= 1");
  if (coils.rows != spec.rows || coils.cols != spec.cols)
    throw DimensionError("simulate_series: coil map shape mismatch");
  if (mask.rows != spec.rows)
    throw DimensionError("simulate_series: mask rows mismatch");
  if (noise_cov.coils != coils.coils)
    throw DimensionError("simulate_series: covariance coil count mismatch");
  if (motion.n_beats() < 2 * n_avg)
    throw ValueError("simulate_series: motion trace shorter than 2*n_avg beats");

  // Cholesky of the coil covariance; also rejects non-PSD input.
  using Mat = Eigen::MatrixXcd;
  Mat psi(noise_cov.coils, noise_cov.coils);
  for (Index i = 0; i < noise_cov.coils; ++i)
    for (Index j = 0; j < noise_cov.coils; ++j) psi(i, j) = noise_cov(i, j);
  const double scale = psi.norm();
  Mat chol_l;
  bool noise_free = scale == 0.0;
  if (!noise_free) {
    Eigen::SelfAdjointEigenSolver<Mat> eig(psi, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-10 * psi.real().trace())
      throw ValueError("simulate_series: covariance not positive semidefinite");
    // Tiny ridge so PSD-but-singular covariances still factor.
    Eigen::LLT<Mat> llt(psi + 1e-14 * scale * Mat::Identity(psi.rows(), psi.cols()));
    if (llt.info() != Eigen::Success)
      throw ValueError("simulate_series: covariance factorization failed");
    chol_l = llt.matrixL();
  }

  AcquisitionSeries series;
  series.n_avg = n_avg;
  series.mask = mask;
  series.sim_sens = coils;
  series.noise_cov = noise_cov;
  series.motion = motion;
  auto truth = render_phantom(spec);
  series.truth_ir = std::move(truth.first);
  series.truth_pd = std::move(truth.second);

  Rng rng(substream(seed, 0xA0));
  const Index nc = coils.coils;
  std::vector<Complex> w(nc), n(nc);

  auto acquire = [&](const ComplexImage& truth_img, Index beat) {
    const ComplexImage moved =
        translate(truth_img, motion.dy[beat], motion.dx[beat]);
    MultiCoilKSpace k(nc, spec.rows, spec.cols);
    for (Index coil = 0; coil < nc; ++coil) {
      ComplexImage weighted(spec.rows, spec.cols);
      for (Index i = 0; i < moved.size(); ++i)
        weighted.data[i] = moved.data[i] * coils.data[coil * moved.size() + i];
      const ComplexImage kc = fft2c(weighted);
      std::copy(kc.data.begin(), kc.data.end(), k.coil_ptr(coil));
    }
    for (Index r = 0; r < spec.rows; ++r) {
      if (!mask.row_sampled(r)) {
        for (Index coil = 0; coil < nc; ++coil)
          for (Index c = 0; c < spec.cols; ++c) k(coil, r, c) = 0.0;
        continue;
      }
      if (noise_free) continue;
      for (Index c = 0; c < spec.cols; ++c) {
        for (Index i = 0; i < nc; ++i) w[i] = rng.cnormal();
        for (Index i = 0; i < nc; ++i) {
          Complex acc = 0;
          for (Index j = 0; j <= i; ++j) acc += Complex(chol_l(i, j)) * w[j];
          n[i] = acc;
        }
        for (Index coil = 0; coil < nc; ++coil) k(coil, r, c) += n[coil];
      }
    }
    return k;
  };

  for (Index pair = 0; pair < n_avg; ++pair) {
    series.k_ir.push_back(acquire(series.truth_ir, 2 * pair));
    series.k_pd.push_back(acquire(series.truth_pd, 2 * pair + 1));
  }
  return series;
}

} // namespace psir::phantom
