#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "psir/fft.hpp"
#include "psir/phantom.hpp"
#include "psir/recon.hpp"
#include "psir/rng.hpp"

#include <cmath>
#include <numbers>

using namespace psir;
using namespace psir::phantom;

TEST_CASE("ir_signal null point, recovery limits, and preconditions") {
  const double ln2 = std::numbers::ln2;
  CHECK(ir_signal(400.0, 400.0 * ln2, 1.0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(ir_signal(400.0, 1e9, 1.0) == doctest::Approx(1.0));
  CHECK(ir_signal(400.0, 1e-12, 1.0) == doctest::Approx(-1.0));
  CHECK(ir_signal(300.0, 200.0, 0.0) == 0.0);
  CHECK_THROWS_AS(ir_signal(0.0, 100.0, 1.0), ValueError);
  CHECK_THROWS_AS(ir_signal(-5.0, 100.0, 1.0), ValueError);
  CHECK_THROWS_AS(ir_signal(100.0, 0.0, 1.0), ValueError);
  CHECK_THROWS_AS(ir_signal(100.0, 100.0, -0.1), ValueError);
}

TEST_CASE("render_phantom: full-field region at the null point gives zero IR") {
  PhantomSpec spec;
  spec.rows = 32;
  spec.cols = 32;
  spec.ti_msec = 500.0 * std::numbers::ln2;
  spec.tissues = {{"only", {500.0, 1.0}}};
  spec.regions = {{0.5, 0.5, 10.0, 10.0, 0.0, "only"}}; // covers everything
  auto [ir, pd] = render_phantom(spec);
  for (const auto& v : ir.data) CHECK(std::abs(v) < 1e-12);
  for (const auto& v : pd.data) CHECK(std::abs(v) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("render_phantom: empty region list rejected") {
  PhantomSpec spec;
  spec.tissues = {{"t", {300.0, 1.0}}};
  CHECK_THROWS_AS(render_phantom(spec), ValueError);
}

TEST_CASE("render_phantom: overlapping lesion pixels take the lesion tissue") {
  // annulus (myocardium over blood) with a lesion ellipse on the ring,
  // verified per pixel with an independent point-in-ellipse check
  PhantomSpec spec;
  spec.rows = 48;
  spec.cols = 48;
  spec.ti_msec = 310.0;
  spec.phase_amplitude = 0.0;
  spec.tissues = {{"body", {800.0, 0.5}},
                  {"myo", {450.0, 0.8}},
                  {"blood", {320.0, 0.9}},
                  {"scar", {280.0, 1.0}}};
  spec.regions = {{0.5, 0.5, 0.45, 0.45, 0.0, "body"},
                  {0.5, 0.5, 0.3, 0.3, 0.0, "myo"},
                  {0.5, 0.5, 0.2, 0.2, 0.0, "blood"},
                  {0.5, 0.25 + 0.5, 0.06, 0.08, 0.3, "scar"}};
  auto [ir, pd] = render_phantom(spec);

  auto inside = [&](const Region& reg, Index r, Index c) {
    const double y = (r - reg.center_row * spec.rows) / (reg.semi_row * spec.rows);
    const double x = (c - reg.center_col * spec.cols) / (reg.semi_col * spec.cols);
    const double u = std::cos(reg.rotation) * x + std::sin(reg.rotation) * y;
    const double v = -std::sin(reg.rotation) * x + std::cos(reg.rotation) * y;
    return u * u + v * v <= 1.0;
  };
  int scar_pixels = 0;
  for (Index r = 0; r < spec.rows; ++r)
    for (Index c = 0; c < spec.cols; ++c) {
      std::string expect;
      for (const auto& reg : spec.regions)
        if (inside(reg, r, c)) expect = reg.tissue;
      const double expect_pd = expect.empty() ? 0.0 : spec.tissue(expect).proton_density;
      CHECK(pd(r, c).real() == doctest::Approx(expect_pd).epsilon(1e-12));
      if (expect == "scar") ++scar_pixels;
    }
  CHECK(scar_pixels > 10); // the lesion actually lands in the grid
}

TEST_CASE("simulate_coil_maps: unit RSS, single-coil magnitude, determinism") {
  const auto maps = simulate_coil_maps(6, 24, 20, 9);
  for (Index r = 0; r < 24; ++r)
    for (Index c = 0; c < 20; ++c) {
      double rss = 0;
      for (Index coil = 0; coil < 6; ++coil) rss += std::norm(maps(coil, r, c));
      CHECK(std::sqrt(rss) == doctest::Approx(1.0).epsilon(1e-9));
    }

  const auto single = simulate_coil_maps(1, 16, 16, 2);
  for (const auto& v : single.data)
    CHECK(std::abs(v) == doctest::Approx(1.0).epsilon(1e-9));

  const auto again = simulate_coil_maps(6, 24, 20, 9);
  CHECK(maps.data == again.data);
  CHECK_THROWS_AS(simulate_coil_maps(0, 8, 8, 1), ValueError);
}

TEST_CASE("simulate_series: lossless chain with no motion, noise, or undersampling") {
  PhantomSpec spec = PhantomSpec::cardiac_default(32, 32, 3);
  const auto maps = simulate_coil_maps(1, 32, 32, 3);
  const auto mask = SamplingMask::uniform(32, 1, 16);
  const auto motion = MotionTrace::none(2);
  const auto series = simulate_series(spec, maps, mask, motion,
                                      correlated_covariance(1, 0.0, 0.0), 1, 3);

  // single coil with |s| == 1: conj(s) * ifft2c(k) reproduces the truth
  const ComplexImage img = ifft2c([&] {
    ComplexImage k(32, 32);
    std::copy(series.k_ir[0].coil_ptr(0), series.k_ir[0].coil_ptr(0) + 32 * 32,
              k.data.begin());
    return k;
  }());
  double err = 0, ref = 0;
  for (Index i = 0; i < img.size(); ++i) {
    err += std::norm(img.data[i] * std::conj(maps.data[i]) - series.truth_ir.data[i]);
    ref += std::norm(series.truth_ir.data[i]);
  }
  CHECK(std::sqrt(err / ref) < 1e-10);
}

TEST_CASE("simulate_series: unsampled rows are exactly zero") {
  PhantomSpec spec = PhantomSpec::cardiac_default(32, 32, 4);
  const auto maps = simulate_coil_maps(3, 32, 32, 4);
  const auto mask = SamplingMask::uniform(32, 2, 8);
  const auto series = simulate_series(spec, maps, mask, MotionTrace::none(4),
                                      correlated_covariance(3, 0.0, 0.0), 2, 4);
  for (Index pair = 0; pair < 2; ++pair)
    for (Index r = 0; r < 32; ++r) {
      if (mask.row_sampled(r)) continue;
      for (Index coil = 0; coil < 3; ++coil)
        for (Index c = 0; c < 32; ++c) {
          CHECK(series.k_ir[pair](coil, r, c) == Complex(0.0, 0.0));
          CHECK(series.k_pd[pair](coil, r, c) == Complex(0.0, 0.0));
        }
    }
}

TEST_CASE("simulate_series: noise variance and covariance match the request") {
  PhantomSpec spec = PhantomSpec::cardiac_default(64, 64, 5);
  const Index nc = 4;
  const auto maps = simulate_coil_maps(nc, 64, 64, 5);
  const auto mask = SamplingMask::uniform(64, 1, 32);
  const double sigma = 0.05;

  SUBCASE("diagonal covariance: per-coil variance within 5%") {
    const auto cov = correlated_covariance(nc, sigma, 0.0);
    const auto clean = simulate_series(spec, maps, mask, MotionTrace::none(16),
                                       correlated_covariance(nc, 0.0, 0.0), 8, 6);
    const auto noisy =
        simulate_series(spec, maps, mask, MotionTrace::none(16), cov, 8, 6);
    // >= 1e5 samples per coil: 8 pairs x 2 channels x 64x64
    for (Index coil = 0; coil < nc; ++coil) {
      double acc = 0;
      Index n = 0;
      for (Index pair = 0; pair < 8; ++pair)
        for (int ch = 0; ch < 2; ++ch) {
          const auto& nk = ch == 0 ? noisy.k_ir[pair] : noisy.k_pd[pair];
          const auto& ck = ch == 0 ? clean.k_ir[pair] : clean.k_pd[pair];
          for (Index i = 0; i < 64 * 64; ++i) {
            acc += std::norm(nk.coil_ptr(coil)[i] - ck.coil_ptr(coil)[i]);
            ++n;
          }
        }
      CHECK(acc / n == doctest::Approx(sigma * sigma).epsilon(0.05));
    }
  }

  SUBCASE("correlated covariance: sample covariance within 5% Frobenius") {
    const double rho = 0.3;
    const auto cov = correlated_covariance(nc, sigma, rho);
    const auto clean = simulate_series(spec, maps, mask, MotionTrace::none(16),
                                       correlated_covariance(nc, 0.0, 0.0), 8, 7);
    const auto noisy =
        simulate_series(spec, maps, mask, MotionTrace::none(16), cov, 8, 7);
    std::vector<Complex> sum(nc * nc, 0.0);
    Index n = 0;
    for (Index pair = 0; pair < 8; ++pair)
      for (int ch = 0; ch < 2; ++ch) {
        const auto& nk = ch == 0 ? noisy.k_ir[pair] : noisy.k_pd[pair];
        const auto& ck = ch == 0 ? clean.k_ir[pair] : clean.k_pd[pair];
        for (Index i = 0; i < 64 * 64; ++i) {
          for (Index a = 0; a < nc; ++a)
            for (Index b = 0; b < nc; ++b)
              sum[a * nc + b] += (nk.coil_ptr(a)[i] - ck.coil_ptr(a)[i]) *
                                 std::conj(nk.coil_ptr(b)[i] - ck.coil_ptr(b)[i]);
          ++n;
        }
      }
    double frob_err = 0, frob_ref = 0;
    for (Index a = 0; a < nc; ++a)
      for (Index b = 0; b < nc; ++b) {
        const Complex est = sum[a * nc + b] / double(n);
        frob_err += std::norm(est - cov(a, b));
        frob_ref += std::norm(cov(a, b));
      }
    CHECK(std::sqrt(frob_err / frob_ref) < 0.05);
  }
}

TEST_CASE("simulate_series: deterministic for a fixed seed") {
  PhantomSpec spec = PhantomSpec::cardiac_default(24, 24, 8);
  const auto maps = simulate_coil_maps(2, 24, 24, 8);
  const auto mask = SamplingMask::uniform(24, 2, 8);
  const auto motion = MotionTrace::sinusoidal(4, 2.0, 6.0, 8);
  const auto cov = correlated_covariance(2, 0.01, 0.1);
  const auto s1 = simulate_series(spec, maps, mask, motion, cov, 2, 42);
  const auto s2 = simulate_series(spec, maps, mask, motion, cov, 2, 42);
  for (Index pair = 0; pair < 2; ++pair) {
    CHECK(s1.k_ir[pair].data == s2.k_ir[pair].data);
    CHECK(s1.k_pd[pair].data == s2.k_pd[pair].data);
  }
}

TEST_CASE("simulate_series: rejects bad inputs") {
  PhantomSpec spec = PhantomSpec::cardiac_default(16, 16, 1);
  const auto maps = simulate_coil_maps(2, 16, 16, 1);
  const auto mask = SamplingMask::uniform(16, 1, 8);
  const auto cov = correlated_covariance(2, 0.01, 0.1);

  CHECK_THROWS_AS(simulate_series(spec, maps, mask, MotionTrace::none(1), cov, 1, 1),
                  ValueError); // 1 beat < 2*n_avg
  const auto wrong_maps = simulate_coil_maps(2, 8, 8, 1);
  CHECK_THROWS_AS(
      simulate_series(spec, wrong_maps, mask, MotionTrace::none(2), cov, 1, 1),
      DimensionError);

  NoiseCovariance bad(2);
  bad(0, 0) = 1.0;
  bad(1, 1) = -1.0; // negative eigenvalue
  CHECK_THROWS_AS(simulate_series(spec, maps, mask, MotionTrace::none(2), bad, 1, 1),
                  ValueError);
}

TEST_CASE("adjoint of fully sampled single-coil data reproduces the truth") {
  PhantomSpec spec = PhantomSpec::cardiac_default(40, 40, 12);
  const auto maps = simulate_coil_maps(1, 40, 40, 12);
  const auto mask = SamplingMask::uniform(40, 1, 20);
  const auto series = simulate_series(spec, maps, mask, MotionTrace::none(2),
                                      correlated_covariance(1, 0.0, 0.0), 1, 12);
  const recon::EncodingOperator op(maps, mask);
  const ComplexImage rec = recon::adjoint(series.k_ir[0], op);
  double err = 0, ref = 0;
  for (Index i = 0; i < rec.size(); ++i) {
    err += std::norm(rec.data[i] - series.truth_ir.data[i]);
    ref += std::norm(series.truth_ir.data[i]);
  }
  CHECK(std::sqrt(err / ref) < 1e-9);
}

TEST_CASE("phantom spec text round trip") {
  const PhantomSpec spec = PhantomSpec::cardiac_default(48, 64, 11);
  const PhantomSpec back = PhantomSpec::from_text(spec.to_text());
  CHECK(back.rows == spec.rows);
  CHECK(back.cols == spec.cols);
  CHECK(back.ti_msec == doctest::Approx(spec.ti_msec).epsilon(1e-15));
  REQUIRE(back.regions.size() == spec.regions.size());
  for (std::size_t i = 0; i < spec.regions.size(); ++i) {
    CHECK(back.regions[i].tissue == spec.regions[i].tissue);
    CHECK(back.regions[i].semi_row == doctest::Approx(spec.regions[i].semi_row));
  }
  auto [ir1, pd1] = render_phantom(spec);
  auto [ir2, pd2] = render_phantom(back);
  CHECK(ir1.data == ir2.data);
}
