#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "psir/rng.hpp"
#include "psir/train.hpp"

#include <cmath>
#include <filesystem>

using namespace psir;
using namespace psir::train;

namespace {

// small, fast synthetic dataset used by the optimizer tests
std::pair<Dataset, Dataset> tiny_dataset(const recon::ReconParams& moco_params) {
  SyntheticDatasetConfig cfg;
  cfg.rows = 40;
  cfg.cols = 40;
  cfg.coils = 2;
  cfg.accel = 2;
  cfg.acs_lines = 12;
  cfg.n_avg = 4;
  cfg.noise_sigma = 2e-3;
  cfg.n_train = 2;
  cfg.n_val = 1;
  cfg.seed = 3;
  return build_synthetic_dataset(cfg, moco_params);
}

recon::ReconParams small_reference() {
  recon::ReconParams p;
  p.steps = recon::StepSchedule::constant(3, 0.5);
  p.refinement.kind = recon::RefinementKind::GaussianResidual;
  p.refinement.scalar = 0.0;
  p.refinement.sigma = 2.0;
  return p;
}

} // namespace

TEST_CASE("pack/unpack is a bijection for every refinement kind") {
  for (auto kind : {recon::RefinementKind::None, recon::RefinementKind::Tikhonov,
                    recon::RefinementKind::GaussianResidual}) {
    recon::ReconParams p;
    p.steps = recon::StepSchedule::constant(4, 0.5);
    p.steps.lambda_ir[2] = 0.9;
    p.steps.lambda_pd[0] = -0.2;
    p.refinement.kind = kind;
    p.refinement.scalar = 0.15;

    const TrainableParams packed = pack(p);
    CHECK(packed.values.size() == 9); // 2*4 + 1
    const recon::ReconParams back = unpack(packed, p);
    CHECK(back.steps.lambda_ir == p.steps.lambda_ir);
    CHECK(back.steps.lambda_pd == p.steps.lambda_pd);
    CHECK(back.refinement.scalar == p.refinement.scalar);
    CHECK(back.refinement.kind == kind);
    CHECK(pack(back).values == packed.values);
  }

  recon::ReconParams ref;
  ref.steps = recon::StepSchedule::constant(4, 0.5);
  CHECK_THROWS_AS(unpack(TrainableParams{{1.0, 2.0}}, ref), ValueError);
}

TEST_CASE("fd_gradient: quadratic analytic check with Richardson ratio") {
  const std::vector<double> center{0.3, -0.7, 1.2};
  auto f = [&](const std::vector<double>& p) {
    double acc = 0;
    for (std::size_t i = 0; i < p.size(); ++i)
      acc -= (p[i] - center[i]) * (p[i] - center[i]);
    return acc;
  };
  const std::vector<double> p{1.0, 1.0, 1.0};
  const auto g = fd_gradient(f, p, 1e-3);
  for (std::size_t i = 0; i < p.size(); ++i)
    CHECK(g[i] == doctest::Approx(-2.0 * (p[i] - center[i])).epsilon(1e-9));

  // second-order convergence on a quartic: error drops ~100x from h to h/10
  auto quartic = [](const std::vector<double>& p) {
    return p[0] * p[0] * p[0] * p[0];
  };
  const std::vector<double> q{1.3};
  const double exact = 4.0 * 1.3 * 1.3 * 1.3;
  const double err_coarse = std::abs(fd_gradient(quartic, q, 1e-2)[0] - exact);
  const double err_fine = std::abs(fd_gradient(quartic, q, 1e-3)[0] - exact);
  CHECK(err_fine < err_coarse / 50.0);

  CHECK_THROWS_AS(fd_gradient(f, p, 0.0), ValueError);
}

TEST_CASE("training objective and optimizer on a tiny dataset") {
  const recon::ReconParams moco_params;
  auto [train_ds, val_ds] = tiny_dataset(moco_params);
  const recon::ReconParams reference = small_reference();
  const TrainableParams initial = pack(reference);

  SUBCASE("objective is deterministic and finite") {
    const auto a = objective(initial, reference, train_ds);
    const auto b = objective(initial, reference, train_ds);
    CHECK(a.mean_ssim == b.mean_ssim);
    CHECK(std::isfinite(a.mean_ssim));
    CHECK(a.diverged_cases == 0);
    CHECK(a.mean_ssim > 0.3);
    CHECK(a.mean_ssim < 1.0);
  }

  SUBCASE("zero-influence refinement scalar has zero gradient when kind is none") {
    recon::ReconParams none_ref = reference;
    none_ref.refinement.kind = recon::RefinementKind::None;
    const auto g = fd_gradient(pack(none_ref), none_ref, train_ds, 1e-3);
    CHECK(g.back() == 0.0); // the packed scalar slot is inert for kind none
    // and lambda entries do influence the objective
    double lambda_mag = 0;
    for (std::size_t i = 0; i + 1 < g.size(); ++i) lambda_mag += std::abs(g[i]);
    CHECK(lambda_mag > 0.0);
  }

  SUBCASE("steps=0 returns the initial checkpoint") {
    TrainConfig cfg;
    cfg.steps = 0;
    const TrainRun run = optimize(initial, reference, train_ds, val_ds, cfg);
    REQUIRE(run.history.size() == 1);
    CHECK(run.selected == 0);
    CHECK(run.best().params.values == initial.values);
  }

  SUBCASE("a few steps improve the train objective; runs are bit-identical") {
    TrainConfig cfg;
    cfg.steps = 3;
    cfg.eval_every = 1;
    cfg.lr = 0.15;
    const TrainRun run1 = optimize(initial, reference, train_ds, val_ds, cfg);
    const TrainRun run2 = optimize(initial, reference, train_ds, val_ds, cfg);

    REQUIRE(run1.history.size() == 4);
    CHECK(run1.history.back().train_objective >=
          run1.history.front().train_objective);

    REQUIRE(run1.history.size() == run2.history.size());
    for (std::size_t i = 0; i < run1.history.size(); ++i) {
      CHECK(run1.history[i].params.values == run2.history[i].params.values);
      CHECK(run1.history[i].train_objective == run2.history[i].train_objective);
      CHECK(run1.history[i].val_objective == run2.history[i].val_objective);
    }

    // selected checkpoint dominates every recorded validation value
    for (const auto& ck : run1.history)
      CHECK(run1.best().val_objective >= ck.val_objective);

    const std::string csv = run1.log_csv();
    CHECK(csv.rfind("step,train_ssim,val_ssim", 0) == 0);
  }
}

TEST_CASE("optimize enforces patient-level split disjointness") {
  const recon::ReconParams moco_params;
  auto [train_ds, val_ds] = tiny_dataset(moco_params);
  const recon::ReconParams reference = small_reference();

  Dataset overlapping_val = val_ds;
  overlapping_val.push_back(train_ds[0]); // same patient id in both splits
  TrainConfig cfg;
  cfg.steps = 0;
  CHECK_THROWS_AS(
      optimize(pack(reference), reference, train_ds, overlapping_val, cfg),
      ValueError);
}

TEST_CASE("params checkpoint files round trip through the key-value format") {
  const recon::ReconParams reference = small_reference();
  TrainableParams p = pack(reference);
  p.values[0] = 0.77;
  p.values.back() = 0.12;

  const auto path = std::filesystem::temp_directory_path() / "psir_ckpt.txt";
  save_params(path, p, reference);
  const TrainableParams back = load_params(path, reference);
  REQUIRE(back.values.size() == p.values.size());
  for (std::size_t i = 0; i < p.values.size(); ++i)
    CHECK(back.values[i] == doctest::Approx(p.values[i]).epsilon(1e-15));
}
