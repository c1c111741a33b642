#include <gencs/adam.hpp>
#include <gencs/coherence.hpp>
#include <gencs/fourier.hpp>
#include <gencs/generator.hpp>
#include <gencs/gmm.hpp>
#include <gencs/measurement.hpp>
#include <gencs/recovery.hpp>
#include <gencs/riptest.hpp>
#include <gencs/rng.hpp>
#include <gencs/upscale.hpp>

#include <doctest.h>

#include <cmath>
#include <memory>
#include <stdexcept>

using namespace gencs;

namespace {

struct Instance {
  GgnModel model;
  UpscaleOperator up;
  Dft2 f;
  SamplingDistribution p;
};

Instance make_instance(Index grid, std::uint64_t seed) {
  GgnModel model = random_ggn(2, {4, 8}, grid, grid, seed);
  UpscaleOperator up(grid, grid);
  Dft2 f(grid, grid);
  SamplingDistribution p =
      optimal_distribution(subspace_coherence(Dft2(grid, grid), range_subspace_basis(model)));
  return {std::move(model), std::move(up), Dft2(grid, grid), std::move(p)};
}

GmmModel point_prior(const Vector& mean) {
  GmmModel g;
  g.weights = Vector::Ones(1);
  g.means = {mean};
  g.chol_factors = {Matrix::Identity(mean.size(), mean.size()) * 1e-9};
  return g;
}

}  // namespace

TEST_CASE("noiseless measurements of an in-range signal are recovered") {
  const Instance in = make_instance(8, 3);
  const Index m = 96;
  int hits = 0;
  const int runs = 20;
  for (int t = 0; t < runs; ++t) {
    Stream zs(derive_stream(500, {static_cast<std::uint64_t>(t)}));
    const Vector z0 = zs.normal_vector(2);
    const Vector x0 = in.up.apply(forward(in.model, z0));
    if (x0.norm() < 1e-6) continue;
    const MeasurementEnsemble e = draw_ensemble(in.p, m, 1000 + static_cast<std::uint64_t>(t));
    const CVector b = apply_sdf(in.f, e, x0);
    RecoveryConfig cfg;
    cfg.learning_rate = 0.05;
    cfg.iterations = 600;
    cfg.restarts = 3;
    cfg.seed = static_cast<std::uint64_t>(t);
    const RecoveryResult rec = recover(in.model, in.up, in.f, e, b, cfg);
    if ((rec.x_hat - x0).norm() <= 1e-2 * x0.norm()) ++hits;
  }
  // Nonconvex descent with restarts: expect nearly all instances to land.
  CHECK(hits >= 18);
}

TEST_CASE("a zero-weight penalty leaves recovery bitwise unchanged") {
  const Instance in = make_instance(4, 9);
  Stream zs(4);
  const Vector x0 = in.up.apply(forward(in.model, zs.normal_vector(2)));
  const MeasurementEnsemble e = draw_ensemble(in.p, 12, 5);
  const CVector b = apply_sdf(in.f, e, x0);

  GmmModel prior;
  prior.weights = Vector::Ones(1);
  prior.means = {Vector::Constant(2, 50.0)};  // far away: would distort if used
  prior.chol_factors = {Matrix::Identity(2, 2)};

  RecoveryConfig cfg;
  cfg.iterations = 50;
  cfg.seed = 77;
  const RecoveryResult without = recover(in.model, in.up, in.f, e, b, cfg);
  const RecoveryResult with = recover(in.model, in.up, in.f, e, b, cfg, &prior);
  CHECK(without.z_hat == with.z_hat);
  CHECK(without.trajectory == with.trajectory);
  CHECK(without.final_loss == with.final_loss);
}

TEST_CASE("one iteration performs exactly one bias-corrected Adam step") {
  const Instance in = make_instance(4, 13);
  Stream zs(8);
  const Vector x0 = in.up.apply(forward(in.model, zs.normal_vector(2)));
  const MeasurementEnsemble e = draw_ensemble(in.p, 10, 3);
  const CVector b = apply_sdf(in.f, e, x0);

  // A near-degenerate single-component prior pins the initial latent at its
  // mean, making the first step reproducible by hand.
  Vector mean(2);
  mean << 0.8, -0.6;
  const GmmModel prior = point_prior(mean);

  RecoveryConfig cfg;
  cfg.iterations = 1;
  cfg.restarts = 1;
  cfg.lambda = 1e-18;  // engages the prior for initialization only
  cfg.learning_rate = 0.05;
  const RecoveryResult rec = recover(in.model, in.up, in.f, e, b, cfg, &prior);
  REQUIRE(rec.trajectory.size() == 2);

  Vector grad(2);
  (void)recovery_objective(in.model, in.up, in.f, e, b, mean, cfg.lambda, &prior, &grad);
  Vector z = mean;
  AdamState adam(2);
  adam.step(z, grad, AdamParams{cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps});
  CHECK((rec.z_hat - z).norm() <= 1e-6);
  CHECK(rec.restart_index == 0);
  CHECK(rec.eps_hat == 0.0);
}

TEST_CASE("the first Adam step moves by the learning rate elementwise") {
  Vector x(3);
  x << 1.0, 2.0, 3.0;
  Vector g(3);
  g << 0.5, -2.0, 0.0;
  AdamState adam(3);
  adam.step(x, g, AdamParams{0.1, 0.9, 0.999, 1e-8});
  // Bias correction makes the first update lr * g / (|g| + eps).
  CHECK(x[0] == doctest::Approx(1.0 - 0.1 * (0.5 / (0.5 + 1e-8))).epsilon(1e-12));
  CHECK(x[1] == doctest::Approx(2.0 + 0.1 * (2.0 / (2.0 + 1e-8))).epsilon(1e-12));
  CHECK(x[2] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(adam.steps_taken() == 1);
}

TEST_CASE("restarts pick the lowest data fidelity") {
  const Instance in = make_instance(8, 21);
  Stream zs(1);
  const Vector x0 = in.up.apply(forward(in.model, zs.normal_vector(2)));
  const MeasurementEnsemble e = draw_ensemble(in.p, 48, 7);
  const CVector b = apply_sdf(in.f, e, x0);
  RecoveryConfig cfg;
  cfg.iterations = 200;
  cfg.learning_rate = 0.05;
  cfg.restarts = 4;
  cfg.seed = 3;
  const RecoveryResult multi = recover(in.model, in.up, in.f, e, b, cfg);
  // Every single restart, run alone, does at least as badly.
  for (Index r = 0; r < 4; ++r) {
    RecoveryConfig single = cfg;
    single.restarts = r + 1;
    const RecoveryResult upto = recover(in.model, in.up, in.f, e, b, single);
    CHECK(multi.final_loss <= upto.final_loss + 1e-15);
  }
  CHECK(multi.final_loss == doctest::Approx(multi.trajectory.back()).epsilon(1e-15));
}

TEST_CASE("descent lowers the data fidelity from its starting point") {
  const Instance in = make_instance(8, 30);
  Stream zs(2);
  int improved = 0;
  const int runs = 20;
  for (int t = 0; t < runs; ++t) {
    const Vector x0 = in.up.apply(forward(in.model, zs.normal_vector(2)));
    const MeasurementEnsemble e = draw_ensemble(in.p, 32, 50 + static_cast<std::uint64_t>(t));
    const CVector b = apply_sdf(in.f, e, x0);
    RecoveryConfig cfg;
    cfg.iterations = 100;
    cfg.learning_rate = 0.02;
    cfg.seed = static_cast<std::uint64_t>(t);
    const RecoveryResult rec = recover(in.model, in.up, in.f, e, b, cfg);
    if (rec.final_loss <= rec.trajectory.front()) ++improved;
  }
  CHECK(improved >= 19);
}

TEST_CASE("an absurd learning rate raises a divergence error") {
  const Instance in = make_instance(4, 2);
  Stream zs(6);
  const Vector x0 = in.up.apply(forward(in.model, zs.normal_vector(2)));
  const MeasurementEnsemble e = draw_ensemble(in.p, 8, 1);
  const CVector b = apply_sdf(in.f, e, x0);
  RecoveryConfig cfg;
  cfg.learning_rate = 1e200;
  cfg.iterations = 10;
  cfg.seed = 4;
  CHECK_THROWS_AS((void)recover(in.model, in.up, in.f, e, b, cfg), DivergenceError);
}

TEST_CASE("configuration violations are rejected up front") {
  RecoveryConfig cfg;
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = RecoveryConfig{};
  cfg.iterations = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = RecoveryConfig{};
  cfg.restarts = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = RecoveryConfig{};
  cfg.lambda = -1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  // lambda > 0 without a prior is a contract violation, not a silent no-op.
  const Instance in = make_instance(4, 2);
  const MeasurementEnsemble e = draw_ensemble(in.p, 4, 0);
  cfg = RecoveryConfig{};
  cfg.lambda = 0.5;
  CHECK_THROWS_AS((void)recover(in.model, in.up, in.f, e, CVector::Zero(4), cfg),
                  std::invalid_argument);
}

TEST_CASE("recovery objective gradient matches finite differences") {
  const Instance in = make_instance(4, 40);
  Stream zs(3);
  const Vector x0 = in.up.apply(forward(in.model, zs.normal_vector(2)));
  const MeasurementEnsemble e = draw_ensemble(in.p, 10, 2);
  const CVector b = apply_sdf(in.f, e, x0);

  GmmModel prior;
  prior.weights = Vector::Ones(1);
  prior.means = {Vector::Zero(2)};
  prior.chol_factors = {Matrix::Identity(2, 2)};

  const double lambda = 0.3;
  const double h = 1e-6;
  for (int t = 0; t < 5; ++t) {
    const Vector z = zs.normal_vector(2);
    Vector grad(2);
    double fid = 0.0;
    const double val = recovery_objective(in.model, in.up, in.f, e, b, z, lambda, &prior, &grad, &fid);
    CHECK(val == doctest::Approx(fid - lambda * log_density(prior, z)).epsilon(1e-12));
    for (Index i = 0; i < 2; ++i) {
      Vector zp = z, zm = z;
      zp[i] += h;
      zm[i] -= h;
      const double fd = (recovery_objective(in.model, in.up, in.f, e, b, zp, lambda, &prior) -
                         recovery_objective(in.model, in.up, in.f, e, b, zm, lambda, &prior)) /
                        (2 * h);
      CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-4));
    }
  }
}

TEST_CASE("in-range fields project onto themselves") {
  const Instance in = make_instance(8, 50);
  Stream zs(5);
  RecoveryConfig cfg;
  cfg.iterations = 500;
  cfg.learning_rate = 0.05;
  cfg.restarts = 5;
  cfg.seed = 8;
  const Vector x0 = in.up.apply(forward(in.model, zs.normal_vector(2)));
  const auto [proj, resid] = project_onto_range(in.model, in.up, x0, cfg);
  CHECK((proj - x0).norm() <= 1e-4 * x0.norm());
  CHECK((proj + resid - x0).norm() <= 1e-12 * x0.norm());
}

TEST_CASE("the zero field projects to zero") {
  const Instance in = make_instance(4, 51);
  RecoveryConfig cfg;
  cfg.iterations = 400;
  cfg.learning_rate = 0.05;
  cfg.restarts = 2;
  const auto [proj, resid] = project_onto_range(in.model, in.up, Vector::Zero(16), cfg);
  CHECK(proj.norm() <= 1e-4);
  CHECK(resid.norm() <= 1e-4);
}

TEST_CASE("fields orthogonal to the range keep their full residual") {
  // The identity-padded network only reaches the first two coordinates, so
  // a field supported on the dead rows is orthogonal to the whole range.
  GgnModel model;
  model.hidden = {Matrix::Identity(2, 2)};
  model.out = Matrix::Zero(4, 2);
  model.out(0, 0) = 1.0;
  model.out(1, 1) = 1.0;
  model.grid_rows = 2;
  model.grid_cols = 2;
  UpscaleOperator up(2, 2);
  Vector x0 = Vector::Zero(4);
  x0[2] = 3.0;
  x0[3] = -4.0;
  RecoveryConfig cfg;
  cfg.iterations = 300;
  cfg.learning_rate = 0.05;
  cfg.restarts = 2;
  const auto [proj, resid] = project_onto_range(model, up, x0, cfg);
  CHECK(resid.norm() >= x0.norm() * (1.0 - 1e-6));
}

TEST_CASE("bound_rhs evaluates its closed form") {
  Dft2 f(4, 4);
  const SamplingDistribution p = SamplingDistribution::uniform(16);
  const MeasurementEnsemble e = draw_ensemble(p, 8, 0);
  const double root = std::sqrt(2.0 / 8.0);

  CHECK(bound_rhs(f, e, Vector::Zero(16), CVector::Zero(8), 0.0) == 0.0);
  CHECK(bound_rhs(f, e, Vector::Zero(16), CVector::Zero(8), 3.0) ==
        doctest::Approx(root * 3.0).epsilon(1e-14));

  // Noise enters linearly through 2 sqrt(2/m) |eta|.
  CVector eta = CVector::Constant(8, Complex(1.0, 0.0));
  const double one = bound_rhs(f, e, Vector::Zero(16), eta, 0.0);
  CHECK(one == doctest::Approx(root * 2.0 * eta.norm()).epsilon(1e-14));
  CHECK(bound_rhs(f, e, Vector::Zero(16), CVector(5.0 * eta), 0.0) ==
        doctest::Approx(5.0 * one).epsilon(1e-13));

  // The off-range part contributes both directly and through its spectrum.
  Stream s(1);
  const Vector x_perp = s.normal_vector(16);
  const double base = bound_rhs(f, e, x_perp, CVector::Zero(8), 0.0);
  CHECK(base == doctest::Approx(x_perp.norm() +
                                root * 2.0 * apply_sdf(f, e, x_perp).norm()).epsilon(1e-13));

  // A balancing constant of one half doubles the bound.
  CHECK(bound_rhs(f, e, x_perp, CVector::Zero(8), 0.0, 0.5) ==
        doctest::Approx(2.0 * base).epsilon(1e-13));
  CHECK_THROWS_AS((void)bound_rhs(f, e, x_perp, CVector::Zero(8), 0.0, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)bound_rhs(f, e, x_perp, CVector::Zero(8), 0.0, -0.1),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)bound_rhs(f, e, x_perp, CVector::Zero(8), -1.0),
                  std::invalid_argument);
}

TEST_CASE("certificates hold for a well-recovered noiseless instance") {
  const Instance in = make_instance(8, 60);
  Stream zs(9);
  const Vector z0 = zs.normal_vector(2);
  const Vector x0 = in.up.apply(forward(in.model, z0));
  REQUIRE(x0.norm() > 1e-3);
  const Index m = 128;
  const MeasurementEnsemble e = draw_ensemble(in.p, m, 4);
  const CVector eta = CVector::Zero(m);
  const CVector b = apply_sdf(in.f, e, x0);

  RecoveryConfig cfg;
  cfg.iterations = 600;
  cfg.learning_rate = 0.05;
  cfg.restarts = 3;
  cfg.seed = 12;
  const RecoveryResult rec = recover(in.model, in.up, in.f, e, b, cfg);

  const CoherenceProfile prof =
      subspace_coherence(in.f, range_subspace_basis(in.model));
  RecoveryConfig proj_cfg = cfg;
  proj_cfg.seed = 13;
  const Certificate cert =
      certify(rec, x0, in.f, e, eta, in.p, prof, in.model, in.up, proj_cfg);

  CHECK(cert.lhs == doctest::Approx((rec.x_hat - x0).norm()).epsilon(1e-14));
  CHECK(cert.admissible);  // the optimal distribution covers the subspace
  CHECK(cert.holds_general);
  CHECK(cert.holds_admissible);
  CHECK(cert.rhs_admissible <= cert.rhs_general + 1e-14);
  CHECK(cert.eps_hat >= 0.0);
  CHECK(cert.theta >= 0.0);
  if (cert.theta < 1.0) CHECK(cert.rhs_balancing ==
                              doctest::Approx(cert.rhs_admissible / (1.0 - cert.theta))
                                  .epsilon(1e-12));
}

TEST_CASE("overwhelming noise makes every certificate branch trivial") {
  const Instance in = make_instance(4, 61);
  Stream zs(11);
  const Vector x0 = in.up.apply(forward(in.model, zs.normal_vector(2)));
  const MeasurementEnsemble e = draw_ensemble(in.p, 8, 5);
  CVector eta = CVector::Constant(8, Complex(1e6, 0.0));
  const CVector b = apply_sdf(in.f, e, x0) + eta;

  RecoveryConfig cfg;
  cfg.iterations = 50;
  cfg.learning_rate = 0.05;
  cfg.seed = 2;
  const RecoveryResult rec = recover(in.model, in.up, in.f, e, b, cfg);
  const CoherenceProfile prof = subspace_coherence(in.f, range_subspace_basis(in.model));
  const Certificate cert = certify(rec, x0, in.f, e, eta, in.p, prof, in.model, in.up, cfg);
  // The noise term alone dwarfs any reachable deviation.
  CHECK(cert.holds_general);
  CHECK(cert.rhs_general >= 1e5);
}
