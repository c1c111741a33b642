#include <gencs/coherence.hpp>
#include <gencs/fourier.hpp>
#include <gencs/generator.hpp>
#include <gencs/measurement.hpp>
#include <gencs/riptest.hpp>
#include <gencs/rng.hpp>

#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

using namespace gencs;

TEST_CASE("sample complexities match hand-evaluated values") {
  // 16 * (2*2*2*log(4e) + log(8/0.5)) = 16 * (4 log(4e) + log 16).
  CHECK(sample_complexity_recovery(2, 2, 4, 1.0, 0.5) == 350);
  CHECK(sample_complexity_rip(2, 2, 4, 1.0, 1.0, 0.5) == 88);

  const double raw = 16.0 * (4.0 * std::log(4.0 * std::exp(1.0)) + std::log(16.0));
  CHECK(sample_complexity_recovery_raw(2, 2, 4, 1.0, 0.5) ==
        doctest::Approx(raw).epsilon(1e-14));
}

TEST_CASE("the rip rate at delta one half coincides with the recovery rate") {
  for (Index k : {Index(2), Index(3)})
    for (Index d : {Index(1), Index(3)})
      for (double mu : {1.0, 2.5}) {
        const Index k_d = 4 * k;
        CHECK(sample_complexity_rip(k, d, k_d, mu, 0.5, 0.1) ==
              sample_complexity_recovery(k, d, k_d, mu, 0.1));
      }
}

TEST_CASE("exact scaling laws hold before rounding") {
  const double base = sample_complexity_recovery_raw(2, 2, 4, 1.5, 0.25);
  // Doubling mu quadruples the rate.
  CHECK(sample_complexity_recovery_raw(2, 2, 4, 3.0, 0.25) ==
        doctest::Approx(4.0 * base).epsilon(1e-14));
  // Dividing eps by e adds exactly 16 mu^2.
  const double tighter = sample_complexity_recovery_raw(2, 2, 4, 1.5, 0.25 / std::exp(1.0));
  CHECK(tighter - base == doctest::Approx(16.0 * 1.5 * 1.5).epsilon(1e-12));
  // Halving delta quadruples the rip rate.
  const double rip_base = sample_complexity_rip_raw(2, 2, 4, 1.5, 0.5, 0.25);
  CHECK(sample_complexity_rip_raw(2, 2, 4, 1.5, 0.25, 0.25) ==
        doctest::Approx(4.0 * rip_base).epsilon(1e-14));
}

TEST_CASE("both rates are monotone in every argument") {
  const Index m0 = sample_complexity_recovery(2, 2, 4, 1.0, 0.5);
  CHECK(sample_complexity_recovery(3, 2, 6, 1.0, 0.5) > m0);   // latent dim up
  CHECK(sample_complexity_recovery(2, 3, 4, 1.0, 0.5) > m0);   // depth up
  CHECK(sample_complexity_recovery(2, 2, 8, 1.0, 0.5) > m0);   // width up
  CHECK(sample_complexity_recovery(2, 2, 4, 2.0, 0.5) > m0);   // mu up
  CHECK(sample_complexity_recovery(2, 2, 4, 1.0, 0.1) > m0);   // eps down
  const Index r0 = sample_complexity_rip(2, 2, 4, 1.0, 0.5, 0.5);
  CHECK(sample_complexity_rip(2, 2, 4, 1.0, 0.25, 0.5) > r0);  // delta down
}

TEST_CASE("invalid sample-complexity arguments are rejected") {
  CHECK_THROWS_AS((void)sample_complexity_recovery(2, 2, 4, 0.9, 0.5), std::invalid_argument);
  CHECK_THROWS_AS((void)sample_complexity_recovery(2, 2, 4, 1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS((void)sample_complexity_recovery(2, 2, 4, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS((void)sample_complexity_rip(2, 2, 4, 1.0, 0.0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS((void)sample_complexity_rip(2, 2, 4, 1.0, 1.5, 0.5), std::invalid_argument);
}

TEST_CASE("an ensemble covering every index once has zero deviation") {
  // With p uniform on M = 4 and one draw per index, count_j / (m p_j) = 1
  // for all j: the weighted energy reproduces |Fx|^2 exactly.
  Dft2 f(2, 2);
  const auto p = std::make_shared<const SamplingDistribution>(SamplingDistribution::uniform(4));
  MeasurementEnsemble e;
  e.indices = IndexVector::LinSpaced(4, 0, 3);
  e.weights = Vector::Constant(4, 2.0);  // 1/sqrt(1/4)
  e.source = p;
  Vector x = Vector::Zero(4);
  x[0] = 1.0;
  const double dev = rip_deviation(f, e, *p, {x});
  CHECK(dev <= 1e-14);
}

TEST_CASE("rip deviation is invariant under sign flips of the test vector") {
  Dft2 f(4, 4);
  const SamplingDistribution p = SamplingDistribution::uniform(16);
  const MeasurementEnsemble e = draw_ensemble(p, 8, 3);
  Stream s(9);
  Vector x = s.normal_vector(16);
  x /= x.norm();
  const double dev_pos = rip_deviation(f, e, p, {x});
  const double dev_neg = rip_deviation(f, e, p, {Vector(-x)});
  CHECK(dev_pos == doctest::Approx(dev_neg).epsilon(1e-13));
}

TEST_CASE("rip deviation rejects non-unit vectors and empty test sets") {
  Dft2 f(2, 2);
  const SamplingDistribution p = SamplingDistribution::uniform(4);
  const MeasurementEnsemble e = draw_ensemble(p, 3, 0);
  CHECK_THROWS_AS((void)rip_deviation(f, e, p, {}), std::invalid_argument);
  CHECK_THROWS_AS((void)rip_deviation(f, e, p, {Vector::Constant(4, 1.0)}),
                  std::invalid_argument);
}

TEST_CASE("more measurements concentrate the deviation") {
  Dft2 f(8, 8);
  const GgnModel model = random_ggn(2, {4, 8}, 8, 8, 1);
  const CoherenceProfile prof = subspace_coherence(f, range_subspace_basis(model));
  const SamplingDistribution p = optimal_distribution(prof);

  auto mean_deviation = [&](Index m) {
    const LatentSampler sampler = gaussian_sampler(2, 5);
    double total = 0.0;
    const int trials = 20;
    for (int t = 0; t < trials; ++t) {
      const MeasurementEnsemble e = draw_ensemble(p, m, 100 + static_cast<std::uint64_t>(t));
      std::vector<Vector> diffs;
      for (int q = 0; q < 10; ++q) {
        const Vector u = forward(model, sampler(static_cast<std::uint64_t>(2 * q)));
        const Vector v = forward(model, sampler(static_cast<std::uint64_t>(2 * q + 1)));
        Vector dvec = u - v;
        if (dvec.norm() <= 1e-12) continue;
        diffs.push_back(dvec / dvec.norm());
      }
      total += rip_deviation(f, e, p, diffs);
    }
    return total / trials;
  };

  CHECK(mean_deviation(2000) < mean_deviation(20));
}

TEST_CASE("trial suites are reproducible and respect their parameters") {
  Dft2 f(8, 8);
  const GgnModel model = random_ggn(2, {4, 8}, 8, 8, 1);
  const SamplingDistribution p =
      optimal_distribution(subspace_coherence(f, range_subspace_basis(model)));

  const RipReport a = rip_trial_suite(f, model, p, 0.5, 0.5, 3, 10, 42);
  const RipReport b = rip_trial_suite(f, model, p, 0.5, 0.5, 3, 10, 42);
  CHECK(a.trial_max_deviation == b.trial_max_deviation);
  CHECK(a.failure_fraction == b.failure_fraction);

  CHECK(a.m == sample_complexity_rip(2, 2, 8, mu_constant(
      subspace_coherence(f, range_subspace_basis(model)), p), 0.5, 0.5));
  CHECK(a.trials == 3);
  CHECK(a.diffs_per_trial == 10);
  CHECK(a.trial_max_deviation.size() == 3);
  CHECK(a.k == 2);
  CHECK(a.d == 2);
  CHECK(a.k_d == 8);
  CHECK(a.delta == 0.5);
  CHECK(a.eps == 0.5);
  CHECK(a.seed == 42);
  CHECK((a.trial_max_deviation.array() >= 0.0).all());

  // failure_fraction counts trials whose max deviation exceeds delta.
  const double frac =
      (a.trial_max_deviation.array() > a.delta).cast<double>().mean();
  CHECK(a.failure_fraction == doctest::Approx(frac).epsilon(1e-15));

  CHECK_THROWS_AS((void)rip_trial_suite(f, model, p, 0.5, 0.5, 0, 10, 42),
                  std::invalid_argument);
}
