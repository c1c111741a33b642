#include <gencs/coherence.hpp>
#include <gencs/fourier.hpp>
#include <gencs/generator.hpp>
#include <gencs/measurement.hpp>
#include <gencs/rng.hpp>
#include <gencs/upscale.hpp>

#include <doctest.h>

#include <Eigen/QR>
#include <cmath>
#include <stdexcept>

using namespace gencs;

namespace {

Matrix random_orthonormal(Index rows, Index cols, std::uint64_t seed) {
  Stream s(seed);
  Matrix g(rows, cols);
  for (Index j = 0; j < cols; ++j) g.col(j) = s.normal_vector(rows);
  const Eigen::HouseholderQR<Matrix> qr(g);
  return Matrix(qr.householderQ()) .leftCols(cols);
}

}  // namespace

TEST_CASE("a coordinate subspace under the identity has indicator coherence") {
  IdentityOperator id(8);
  Matrix b = Matrix::Zero(8, 2);
  b(0, 0) = 1.0;
  b(3, 1) = 1.0;
  const CoherenceProfile prof = subspace_coherence(id, b);
  CHECK(prof.method == CoherenceMethod::ExactSubspace);
  CHECK(prof.subspace_rank == 2);
  for (Index j = 0; j < 8; ++j) {
    const double want = (j == 0 || j == 3) ? 1.0 : 0.0;
    CHECK(prof.alpha[j] == doctest::Approx(want).epsilon(1e-14));
  }
}

TEST_CASE("a Fourier basis vector is maximally incoherent") {
  Dft2 f(1, 4);
  Matrix b = Matrix::Zero(4, 1);
  b(1, 0) = 1.0;
  const CoherenceProfile prof = subspace_coherence(f, b);
  for (Index j = 0; j < 4; ++j) CHECK(prof.alpha[j] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(prof.alpha.squaredNorm() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("coherence energies sum to the subspace rank") {
  Dft2 f(16, 16);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Matrix b = random_orthonormal(256, 8, seed);
    const CoherenceProfile prof = subspace_coherence(f, b);
    CHECK(prof.alpha.squaredNorm() == doctest::Approx(8.0).epsilon(1e-11));
  }
}

TEST_CASE("non-orthonormal bases are rejected") {
  Dft2 f(2, 2);
  Matrix b = Matrix::Zero(4, 1);
  b(0, 0) = 2.0;
  CHECK_THROWS_AS((void)subspace_coherence(f, b), std::invalid_argument);
  CHECK_THROWS_AS((void)subspace_coherence(f, Matrix::Zero(3, 1)), ShapeError);
}

TEST_CASE("a single normalized max-magnitude sample is computed exactly") {
  const GgnModel m = random_ggn(2, {3, 4}, 4, 4, 11);
  UpscaleOperator up(4, 4);
  Dft2 f(4, 4);
  const LatentSampler sampler = gaussian_sampler(2, 31);
  const CoherenceProfile prof = mc_coherence_max_magnitude(f, m, up, sampler, 1, true, 5);
  CHECK(prof.method == CoherenceMethod::McMaxMagnitude);
  CHECK(prof.sample_count == 1);

  const Vector x = forward(m, sampler(0));
  const CVector spec = f.forward_real(x / x.norm());
  for (Index j = 0; j < 16; ++j)
    CHECK(prof.alpha[j] == doctest::Approx(std::abs(spec[j])).epsilon(1e-12));
}

TEST_CASE("the max-magnitude profile grows entrywise with the sample count") {
  const GgnModel m = random_ggn(2, {4, 8}, 8, 8, 2);
  UpscaleOperator up(8, 8);
  Dft2 f(8, 8);
  const LatentSampler sampler = gaussian_sampler(2, 7);
  const CoherenceProfile small = mc_coherence_max_magnitude(f, m, up, sampler, 50, true, 0);
  const CoherenceProfile big = mc_coherence_max_magnitude(f, m, up, sampler, 100, true, 0);
  // Draws are indexed, so the first 50 samples are shared and the max can
  // only move up.
  CHECK((big.alpha.array() >= small.alpha.array() - 1e-15).all());
  CHECK(big.alpha.sum() > small.alpha.sum());
}

TEST_CASE("a constant-range model concentrates all coherence at frequency zero") {
  GgnModel m;
  m.hidden = {Matrix::Identity(2, 2)};
  m.out = Matrix::Zero(16, 2);
  m.out.col(0).setConstant(1.0);
  m.out.col(1).setConstant(-0.5);
  m.grid_rows = 4;
  m.grid_cols = 4;
  UpscaleOperator up(4, 4);
  Dft2 f(4, 4);
  const CoherenceProfile prof =
      mc_coherence_max_magnitude(f, m, up, gaussian_sampler(2, 1), 64, true, 3);
  CHECK(prof.alpha[0] == doctest::Approx(1.0).epsilon(1e-12));
  for (Index j = 1; j < 16; ++j) CHECK(prof.alpha[j] <= 1e-12);
}

TEST_CASE("a batch of two reduces self-difference to a single direction") {
  const GgnModel m = random_ggn(2, {3, 4}, 4, 4, 77);
  UpscaleOperator up(4, 4);
  Dft2 f(4, 4);
  const std::uint64_t seed = 13;
  const CoherenceProfile prof = mc_coherence_self_difference(f, m, up,
                                                             gaussian_sampler(2, seed), 2, 0);
  CHECK(prof.method == CoherenceMethod::McSelfDifference);

  const LatentSampler sampler = gaussian_sampler(2, seed);
  const Vector u0 = forward(m, sampler(0));
  const Vector u1 = forward(m, sampler(1));
  const Vector diff = (u0 - u1) / (u0 - u1).norm();
  const CVector spec = f.forward_real(diff);
  for (Index j = 0; j < 16; ++j)
    CHECK(prof.alpha[j] == doctest::Approx(std::abs(spec[j])).epsilon(1e-10));
}

TEST_CASE("self-difference coherence never exceeds the exact subspace profile") {
  const GgnModel m = random_ggn(2, {4, 8}, 8, 8, 5);
  UpscaleOperator up(8, 8);
  Dft2 f(8, 8);
  const CoherenceProfile exact = subspace_coherence(f, range_subspace_basis(m));
  const CoherenceProfile sd =
      mc_coherence_self_difference(f, m, up, gaussian_sampler(2, 4), 12, 0);
  CHECK((sd.alpha.array() <= exact.alpha.array() + 1e-9).all());
}

TEST_CASE("an all-degenerate batch is an error") {
  GgnModel m;  // zero network: every sample is the zero field
  m.hidden = {Matrix::Zero(2, 2)};
  m.out = Matrix::Zero(16, 2);
  m.grid_rows = 4;
  m.grid_cols = 4;
  UpscaleOperator up(4, 4);
  Dft2 f(4, 4);
  CHECK_THROWS_AS(
      (void)mc_coherence_self_difference(f, m, up, gaussian_sampler(2, 0), 3, 0),
      std::invalid_argument);
}

TEST_CASE("mu against the uniform distribution scales as alpha sqrt(M)") {
  CoherenceProfile prof;
  prof.alpha = Vector::Constant(16, 0.3);
  const SamplingDistribution p = SamplingDistribution::uniform(16);
  CHECK(mu_constant(prof, p) == doctest::Approx(0.3 * 4.0).epsilon(1e-12));

  // Off-support coherence does not enter mu; an empty overlap gives 0.
  Vector w = Vector::Zero(16);
  w[3] = 1.0;
  const SamplingDistribution point = SamplingDistribution::from_weights(w);
  CHECK(mu_constant(prof, point) == doctest::Approx(0.3).epsilon(1e-12));
  CoherenceProfile off;
  off.alpha = Vector::Zero(16);
  off.alpha[5] = 1.0;
  CHECK(mu_constant(off, point) == 0.0);
}

TEST_CASE("admissibility means the support covers all coherent indices") {
  CoherenceProfile prof;
  prof.alpha = Vector::Zero(8);
  prof.alpha[1] = 0.9;
  prof.alpha[4] = 0.4;

  CHECK(is_admissible(prof, SamplingDistribution::uniform(8)));

  Vector w = Vector::Zero(8);
  w[1] = 1.0;
  w[4] = 1.0;
  CHECK(is_admissible(prof, SamplingDistribution::from_weights(w)));

  Vector miss = Vector::Zero(8);
  miss[1] = 1.0;  // leaves index 4 uncovered
  CHECK_FALSE(is_admissible(prof, SamplingDistribution::from_weights(miss)));

  // A generous zero tolerance can declare the leak negligible.
  CHECK(is_admissible(prof, SamplingDistribution::from_weights(miss), 0.5));
}

TEST_CASE("the optimal distribution squares and normalizes the profile") {
  CoherenceProfile prof;
  prof.alpha = Vector::Zero(4);
  prof.alpha[2] = 0.7;
  const SamplingDistribution point = optimal_distribution(prof);
  CHECK(point.p[2] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(point.support_size() == 1);

  prof.alpha = Vector::Constant(4, 0.5);
  const SamplingDistribution flat = optimal_distribution(prof);
  for (Index j = 0; j < 4; ++j) CHECK(flat.p[j] == doctest::Approx(0.25).epsilon(1e-14));

  CoherenceProfile zero;
  zero.alpha = Vector::Zero(4);
  CHECK_THROWS_AS((void)optimal_distribution(zero), std::invalid_argument);
}

TEST_CASE("the optimal distribution minimizes mu and attains |alpha|") {
  Dft2 f(8, 8);
  const Matrix b = random_orthonormal(64, 5, 99);
  const CoherenceProfile prof = subspace_coherence(f, b);
  const SamplingDistribution p_star = optimal_distribution(prof);
  const double mu_star = mu_constant(prof, p_star);
  CHECK(mu_star * mu_star == doctest::Approx(prof.alpha.squaredNorm()).epsilon(1e-12));

  Stream s(1);
  for (int t = 0; t < 10; ++t) {
    // Random fully supported distributions are always admissible.
    Vector w(64);
    for (Index j = 0; j < 64; ++j) w[j] = 0.05 + s.uniform01();
    const SamplingDistribution p = SamplingDistribution::from_weights(w);
    REQUIRE(is_admissible(prof, p));
    CHECK(mu_constant(prof, p) >= mu_star - 1e-12);
  }
}

TEST_CASE("the energy check certifies mu at least one") {
  Dft2 f(4, 4);
  const Matrix b = random_orthonormal(16, 3, 3);
  const CoherenceProfile prof = subspace_coherence(f, b);
  const SamplingDistribution p_star = optimal_distribution(prof);
  CHECK(coherence_energy_check(prof, p_star));
  CHECK(mu_constant(prof, p_star) >= 1.0 - 1e-9);

  // A profile carrying less than unit energy fails the check.
  CoherenceProfile weak;
  weak.alpha = Vector::Constant(16, 0.1);
  CHECK_FALSE(coherence_energy_check(weak, SamplingDistribution::uniform(16)));
}

TEST_CASE("balancing theta vanishes on full support and saturates off it") {
  IdentityOperator id(8);
  Matrix b = Matrix::Zero(8, 1);
  b(0, 0) = 1.0;

  CHECK(balancing_theta(id, b, SamplingDistribution::uniform(8)) <= 1e-12);

  // Support disjoint from the subspace leaves the whole column untouched.
  Vector w = Vector::Zero(8);
  w[5] = 1.0;
  const SamplingDistribution off = SamplingDistribution::from_weights(w);
  CHECK(balancing_theta(id, b, off) == doctest::Approx(1.0).epsilon(1e-12));

  // And in general theta lives in [0, 1].
  Dft2 f(8, 8);
  const Matrix rb = random_orthonormal(64, 4, 12);
  Vector half = Vector::Zero(64);
  half.head(32).setConstant(1.0);
  const double theta =
      balancing_theta(f, rb, SamplingDistribution::from_weights(half));
  CHECK(theta >= 0.0);
  CHECK(theta <= 1.0 + 1e-12);
}
