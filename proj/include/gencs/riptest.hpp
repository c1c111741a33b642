#pragma once

#include <gencs/coherence.hpp>
#include <gencs/generator.hpp>
#include <gencs/measurement.hpp>
#include <gencs/types.hpp>

#include <cstdint>
#include <vector>

namespace gencs {

/// Pre-ceiling values of the two sample-complexity rates; exposed so the
/// exact mu- and delta-scaling laws can be tested without rounding.
double sample_complexity_recovery_raw(Index k, Index d, Index k_d, double mu, double eps);
double sample_complexity_rip_raw(Index k, Index d, Index k_d, double mu, double delta, double eps);

/// m = ceil(16 mu^2 (2 k d log(2e k_d / k) + log(4 k / eps))), natural log.
Index sample_complexity_recovery(Index k, Index d, Index k_d, double mu, double eps);

/// m = ceil((4 mu^2 / delta^2) (2 k d log(2e k_d / k) + log(4 k / eps)));
/// coincides with the recovery rate at delta = 1/2.
Index sample_complexity_rip(Index k, Index d, Index k_d, double mu, double delta, double eps);

/// Max over the given unit-norm vectors of |(1/m) |SDFx|^2 - |I-hat Fx|^2|.
double rip_deviation(const UnitaryOperator& f, const MeasurementEnsemble& e,
                     const SamplingDistribution& p, const std::vector<Vector>& unit_vectors);

struct RipReport {
  Index m = 0;
  double delta = 0.0;
  Vector trial_max_deviation;
  double failure_fraction = 0.0;
  Index k = 0, d = 0, k_d = 0;
  double mu = 0.0;
  double eps = 0.0;
  std::uint64_t seed = 0;
  Index trials = 0;
  Index diffs_per_trial = 0;
};

/// Empirical check of the isometry property over the generator's difference
/// set: per trial, draws a fresh ensemble at the prescribed m and measures
/// the deviation over sampled normalized differences G(z) - G(z'). The
/// sampled max only lower-bounds the true sup, so the reported failure
/// fraction is a one-sided certificate.
RipReport rip_trial_suite(const UnitaryOperator& f, const GgnModel& model,
                          const SamplingDistribution& p, double delta, double eps, Index trials,
                          Index diffs_per_trial, std::uint64_t seed);

}  // namespace gencs
