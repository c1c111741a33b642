#pragma once

#include <gencs/fourier.hpp>
#include <gencs/generator.hpp>
#include <gencs/measurement.hpp>
#include <gencs/types.hpp>
#include <gencs/upscale.hpp>

#include <cstdint>
#include <string>

namespace gencs {

enum class CoherenceMethod { ExactSubspace, McMaxMagnitude, McSelfDifference };

std::string to_string(CoherenceMethod m);

/// Per-index local coherences of the model set under a unitary operator,
/// together with how they were obtained.
struct CoherenceProfile {
  Vector alpha;
  CoherenceMethod method = CoherenceMethod::ExactSubspace;
  Index subspace_rank = 0;  // exact-subspace profiles
  Index sample_count = 0;   // Monte-Carlo profiles: N draws or batch size
  std::uint64_t seed = 0;
};

/// Exact coherence of the subspace spanned by an orthonormal basis B:
/// alpha_j is the norm of row j of F B, i.e. the length of the projection
/// of the j-th measurement vector onto span(B). The energies sum to rank(B).
CoherenceProfile subspace_coherence(const UnitaryOperator& f, const Matrix& basis);

/// Entrywise max over N draws of |F(upscale(G(z_i)))|; the estimator used by
/// the adaptive sampling pipeline. With normalize=true each generated field
/// is scaled to unit norm first, making the profile comparable against
/// subspace_coherence.
CoherenceProfile mc_coherence_max_magnitude(const UnitaryOperator& f, const GgnModel& model,
                                            const UpscaleOperator& up,
                                            const LatentSampler& sampler, Index n_samples,
                                            bool normalize = false, std::uint64_t seed = 0);

/// Entrywise max of |F((u_i - u_j)/|u_i - u_j|)| over all ordered pairs of a
/// batch of generated fields; pairs with difference norm <= 1e-12 are
/// skipped, and an all-degenerate batch is an error.
CoherenceProfile mc_coherence_self_difference(const UnitaryOperator& f, const GgnModel& model,
                                              const UpscaleOperator& up,
                                              const LatentSampler& sampler, Index batch,
                                              std::uint64_t seed = 0);

/// Smallest mu with alpha_j <= mu sqrt(p_j) on supp p; 0 when the support
/// carries no coherence.
double mu_constant(const CoherenceProfile& prof, const SamplingDistribution& p);

/// p covers every index of non-negligible coherence. zero_tol < 0 selects
/// the default 1e-12 * max alpha.
bool is_admissible(const CoherenceProfile& prof, const SamplingDistribution& p,
                   double zero_tol = -1.0);

/// p*_j = alpha_j^2 / |alpha|^2, the admissible distribution minimizing mu;
/// mu(F, p*)^2 equals |alpha|^2.
SamplingDistribution optimal_distribution(const CoherenceProfile& prof);

/// True iff the coherence energy on supp p is at least 1; whenever true,
/// mu_constant >= 1 is implied and asserted.
bool coherence_energy_check(const CoherenceProfile& prof, const SamplingDistribution& p);

/// Operator norm of the off-support part of F restricted to span(basis):
/// the largest singular value of (F basis) with the supp-p rows removed.
/// Always in [0, 1] since the columns of F basis are orthonormal.
double balancing_theta(const UnitaryOperator& f, const Matrix& basis,
                       const SamplingDistribution& p);

}  // namespace gencs
