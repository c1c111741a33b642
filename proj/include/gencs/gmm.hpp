#pragma once

#include <gencs/generator.hpp>
#include <gencs/types.hpp>

#include <cstdint>
#include <vector>

namespace gencs {

/// Gaussian mixture over the latent space. Covariances are carried as their
/// lower Cholesky factors: the factor is the canonical stored form (density,
/// sampling, and checkpoints all use it), so round-trips are bit-exact.
struct GmmModel {
  Vector weights;                    // K, simplex
  std::vector<Vector> means;         // K vectors of length k
  std::vector<Matrix> chol_factors;  // K lower-triangular k x k, Sigma = L L^T

  Index components() const { return weights.size(); }
  Index dim() const { return means.empty() ? 0 : means.front().size(); }

  Matrix covariance(Index i) const;

  /// Checks simplex weights, shapes, and nonsingular factors.
  void validate() const;
};

/// EM with k-means++ seeding. Log-likelihood is nondecreasing across
/// iterations up to round-off; stops at `tol` relative change or max_iters.
/// A diagonal floor of 1e-6 * trace(Sigma)/k keeps covariances SPD. The
/// per-iteration mean log-likelihoods are appended to ll_trace when given.
GmmModel fit_em(const std::vector<Vector>& latents, Index k_components, std::uint64_t seed,
                Index max_iters = 200, double tol = 1e-8,
                std::vector<double>* ll_trace = nullptr);

/// Mean log-likelihood per point; the quantity EM monotonically improves.
double mean_log_likelihood(const GmmModel& g, const std::vector<Vector>& latents);

/// log p(z) via log-sum-exp over components; stable far from all means.
double log_density(const GmmModel& g, const Vector& z);

/// Gradient of log p(z): responsibility-weighted sum of Sigma_i^{-1}(mu_i - z).
Vector log_density_grad(const GmmModel& g, const Vector& z);

std::vector<Vector> sample(const GmmModel& g, Index n, std::uint64_t seed);

/// Latent sampler drawing sample i from its own derived stream.
LatentSampler gmm_sampler(const GmmModel& g, std::uint64_t seed);

}  // namespace gencs
