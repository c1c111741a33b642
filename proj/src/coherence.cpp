#include <gencs/coherence.hpp>

#include <Eigen/SVD>

#include <cmath>
#include <stdexcept>

namespace gencs {

std::string to_string(CoherenceMethod m) {
  switch (m) {
    case CoherenceMethod::ExactSubspace: return "exact-subspace";
    case CoherenceMethod::McMaxMagnitude: return "mc-max-magnitude";
    case CoherenceMethod::McSelfDifference: return "mc-self-difference";
  }
  return "unknown";
}

namespace {

void check_orthonormal(const Matrix& basis) {
  if (basis.rows() == 0 || basis.cols() == 0)
    throw std::invalid_argument("coherence: empty basis");
  const Matrix gram = basis.transpose() * basis;
  const double err = (gram - Matrix::Identity(basis.cols(), basis.cols())).cwiseAbs().maxCoeff();
  if (err > 1e-9) throw std::invalid_argument("coherence: basis is not orthonormal");
}

}  // namespace

CoherenceProfile subspace_coherence(const UnitaryOperator& f, const Matrix& basis) {
  check_orthonormal(basis);
  if (basis.rows() != f.dim()) throw ShapeError("subspace_coherence: basis row count mismatch");
  const CMatrix fb = f.forward_columns(basis);
  CoherenceProfile prof;
  prof.method = CoherenceMethod::ExactSubspace;
  prof.subspace_rank = basis.cols();
  prof.alpha = fb.rowwise().norm();
  return prof;
}

CoherenceProfile mc_coherence_max_magnitude(const UnitaryOperator& f, const GgnModel& model,
                                            const UpscaleOperator& up,
                                            const LatentSampler& sampler, Index n_samples,
                                            bool normalize, std::uint64_t seed) {
  if (n_samples < 1) throw std::invalid_argument("mc_coherence_max_magnitude: need N >= 1");
  if (up.target_dim() != f.dim())
    throw ShapeError("mc_coherence_max_magnitude: operator/upscaler dimension mismatch");
  Vector alpha = Vector::Zero(f.dim());
  for (Index i = 0; i < n_samples; ++i) {
    Vector field = up.apply(forward(model, sampler(static_cast<std::uint64_t>(i))));
    if (normalize) {
      const double norm = field.norm();
      if (norm <= 1e-12) continue;
      field /= norm;
    }
    alpha = alpha.cwiseMax(f.forward_real(field).cwiseAbs());
  }
  CoherenceProfile prof;
  prof.method = CoherenceMethod::McMaxMagnitude;
  prof.sample_count = n_samples;
  prof.seed = seed;
  prof.alpha = std::move(alpha);
  return prof;
}

CoherenceProfile mc_coherence_self_difference(const UnitaryOperator& f, const GgnModel& model,
                                              const UpscaleOperator& up,
                                              const LatentSampler& sampler, Index batch,
                                              std::uint64_t seed) {
  if (batch < 2) throw std::invalid_argument("mc_coherence_self_difference: need batch >= 2");
  if (up.target_dim() != f.dim())
    throw ShapeError("mc_coherence_self_difference: operator/upscaler dimension mismatch");
  std::vector<Vector> fields;
  fields.reserve(batch);
  for (Index i = 0; i < batch; ++i)
    fields.push_back(up.apply(forward(model, sampler(static_cast<std::uint64_t>(i)))));

  Vector alpha = Vector::Zero(f.dim());
  Index used = 0;
  for (Index i = 0; i < batch; ++i) {
    for (Index j = 0; j < batch; ++j) {
      if (i == j) continue;
      Vector diff = fields[i] - fields[j];
      const double norm = diff.norm();
      if (norm <= 1e-12) continue;
      diff /= norm;
      alpha = alpha.cwiseMax(f.forward_real(diff).cwiseAbs());
      ++used;
    }
  }
  if (used == 0)
    throw std::invalid_argument("mc_coherence_self_difference: all pairwise differences degenerate");
  CoherenceProfile prof;
  prof.method = CoherenceMethod::McSelfDifference;
  prof.sample_count = batch;
  prof.seed = seed;
  prof.alpha = std::move(alpha);
  return prof;
}

double mu_constant(const CoherenceProfile& prof, const SamplingDistribution& p) {
  if (prof.alpha.size() != p.dim()) throw ShapeError("mu_constant: length mismatch");
  double mu = 0.0;
  for (Index j = 0; j < p.dim(); ++j) {
    if (p.support[j]) mu = std::max(mu, prof.alpha[j] / std::sqrt(p.p[j]));
  }
  return mu;
}

bool is_admissible(const CoherenceProfile& prof, const SamplingDistribution& p, double zero_tol) {
  if (prof.alpha.size() != p.dim()) throw ShapeError("is_admissible: length mismatch");
  if (zero_tol < 0.0) {
    const double peak = prof.alpha.size() > 0 ? prof.alpha.maxCoeff() : 0.0;
    zero_tol = 1e-12 * peak;
  }
  for (Index j = 0; j < p.dim(); ++j) {
    if (prof.alpha[j] > zero_tol && !p.support[j]) return false;
  }
  return true;
}

SamplingDistribution optimal_distribution(const CoherenceProfile& prof) {
  const double energy = prof.alpha.squaredNorm();
  if (!(energy > 0.0)) throw std::invalid_argument("optimal_distribution: all-zero coherence");
  return SamplingDistribution::from_weights(prof.alpha.array().square());
}

bool coherence_energy_check(const CoherenceProfile& prof, const SamplingDistribution& p) {
  if (prof.alpha.size() != p.dim()) throw ShapeError("coherence_energy_check: length mismatch");
  double energy = 0.0;
  for (Index j = 0; j < p.dim(); ++j) {
    if (p.support[j]) energy += prof.alpha[j] * prof.alpha[j];
  }
  const bool holds = std::sqrt(energy) >= 1.0;
  if (holds && mu_constant(prof, p) < 1.0 - 1e-9)
    throw std::logic_error("coherence_energy_check: energy >= 1 must force mu >= 1");
  return holds;
}

double balancing_theta(const UnitaryOperator& f, const Matrix& basis,
                       const SamplingDistribution& p) {
  check_orthonormal(basis);
  if (basis.rows() != f.dim() || p.dim() != f.dim())
    throw ShapeError("balancing_theta: dimension mismatch");
  const Index off_rows = p.dim() - p.support_size();
  if (off_rows == 0) return 0.0;
  const CMatrix fb = f.forward_columns(basis);
  CMatrix masked(off_rows, basis.cols());
  Index r = 0;
  for (Index j = 0; j < p.dim(); ++j) {
    if (!p.support[j]) masked.row(r++) = fb.row(j);
  }
  Eigen::JacobiSVD<CMatrix> svd(masked);
  const double theta = svd.singularValues().size() > 0 ? svd.singularValues()[0] : 0.0;
  return std::min(theta, 1.0);
}

}  // namespace gencs
