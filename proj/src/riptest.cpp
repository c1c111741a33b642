#include <gencs/riptest.hpp>

#include <gencs/rng.hpp>

#include <cmath>
#include <stdexcept>

namespace gencs {

namespace {

double rate_bracket(Index k, Index d, Index k_d, double eps) {
  if (eps <= 0.0 || eps >= 1.0)
    throw std::invalid_argument("sample complexity: eps must lie in (0,1)");
  return 2.0 * cone_count_log_bound(k, d, k_d) +
         std::log(4.0 * static_cast<double>(k) / eps);
}

void check_mu(double mu) {
  if (mu < 1.0) throw std::invalid_argument("sample complexity: requires mu >= 1");
}

}  // namespace

double sample_complexity_recovery_raw(Index k, Index d, Index k_d, double mu, double eps) {
  check_mu(mu);
  return 16.0 * mu * mu * rate_bracket(k, d, k_d, eps);
}

double sample_complexity_rip_raw(Index k, Index d, Index k_d, double mu, double delta,
                                 double eps) {
  check_mu(mu);
  if (delta <= 0.0 || delta > 1.0)
    throw std::invalid_argument("sample complexity: delta must lie in (0,1]");
  return (4.0 * mu * mu / (delta * delta)) * rate_bracket(k, d, k_d, eps);
}

Index sample_complexity_recovery(Index k, Index d, Index k_d, double mu, double eps) {
  return static_cast<Index>(std::ceil(sample_complexity_recovery_raw(k, d, k_d, mu, eps)));
}

Index sample_complexity_rip(Index k, Index d, Index k_d, double mu, double delta, double eps) {
  return static_cast<Index>(std::ceil(sample_complexity_rip_raw(k, d, k_d, mu, delta, eps)));
}

namespace {

// (1/m) |SDFx|^2 = sum_j count_j / (m p_j) |(Fx)_j|^2: the drawn multiset
// enters only through its index counts.
Vector ensemble_scale(const MeasurementEnsemble& e, const SamplingDistribution& p) {
  Vector scale = Vector::Zero(p.dim());
  for (Index i = 0; i < e.count(); ++i) scale[e.indices[i]] += 1.0;
  const double m = static_cast<double>(e.count());
  for (Index j = 0; j < p.dim(); ++j) {
    if (scale[j] > 0.0) scale[j] /= m * p.p[j];
  }
  return scale;
}

double deviation_of_spectrum(const CVector& spectrum, const Vector& scale,
                             const SamplingDistribution& p) {
  double sampled = 0.0, reference = 0.0;
  for (Index j = 0; j < spectrum.size(); ++j) {
    const double mag2 = std::norm(spectrum[j]);
    sampled += scale[j] * mag2;
    if (p.support[j]) reference += mag2;
  }
  return std::abs(sampled - reference);
}

}  // namespace

double rip_deviation(const UnitaryOperator& f, const MeasurementEnsemble& e,
                     const SamplingDistribution& p, const std::vector<Vector>& unit_vectors) {
  if (unit_vectors.empty()) throw std::invalid_argument("rip_deviation: empty test set");
  const Vector scale = ensemble_scale(e, p);
  double worst = 0.0;
  for (const Vector& x : unit_vectors) {
    if (std::abs(x.norm() - 1.0) > 1e-9)
      throw std::invalid_argument("rip_deviation: test vector is not unit norm");
    worst = std::max(worst, deviation_of_spectrum(f.forward_real(x), scale, p));
  }
  return worst;
}

RipReport rip_trial_suite(const UnitaryOperator& f, const GgnModel& model,
                          const SamplingDistribution& p, double delta, double eps, Index trials,
                          Index diffs_per_trial, std::uint64_t seed) {
  if (trials < 1 || diffs_per_trial < 1)
    throw std::invalid_argument("rip_trial_suite: need trials >= 1 and diffs >= 1");
  if (model.signal_dim() != f.dim())
    throw ShapeError("rip_trial_suite: model/operator dimension mismatch");

  const Matrix basis = range_subspace_basis(model);
  const double mu = mu_constant(subspace_coherence(f, basis), p);
  const Index m = sample_complexity_rip(model.latent_dim(), model.depth(), model.last_width(),
                                        mu, delta, eps);

  // Spectra of differences live in the span of F applied to the columns of
  // the final weight; precomputing that image turns each difference into a
  // small matrix-vector product instead of a transform.
  const CMatrix f_out = f.forward_columns(model.out);
  const Index k = model.latent_dim();

  RipReport report;
  report.m = m;
  report.delta = delta;
  report.k = k;
  report.d = model.depth();
  report.k_d = model.last_width();
  report.mu = mu;
  report.eps = eps;
  report.seed = seed;
  report.trials = trials;
  report.diffs_per_trial = diffs_per_trial;
  report.trial_max_deviation = Vector::Zero(trials);

  auto hidden_activations = [&model](const Vector& z) {
    Vector h = z;
    for (const Matrix& w : model.hidden) h = (w * h).cwiseMax(0.0);
    return h;
  };

  Index failures = 0;
  for (Index t = 0; t < trials; ++t) {
    const MeasurementEnsemble e =
        draw_ensemble(p, m, derive_stream(seed, {0x726970ULL, static_cast<std::uint64_t>(t)}));
    const Vector scale = ensemble_scale(e, p);
    Stream latents(derive_stream(seed, {0x7269707aULL, static_cast<std::uint64_t>(t)}));

    double worst = 0.0;
    Index used = 0;
    for (Index i = 0; i < diffs_per_trial; ++i) {
      const Vector dh =
          hidden_activations(latents.normal_vector(k)) - hidden_activations(latents.normal_vector(k));
      const double norm = (model.out * dh).norm();
      if (norm <= 1e-12) continue;
      const CVector spectrum = (f_out * dh) / norm;
      worst = std::max(worst, deviation_of_spectrum(spectrum, scale, p));
      ++used;
    }
    if (used == 0) throw std::invalid_argument("rip_trial_suite: all sampled differences degenerate");
    report.trial_max_deviation[t] = worst;
    if (worst > delta) ++failures;
  }
  report.failure_fraction = static_cast<double>(failures) / static_cast<double>(trials);
  return report;
}

}  // namespace gencs
