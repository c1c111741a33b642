#include <gencs/checks.hpp>

#include <gencs/coherence.hpp>
#include <gencs/darcy.hpp>
#include <gencs/fourier.hpp>
#include <gencs/generator.hpp>
#include <gencs/gmm.hpp>
#include <gencs/measurement.hpp>
#include <gencs/recovery.hpp>
#include <gencs/rng.hpp>
#include <gencs/upscale.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace gencs {

namespace {

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), pattern, a, b, c);
  return buf;
}

Matrix random_orthonormal(Index rows, Index cols, std::uint64_t seed) {
  Stream stream(seed);
  Matrix g(rows, cols);
  for (Index j = 0; j < cols; ++j) g.col(j) = stream.normal_vector(rows);
  Eigen::HouseholderQR<Matrix> qr(g);
  return qr.householderQ() * Matrix::Identity(rows, cols);
}

SamplingDistribution random_full_support(Index m, Stream& stream) {
  Vector w(m);
  for (Index j = 0; j < m; ++j) {
    const double u = stream.uniform01();
    w[j] = 0.02 + u * u * u;  // full support, heavy spread
  }
  return SamplingDistribution::from_weights(w);
}

double relative_gap(const Vector& a, const Vector& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-12});
  return (a - b).norm() / scale;
}

// Smallest |pre-activation| across the hidden layers; finite differencing
// near a ReLU kink would compare one-sided slopes.
double kink_margin(const GgnModel& model, const Vector& z) {
  Vector h = z;
  double margin = std::numeric_limits<double>::infinity();
  for (const Matrix& w : model.hidden) {
    const Vector pre = w * h;
    margin = std::min(margin, pre.cwiseAbs().minCoeff());
    h = pre.cwiseMax(0.0);
  }
  return margin;
}

Vector kink_free_latent(const GgnModel& model, Stream& stream) {
  for (int attempt = 0; attempt < 64; ++attempt) {
    Vector z = stream.normal_vector(model.latent_dim());
    if (kink_margin(model, z) > 1e-4) return z;
  }
  throw std::runtime_error("check_gradient_correctness: no kink-free latent found");
}

}  // namespace

CheckResult check_coherence_energy_identity() {
  const Dft2 f(16, 16);
  const Index r = 8;
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const Matrix basis = random_orthonormal(f.dim(), r, derive_stream(0x636f6831, {s}));
    const CoherenceProfile prof = subspace_coherence(f, basis);
    worst = std::max(worst, std::abs(prof.alpha.squaredNorm() - static_cast<double>(r)));
  }
  CheckResult out;
  out.name = "coherence_energy_identity";
  out.pass = worst <= 1e-9;
  out.detail = fmt("max |sum alpha^2 - r| = %.3g over 50 rank-8 subspaces (M=256)", worst);
  return out;
}

CheckResult check_optimal_distribution() {
  const Dft2 f(16, 16);
  double worst_identity = 0.0;
  double worst_excess = -std::numeric_limits<double>::infinity();
  Stream stream(derive_stream(0x636f6832, {0}));
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Matrix basis = random_orthonormal(f.dim(), 8, derive_stream(0x636f6832, {1, s}));
    const CoherenceProfile prof = subspace_coherence(f, basis);
    const SamplingDistribution p_star = optimal_distribution(prof);
    const double mu_star = mu_constant(prof, p_star);
    worst_identity = std::max(worst_identity,
                              std::abs(mu_star * mu_star - prof.alpha.squaredNorm()));
    for (int trial = 0; trial < 10; ++trial) {
      const SamplingDistribution p = random_full_support(f.dim(), stream);
      worst_excess = std::max(worst_excess, mu_star - mu_constant(prof, p));
    }
  }
  CheckResult out;
  out.name = "optimal_distribution";
  out.pass = worst_identity <= 1e-9 && worst_excess <= 1e-12;
  out.detail = fmt("max |mu(p*)^2 - |alpha|^2| = %.3g; max mu(p*) - mu(p) = %.3g over 200 "
                   "admissible comparisons",
                   worst_identity, worst_excess);
  return out;
}

CheckResult check_admissibility_mu_bound() {
  const Dft2 f(16, 16);
  Stream stream(derive_stream(0x636f6833, {0}));
  double min_mu = std::numeric_limits<double>::infinity();
  for (std::uint64_t s = 0; s < 50; ++s) {
    const Matrix basis = random_orthonormal(f.dim(), 8, derive_stream(0x636f6833, {1, s}));
    const CoherenceProfile prof = subspace_coherence(f, basis);
    const SamplingDistribution p = random_full_support(f.dim(), stream);
    if (!is_admissible(prof, p)) {
      return {"admissibility_mu_bound", false, "constructed distribution not admissible"};
    }
    min_mu = std::min(min_mu, mu_constant(prof, p));
  }

  // Partial supports holding coherence energy >= 1.5: the energy lemma
  // applies even though they are not admissible.
  double min_mu_energy = std::numeric_limits<double>::infinity();
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Matrix basis = random_orthonormal(f.dim(), 8, derive_stream(0x636f6833, {2, s}));
    const CoherenceProfile prof = subspace_coherence(f, basis);
    std::vector<Index> order(f.dim());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](Index a, Index b) { return prof.alpha[a] > prof.alpha[b]; });
    Vector w = Vector::Zero(f.dim());
    double energy = 0.0;
    for (Index j : order) {
      w[j] = 1.0;
      energy += prof.alpha[j] * prof.alpha[j];
      if (energy >= 1.5) break;
    }
    const SamplingDistribution p = SamplingDistribution::from_weights(w);
    if (!coherence_energy_check(prof, p)) {
      return {"admissibility_mu_bound", false, "constructed support misses energy >= 1"};
    }
    min_mu_energy = std::min(min_mu_energy, mu_constant(prof, p));
  }

  CheckResult out;
  out.name = "admissibility_mu_bound";
  out.pass = min_mu >= 1.0 - 1e-9 && min_mu_energy >= 1.0 - 1e-9;
  out.detail = fmt("min mu = %.6f over 50 admissible pairs; min mu = %.6f on 10 "
                   "energy-carrying partial supports",
                   min_mu, min_mu_energy);
  return out;
}

CheckResult check_measurement_unbiasedness() {
  const Dft2 f(16, 16);
  const Index m = 8;
  const Index ensembles = 10000;
  Stream stream(derive_stream(0x756e6269, {0}));
  Vector x = stream.normal_vector(f.dim());
  x /= x.norm();
  const SamplingDistribution p = SamplingDistribution::uniform(f.dim());
  const CVector fx = f.forward_real(x);
  Vector q(f.dim());
  for (Index j = 0; j < f.dim(); ++j) q[j] = std::norm(fx[j]) / p.p[j];

  double total = 0.0;
  for (Index t = 0; t < ensembles; ++t) {
    const MeasurementEnsemble e =
        draw_ensemble(p, m, derive_stream(0x756e6269, {1, static_cast<std::uint64_t>(t)}));
    double acc = 0.0;
    for (Index i = 0; i < m; ++i) acc += q[e.indices[i]];
    total += acc / static_cast<double>(m);
  }
  const double mc_mean = total / static_cast<double>(ensembles);
  CheckResult out;
  out.name = "measurement_unbiasedness";
  out.pass = std::abs(mc_mean - 1.0) <= 0.02;
  out.detail = fmt("mean (1/m)|SDFx|^2 = %.5f over 10^4 ensembles, target |x|^2 = 1 within 2%%",
                   mc_mean);
  return out;
}

CheckResult check_sample_complexity_arithmetic() {
  const Index m_rec = sample_complexity_recovery(2, 2, 4, 1.0, 0.5);
  const Index m_rip = sample_complexity_rip(2, 2, 4, 1.0, 1.0, 0.5);
  const double mu_scale = sample_complexity_recovery_raw(2, 2, 4, 2.0, 0.5) -
                          4.0 * sample_complexity_recovery_raw(2, 2, 4, 1.0, 0.5);
  const double delta_scale = sample_complexity_rip_raw(2, 2, 4, 1.0, 0.5, 0.5) -
                             4.0 * sample_complexity_rip_raw(2, 2, 4, 1.0, 1.0, 0.5);
  CheckResult out;
  out.name = "sample_complexity_arithmetic";
  out.pass = m_rec == 350 && m_rip == 88 && mu_scale == 0.0 && delta_scale == 0.0;
  out.detail = fmt("recovery rate = %.0f (oracle 350), rip rate = %.0f (oracle 88); "
                   "mu/delta quadrupling exact",
                   static_cast<double>(m_rec), static_cast<double>(m_rip));
  return out;
}

CheckResult check_balancing_decay() {
  const Dft2 f(16, 16);
  const GgnModel model = random_ggn(4, {8, 16}, 16, 16, derive_stream(0x62616c31, {0}));
  const Matrix basis = range_subspace_basis(model);
  const Index m_dim = f.dim();
  auto prefix_theta = [&](Index len) {
    Vector w = Vector::Zero(m_dim);
    w.head(len).setOnes();
    return balancing_theta(f, basis, SamplingDistribution::from_weights(w));
  };
  const double t_quarter = prefix_theta(m_dim / 4);
  const double t_half = prefix_theta(m_dim / 2);
  const double t_full = prefix_theta(m_dim);
  CheckResult out;
  out.name = "balancing_decay";
  out.pass = t_full <= 1e-12 && t_half <= t_quarter + 1e-12 && t_half < t_quarter &&
             t_quarter <= 1.0 + 1e-12;
  out.detail = fmt("theta(M/4) = %.4f, theta(M/2) = %.4f, theta(M) = %.3g", t_quarter, t_half,
                   t_full);
  return out;
}

namespace {

double manufactured_error(Index res) {
  const PermeabilityField field = sample_permeability(res, 0.2, 0.0, 1);
  const double h = 1.0 / static_cast<double>(res);
  const double pi = 3.14159265358979323846;
  Matrix f(res, res), exact(res, res);
  for (Index i = 0; i < res; ++i) {
    for (Index j = 0; j < res; ++j) {
      const double x = (static_cast<double>(i) + 0.5) * h;
      const double y = (static_cast<double>(j) + 0.5) * h;
      exact(i, j) = std::sin(pi * x) * std::sin(pi * y);
      f(i, j) = 2.0 * pi * pi * exact(i, j);
    }
  }
  const Matrix u = solve_darcy(field, f);
  return (u - exact).cwiseAbs().maxCoeff();
}

}  // namespace

CheckResult check_darcy_solver() {
  const double e32 = manufactured_error(32);
  const double e64 = manufactured_error(64);
  const double ratio = e32 / e64;

  // Interior fluxes telescope: a field vanishing on the two outer rings has
  // zero total discrete divergence.
  const Index res = 24;
  const PermeabilityField perm = sample_permeability(res, 0.2, 1.0, 5);
  Stream stream(derive_stream(0x64637963, {0}));
  Vector u_vec = Vector::Zero(res * res);
  for (Index i = 2; i < res - 2; ++i)
    for (Index j = 2; j < res - 2; ++j) u_vec[i * res + j] = stream.normal();
  const Vector au = apply_darcy_operator(perm.a, u_vec);
  const double telescoped = std::abs(au.sum()) / std::max(au.cwiseAbs().sum(), 1e-12);

  const PermeabilityField perm2 = sample_permeability(32, 0.2, 1.0, 7);
  const Matrix u_min = solve_darcy(perm2, Matrix::Ones(32, 32));
  const double min_u = u_min.minCoeff();

  CheckResult out;
  out.name = "darcy_solver";
  out.pass = ratio >= 3.5 && ratio <= 4.5 && telescoped <= 1e-9 && min_u >= -1e-10;
  out.detail = fmt("error ratio res32/res64 = %.3f (target [3.5, 4.5]); flux cancellation %.2g; "
                   "min u = %.2g under f >= 0",
                   ratio, telescoped, min_u);
  return out;
}

CheckResult check_gradient_correctness() {
  const GgnModel model = random_ggn(3, {4, 6}, 4, 4, derive_stream(0x67726164, {0}));
  Stream stream(derive_stream(0x67726164, {1}));
  double worst = 0.0;

  // Network forward gradient against <G(z +- h e_i), c>.
  for (int t = 0; t < 17; ++t) {
    const Vector z = kink_free_latent(model, stream);
    const Vector c = stream.normal_vector(model.signal_dim());
    const Vector analytic = forward_grad(model, z, c);
    Vector fd(z.size());
    for (Index i = 0; i < z.size(); ++i) {
      const double h = 1e-5 * std::max(1.0, std::abs(z[i]));
      Vector zp = z, zm = z;
      zp[i] += h;
      zm[i] -= h;
      fd[i] = (c.dot(forward(model, zp)) - c.dot(forward(model, zm))) / (2.0 * h);
    }
    worst = std::max(worst, relative_gap(analytic, fd));
  }

  // Full recovery objective with an active GMM penalty.
  const UpscaleOperator up(4, 8);
  const Dft2 f(8, 8);
  const SamplingDistribution p = SamplingDistribution::uniform(f.dim());
  const MeasurementEnsemble e = draw_ensemble(p, 12, derive_stream(0x67726164, {2}));
  GmmModel prior;
  prior.weights = Vector(2);
  prior.weights << 0.6, 0.4;
  prior.means = {stream.normal_vector(3), stream.normal_vector(3)};
  Matrix l0 = Matrix::Identity(3, 3) * 0.8;
  l0(2, 0) = 0.3;
  Matrix l1 = Matrix::Identity(3, 3) * 1.1;
  l1(1, 0) = -0.2;
  prior.chol_factors = {l0, l1};
  prior.validate();
  const CVector b = apply_sdf(f, e, stream.normal_vector(f.dim()));
  const double lambda = 0.7;
  for (int t = 0; t < 17; ++t) {
    const Vector z = kink_free_latent(model, stream);
    Vector analytic(z.size());
    recovery_objective(model, up, f, e, b, z, lambda, &prior, &analytic);
    Vector fd(z.size());
    for (Index i = 0; i < z.size(); ++i) {
      const double h = 1e-5 * std::max(1.0, std::abs(z[i]));
      Vector zp = z, zm = z;
      zp[i] += h;
      zm[i] -= h;
      fd[i] = (recovery_objective(model, up, f, e, b, zp, lambda, &prior) -
               recovery_objective(model, up, f, e, b, zm, lambda, &prior)) /
              (2.0 * h);
    }
    worst = std::max(worst, relative_gap(analytic, fd));
  }

  // GMM log-density gradient alone.
  for (int t = 0; t < 16; ++t) {
    const Vector z = stream.normal_vector(3) * 1.5;
    const Vector analytic = log_density_grad(prior, z);
    Vector fd(z.size());
    for (Index i = 0; i < z.size(); ++i) {
      const double h = 1e-5 * std::max(1.0, std::abs(z[i]));
      Vector zp = z, zm = z;
      zp[i] += h;
      zm[i] -= h;
      fd[i] = (log_density(prior, zp) - log_density(prior, zm)) / (2.0 * h);
    }
    worst = std::max(worst, relative_gap(analytic, fd));
  }

  CheckResult out;
  out.name = "gradient_correctness";
  out.pass = worst <= 1e-5;
  out.detail = fmt("max relative gap to central differences = %.3g over 50 instances", worst);
  return out;
}

TrendCheck rip_concentration(const RipReport& rip, double margin) {
  TrendCheck out;
  out.pass = rip.failure_fraction <= rip.eps + margin;
  out.detail = fmt("failure fraction %.4f <= eps %.2f + %.2f margin", rip.failure_fraction,
                   rip.eps, margin);
  return out;
}

}  // namespace gencs
