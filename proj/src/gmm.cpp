#include <gencs/gmm.hpp>

#include <gencs/rng.hpp>

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace gencs {

Matrix GmmModel::covariance(Index i) const {
  const Matrix& l = chol_factors.at(static_cast<std::size_t>(i));
  return l * l.transpose();
}

void GmmModel::validate() const {
  const Index k_comp = components();
  if (k_comp < 1) throw std::invalid_argument("GmmModel: no components");
  if ((weights.array() < 0.0).any()) throw std::invalid_argument("GmmModel: negative weight");
  if (std::abs(weights.sum() - 1.0) > 1e-12)
    throw std::invalid_argument("GmmModel: weights must sum to 1");
  if (static_cast<Index>(means.size()) != k_comp ||
      static_cast<Index>(chol_factors.size()) != k_comp)
    throw ShapeError("GmmModel: component count mismatch");
  const Index k = dim();
  for (Index i = 0; i < k_comp; ++i) {
    if (means[i].size() != k) throw ShapeError("GmmModel: mean length mismatch");
    const Matrix& l = chol_factors[i];
    if (l.rows() != k || l.cols() != k) throw ShapeError("GmmModel: factor shape mismatch");
    for (Index j = 0; j < k; ++j)
      if (!(l(j, j) > 0.0)) throw std::invalid_argument("GmmModel: singular covariance factor");
  }
}

namespace {

// log N(z | mu, L L^T) through the stored factor.
double gaussian_log_density(const Vector& z, const Vector& mu, const Matrix& l) {
  const Index k = z.size();
  const Vector u = l.template triangularView<Eigen::Lower>().solve(z - mu);
  double log_det_l = 0.0;
  for (Index j = 0; j < k; ++j) log_det_l += std::log(l(j, j));
  return -0.5 * static_cast<double>(k) * std::log(2.0 * std::numbers::pi) - log_det_l -
         0.5 * u.squaredNorm();
}

// Component log-joints log(pi_i) + log N_i(z); -inf rows for zero weights.
Vector component_log_joint(const GmmModel& g, const Vector& z) {
  Vector lj(g.components());
  for (Index i = 0; i < g.components(); ++i) {
    lj[i] = g.weights[i] > 0.0
                ? std::log(g.weights[i]) + gaussian_log_density(z, g.means[i], g.chol_factors[i])
                : -std::numeric_limits<double>::infinity();
  }
  return lj;
}

double log_sum_exp(const Vector& v) {
  const double peak = v.maxCoeff();
  if (!std::isfinite(peak)) return peak;
  double acc = 0.0;
  for (Index i = 0; i < v.size(); ++i) acc += std::exp(v[i] - peak);
  return peak + std::log(acc);
}

}  // namespace

double log_density(const GmmModel& g, const Vector& z) {
  if (z.size() != g.dim()) throw ShapeError("log_density: latent length mismatch");
  return log_sum_exp(component_log_joint(g, z));
}

Vector log_density_grad(const GmmModel& g, const Vector& z) {
  if (z.size() != g.dim()) throw ShapeError("log_density_grad: latent length mismatch");
  const Vector lj = component_log_joint(g, z);
  const double lp = log_sum_exp(lj);
  Vector grad = Vector::Zero(z.size());
  for (Index i = 0; i < g.components(); ++i) {
    if (!(g.weights[i] > 0.0)) continue;
    const double resp = std::exp(lj[i] - lp);
    const Matrix& l = g.chol_factors[i];
    Vector v = l.template triangularView<Eigen::Lower>().solve(g.means[i] - z);
    v = l.transpose().template triangularView<Eigen::Upper>().solve(v);
    grad += resp * v;
  }
  return grad;
}

std::vector<Vector> sample(const GmmModel& g, Index n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample: need n >= 1");
  const Vector cdf = cumulative_distribution(g.weights);
  std::vector<Vector> out;
  out.reserve(n);
  for (Index i = 0; i < n; ++i) {
    Stream stream(derive_stream(seed, {0x676d6dULL, static_cast<std::uint64_t>(i)}));
    Index comp = stream.discrete_from_cdf(cdf);
    while (comp > 0 && !(g.weights[comp] > 0.0)) --comp;
    out.push_back(g.means[comp] + g.chol_factors[comp] * stream.normal_vector(g.dim()));
  }
  return out;
}

LatentSampler gmm_sampler(const GmmModel& g, std::uint64_t seed) {
  const Vector cdf = cumulative_distribution(g.weights);
  return [g, cdf, seed](std::uint64_t i) {
    Stream stream(derive_stream(seed, {0x676d6dULL, i}));
    Index comp = stream.discrete_from_cdf(cdf);
    while (comp > 0 && !(g.weights[comp] > 0.0)) --comp;
    return Vector(g.means[comp] + g.chol_factors[comp] * stream.normal_vector(g.dim()));
  };
}

double mean_log_likelihood(const GmmModel& g, const std::vector<Vector>& latents) {
  if (latents.empty()) throw std::invalid_argument("mean_log_likelihood: empty data");
  double acc = 0.0;
  for (const Vector& z : latents) acc += log_density(g, z);
  return acc / static_cast<double>(latents.size());
}

namespace {

std::vector<Index> kmeanspp_seeds(const std::vector<Vector>& data, Index k_components,
                                  Stream& stream) {
  const Index n = static_cast<Index>(data.size());
  std::vector<Index> centers;
  centers.push_back(std::min<Index>(static_cast<Index>(stream.uniform01() * n), n - 1));
  Vector min_dist2(n);
  for (Index i = 0; i < n; ++i) min_dist2[i] = (data[i] - data[centers[0]]).squaredNorm();
  while (static_cast<Index>(centers.size()) < k_components) {
    const double total = min_dist2.sum();
    if (!(total > 0.0))
      throw std::invalid_argument("fit_em: fewer distinct points than components");
    const Vector cdf = cumulative_distribution(min_dist2 / total);
    Index next = stream.discrete_from_cdf(cdf);
    while (next > 0 && !(min_dist2[next] > 0.0)) --next;
    centers.push_back(next);
    for (Index i = 0; i < n; ++i)
      min_dist2[i] = std::min(min_dist2[i], (data[i] - data[next]).squaredNorm());
  }
  return centers;
}

Matrix floored(Matrix sigma, double fallback_trace) {
  const Index k = sigma.rows();
  double tr = sigma.trace();
  if (!(tr > 0.0)) tr = fallback_trace;
  sigma.diagonal().array() += 1e-6 * tr / static_cast<double>(k);
  return sigma;
}

Matrix cholesky_factor(const Matrix& sigma, double fallback_trace) {
  Matrix s = sigma;
  for (int attempt = 0; attempt < 8; ++attempt) {
    Eigen::LLT<Matrix> llt(s);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    s.diagonal().array() += std::pow(10.0, attempt - 6) * fallback_trace / s.rows();
  }
  throw std::invalid_argument("fit_em: covariance could not be made positive definite");
}

}  // namespace

GmmModel fit_em(const std::vector<Vector>& latents, Index k_components, std::uint64_t seed,
                Index max_iters, double tol, std::vector<double>* ll_trace) {
  const Index n = static_cast<Index>(latents.size());
  if (k_components < 1) throw std::invalid_argument("fit_em: need K >= 1");
  if (n < k_components) throw std::invalid_argument("fit_em: fewer points than components");
  const Index k = latents.front().size();
  for (const Vector& z : latents)
    if (z.size() != k) throw ShapeError("fit_em: inconsistent latent lengths");

  Vector data_mean = Vector::Zero(k);
  for (const Vector& z : latents) data_mean += z;
  data_mean /= static_cast<double>(n);
  Matrix data_scatter = Matrix::Zero(k, k);
  for (const Vector& z : latents) {
    const Vector c = z - data_mean;
    data_scatter += c * c.transpose();
  }
  data_scatter /= static_cast<double>(n);
  double fallback_trace = data_scatter.trace();
  if (!(fallback_trace > 0.0))
    throw std::invalid_argument("fit_em: degenerate all-identical data");

  Stream stream(derive_stream(seed, {0x656d00ULL}));
  const std::vector<Index> centers = kmeanspp_seeds(latents, k_components, stream);

  GmmModel g;
  g.weights = Vector::Constant(k_components, 1.0 / static_cast<double>(k_components));
  const Matrix init_sigma = floored(data_scatter, fallback_trace);
  for (Index i = 0; i < k_components; ++i) {
    g.means.push_back(latents[centers[i]]);
    g.chol_factors.push_back(cholesky_factor(init_sigma, fallback_trace));
  }

  Matrix resp(n, k_components);
  double prev_ll = -std::numeric_limits<double>::infinity();
  for (Index iter = 0; iter < max_iters; ++iter) {
    // E-step
    double ll = 0.0;
    for (Index s = 0; s < n; ++s) {
      const Vector lj = component_log_joint(g, latents[s]);
      const double lse = log_sum_exp(lj);
      ll += lse;
      for (Index i = 0; i < k_components; ++i) resp(s, i) = std::exp(lj[i] - lse);
    }
    ll /= static_cast<double>(n);
    if (ll_trace) ll_trace->push_back(ll);

    // M-step
    for (Index i = 0; i < k_components; ++i) {
      const double nk = resp.col(i).sum();
      if (!(nk > 1e-12)) {
        // Vanished component: keep its mean, reset to the global scatter.
        g.weights[i] = 0.0;
        g.chol_factors[i] = cholesky_factor(init_sigma, fallback_trace);
        continue;
      }
      g.weights[i] = nk / static_cast<double>(n);
      Vector mu = Vector::Zero(k);
      for (Index s = 0; s < n; ++s) mu += resp(s, i) * latents[s];
      mu /= nk;
      Matrix sigma = Matrix::Zero(k, k);
      for (Index s = 0; s < n; ++s) {
        const Vector c = latents[s] - mu;
        sigma += resp(s, i) * (c * c.transpose());
      }
      sigma /= nk;
      g.means[i] = mu;
      g.chol_factors[i] = cholesky_factor(floored(sigma, fallback_trace), fallback_trace);
    }
    g.weights /= g.weights.sum();

    if (std::abs(ll - prev_ll) <= tol * (std::abs(prev_ll) + 1.0)) break;
    prev_ll = ll;
  }
  g.validate();
  return g;
}

}  // namespace gencs
