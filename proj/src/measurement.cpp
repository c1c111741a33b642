#include <gencs/measurement.hpp>

#include <gencs/rng.hpp>

#include <cmath>

namespace gencs {

namespace {

Eigen::Array<bool, Eigen::Dynamic, 1> support_of(const Vector& p) {
  return p.array() > 0.0;
}

}  // namespace

SamplingDistribution SamplingDistribution::from_probabilities(Vector p) {
  if (p.size() == 0) throw std::invalid_argument("SamplingDistribution: empty vector");
  if ((p.array() < 0.0).any())
    throw std::invalid_argument("SamplingDistribution: negative probability");
  const double total = p.sum();
  if (std::abs(total - 1.0) > 1e-12)
    throw std::invalid_argument("SamplingDistribution: probabilities must sum to 1");
  SamplingDistribution d;
  d.p = std::move(p);
  d.support = support_of(d.p);
  return d;
}

SamplingDistribution SamplingDistribution::from_weights(const Vector& w) {
  if (w.size() == 0) throw std::invalid_argument("SamplingDistribution: empty vector");
  if ((w.array() < 0.0).any()) throw std::invalid_argument("SamplingDistribution: negative weight");
  const double total = w.sum();
  if (!(total > 0.0)) throw std::invalid_argument("SamplingDistribution: all-zero weights");
  Vector p = w / total;
  p /= p.sum();  // second pass tightens the sum to within a few ulp of 1
  SamplingDistribution d;
  d.p = std::move(p);
  d.support = support_of(d.p);
  return d;
}

SamplingDistribution SamplingDistribution::uniform(Index m) {
  return from_weights(Vector::Ones(m));
}

MeasurementEnsemble draw_ensemble(const SamplingDistribution& p, Index m, std::uint64_t seed) {
  return draw_ensemble(std::make_shared<const SamplingDistribution>(p), m, seed);
}

MeasurementEnsemble draw_ensemble(std::shared_ptr<const SamplingDistribution> p, Index m,
                                  std::uint64_t seed) {
  if (!p || p->dim() == 0 || !(p->p.sum() > 0.0))
    throw std::invalid_argument("draw_ensemble: degenerate distribution");
  if (m < 1) throw std::invalid_argument("draw_ensemble: need m >= 1");

  const Vector cdf = cumulative_distribution(p->p);
  MeasurementEnsemble e;
  e.indices.resize(m);
  e.weights.resize(m);
  e.source = std::move(p);
  e.seed = seed;
  for (Index i = 0; i < m; ++i) {
    Stream stream(derive_stream(seed, {0x736466ULL, static_cast<std::uint64_t>(i)}));
    Index j = stream.discrete_from_cdf(cdf);
    // CDF inversion can only land on a zero-probability index through
    // repeated values in the running sums; step back onto the support.
    while (j > 0 && !(e.source->p[j] > 0.0)) --j;
    e.indices[i] = j;
    e.weights[i] = 1.0 / std::sqrt(e.source->p[j]);
  }
  return e;
}

CVector apply_sdf(const UnitaryOperator& f, const MeasurementEnsemble& e, const Vector& field) {
  if (field.size() != f.dim()) throw ShapeError("apply_sdf: field length mismatch");
  const CVector spectrum = f.forward_real(field);
  CVector b(e.count());
  for (Index i = 0; i < e.count(); ++i) b[i] = e.weights[i] * spectrum[e.indices[i]];
  return b;
}

CVector sdf_adjoint(const UnitaryOperator& f, const MeasurementEnsemble& e, const CVector& y) {
  if (y.size() != e.count()) throw ShapeError("sdf_adjoint: residual length mismatch");
  CVector scatter = CVector::Zero(f.dim());
  for (Index i = 0; i < e.count(); ++i) scatter[e.indices[i]] += e.weights[i] * y[i];
  return f.adjoint(scatter);
}

Vector apply_sdf_adjoint(const UnitaryOperator& f, const MeasurementEnsemble& e, const CVector& y) {
  return sdf_adjoint(f, e, y).real();
}

std::pair<CVector, CVector> support_projection(const SamplingDistribution& p,
                                               const CVector& spectrum) {
  if (spectrum.size() != p.dim()) throw ShapeError("support_projection: length mismatch");
  CVector on = CVector::Zero(p.dim());
  CVector off = CVector::Zero(p.dim());
  for (Index j = 0; j < p.dim(); ++j) {
    (p.support[j] ? on[j] : off[j]) = spectrum[j];
  }
  return {std::move(on), std::move(off)};
}

}  // namespace gencs
