#pragma once

#include <gencs/fourier.hpp>
#include <gencs/types.hpp>

#include <cstdint>
#include <memory>

namespace gencs {

/// Probability vector over the M measurement indices together with its
/// support mask. The mask is what the projections I-hat / I-hat-perp act by.
struct SamplingDistribution {
  Vector p;
  Eigen::Array<bool, Eigen::Dynamic, 1> support;

  Index dim() const { return p.size(); }
  Index support_size() const { return support.count(); }

  /// Validates an explicit probability vector: nonnegative entries summing
  /// to 1 within 1e-12.
  static SamplingDistribution from_probabilities(Vector p);

  /// Normalizes a nonnegative weight vector to a distribution.
  static SamplingDistribution from_weights(const Vector& w);

  static SamplingDistribution uniform(Index m);
};

/// m i.i.d. index draws from a distribution, kept with their weights
/// 1/sqrt(p_j). Duplicates are kept; the draws realize S and D jointly.
struct MeasurementEnsemble {
  IndexVector indices;
  Vector weights;
  std::shared_ptr<const SamplingDistribution> source;
  std::uint64_t seed = 0;

  Index count() const { return indices.size(); }
};

/// Deterministic in (p, m, seed); draw i uses its own derived stream so the
/// ensemble is reproducible under any evaluation order.
MeasurementEnsemble draw_ensemble(const SamplingDistribution& p, Index m, std::uint64_t seed);
MeasurementEnsemble draw_ensemble(std::shared_ptr<const SamplingDistribution> p, Index m,
                                  std::uint64_t seed);

/// b_i = w_i * (F field)_{j_i}.
CVector apply_sdf(const UnitaryOperator& f, const MeasurementEnsemble& e, const Vector& field);

/// Complex adjoint of the linear map behind apply_sdf: F^* D S^* y.
CVector sdf_adjoint(const UnitaryOperator& f, const MeasurementEnsemble& e, const CVector& y);

/// Real part of sdf_adjoint; half the gradient of x -> |apply_sdf(x) - b|^2
/// at residual y = apply_sdf(x) - b.
Vector apply_sdf_adjoint(const UnitaryOperator& f, const MeasurementEnsemble& e, const CVector& y);

/// Splits a spectrum into its components on supp p and the complement;
/// the parts are orthogonal and sum to the input.
std::pair<CVector, CVector> support_projection(const SamplingDistribution& p,
                                               const CVector& spectrum);

}  // namespace gencs
