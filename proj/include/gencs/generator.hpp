#pragma once

#include <gencs/types.hpp>

#include <cstdint>
#include <functional>
#include <vector>

namespace gencs {

/// ReLU network with monotone widths and a final linear map into the
/// M-dimensional signal space. Hidden layers are bias-free, which makes the
/// map positively homogeneous and its range a finite union of polyhedral
/// cones inside span of the final weight's columns.
struct GgnModel {
  std::vector<Matrix> hidden;  // W(i) is k_i x k_{i-1}, i = 1..d
  Matrix out;                  // M x k_d
  Index grid_rows = 0;         // M == grid_rows * grid_cols
  Index grid_cols = 0;

  Index depth() const { return static_cast<Index>(hidden.size()); }
  Index latent_dim() const { return hidden.empty() ? 0 : hidden.front().cols(); }
  Index last_width() const { return hidden.empty() ? 0 : hidden.back().rows(); }
  Index signal_dim() const { return out.rows(); }

  /// Throws ShapeError unless: d >= 1, 2 <= k_0 <= k_1 <= ... <= k_d <= M,
  /// consecutive layer shapes chain, M == grid_rows * grid_cols, and all
  /// entries are finite.
  void validate() const;
};

Vector forward(const GgnModel& model, const Vector& z);

/// Gradient of <forward(model, z), cotangent> with respect to z.
/// ReLU subgradient at 0 is taken as 0.
Vector forward_grad(const GgnModel& model, const Vector& z, const Vector& cotangent);

/// Natural log of the cone-count bound (2e k_d / k)^(k d) on the number of
/// at-most-k-dimensional cones covering the network range. The difference
/// set is covered by the square of the bound, i.e. twice this value.
double cone_count_log_bound(Index k, Index d, Index k_d);

/// Orthonormal basis of the column space of model.out (every network output
/// lies in it). Singular values below 1e-10 * sigma_max count as zero.
Matrix range_subspace_basis(const GgnModel& model);

/// Orthonormal basis of the upscaled range: span of the chosen linear map
/// applied to the columns of model.out.
Matrix range_subspace_basis(const GgnModel& model,
                            const std::function<Vector(const Vector&)>& lift);

/// He-initialized random model: entries i.i.d. N(0, 2/fan_in), derived
/// deterministically from (seed, layer index).
GgnModel random_ggn(Index k, const std::vector<Index>& hidden_widths,
                    Index grid_rows, Index grid_cols, std::uint64_t seed);

/// Latent draw indexed by sample number; deterministic in the index so
/// Monte-Carlo reductions are order-independent.
using LatentSampler = std::function<Vector(std::uint64_t)>;

LatentSampler gaussian_sampler(Index k, std::uint64_t seed);

}  // namespace gencs
