#pragma once

#include <gencs/types.hpp>

#include <cstdint>
#include <vector>

namespace gencs {

/// Positive permeability grid a(x) = exp(g(x)) with g a stationary Gaussian
/// random field, plus the parameters that generated it.
struct PermeabilityField {
  Matrix a;  // res x res, strictly positive
  double corr_len = 0.0;
  double log_var = 0.0;
  std::uint64_t seed = 0;

  Index res() const { return a.rows(); }
};

/// Spectral synthesis with a squared-exponential spectrum: Fourier modes
/// weighted by exp(-2 pi^2 corr_len^2 |k|^2), scaled so the log-field has
/// pointwise variance log_var and mean zero.
PermeabilityField sample_permeability(Index res, double corr_len, double log_var,
                                      std::uint64_t seed);

/// Matrix action of the 5-point finite-volume discretization of
/// u -> -div(a grad u) on the unit square with homogeneous Dirichlet walls:
/// harmonic-mean face coefficients inside, 2a/h^2 ghost elimination at the
/// boundary. Exposed for conservation and maximum-principle checks.
Vector apply_darcy_operator(const Matrix& a, const Vector& u);

/// Solves -div(a grad u) = f to 1e-10 relative residual (CG, diagonal
/// preconditioner). f is the res x res source evaluated at cell centers.
Matrix solve_darcy(const PermeabilityField& field, const Matrix& f);

/// Pressure fields at every requested resolution: instances are solved at
/// the finest grid, area-averaged down, and each stored field normalized to
/// zero mean and unit max-abs.
struct DarcyDataset {
  std::vector<Index> resolutions;            // ascending
  std::vector<std::vector<Vector>> fields;   // fields[r][i], row-major grids
  Index count = 0;
  double corr_len = 0.0;
  double log_var = 0.0;
  std::uint64_t seed = 0;

  const std::vector<Vector>& at_resolution(Index res) const;
};

DarcyDataset build_dataset(Index n, std::vector<Index> resolutions, double corr_len,
                           double log_var, std::uint64_t seed);

/// Deterministic split: first half train, second half test, with the last
/// tenth of the train block held out for validation.
struct DatasetSplit {
  std::vector<Index> train;
  std::vector<Index> validation;
  std::vector<Index> test;
};

DatasetSplit split_dataset(Index n);

/// Block-mean downsampling between divisible resolutions.
Vector area_average(const Vector& field, Index from_res, Index to_res);

/// Shifts to zero mean, scales to unit max-abs (no-op on the zero field).
Vector normalize_field(Vector field);

}  // namespace gencs
