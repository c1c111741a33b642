#pragma once

#include <gencs/types.hpp>

namespace gencs {

/// Linear bicubic (Catmull-Rom, a = -0.5) upscaling between square grids,
/// realized as a separable 1D weight matrix applied along both axes. Edge
/// taps are clamped, so each output is a convex-affine combination with
/// weights summing to 1: constants are preserved. Exact identity when the
/// resolutions coincide.
class UpscaleOperator {
public:
  UpscaleOperator(Index source_res, Index target_res);

  Index source_res() const { return r_; }
  Index target_res() const { return big_r_; }
  Index source_dim() const { return r_ * r_; }
  Index target_dim() const { return big_r_ * big_r_; }

  /// Row-major r*r field -> row-major R*R field.
  Vector apply(const Vector& field) const;

  /// Transpose of apply: R*R -> r*r.
  Vector apply_adjoint(const Vector& field) const;

  /// The R x r one-axis interpolation matrix; apply() is W * X * W^T on the
  /// reshaped grid.
  const Matrix& weight_1d() const { return w1d_; }

private:
  Index r_;
  Index big_r_;
  Matrix w1d_;
};

}  // namespace gencs
