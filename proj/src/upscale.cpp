#include <gencs/upscale.hpp>

#include <algorithm>
#include <cmath>

namespace gencs {

namespace {

// Catmull-Rom weights at fraction t for taps (base-1, base, base+1, base+2);
// the four weights sum to 1 for every t.
void catmull_rom_weights(double t, double w[4]) {
  const double t2 = t * t;
  const double t3 = t2 * t;
  w[0] = 0.5 * (-t3 + 2.0 * t2 - t);
  w[1] = 0.5 * (3.0 * t3 - 5.0 * t2 + 2.0);
  w[2] = 0.5 * (-3.0 * t3 + 4.0 * t2 + t);
  w[3] = 0.5 * (t3 - t2);
}

Matrix interpolation_matrix(Index r, Index big_r) {
  if (r == big_r) return Matrix::Identity(r, r);
  Matrix w1d = Matrix::Zero(big_r, r);
  for (Index i = 0; i < big_r; ++i) {
    // Pixel-center alignment between the two grids.
    const double s =
        (static_cast<double>(i) + 0.5) * static_cast<double>(r) / static_cast<double>(big_r) - 0.5;
    const double base = std::floor(s);
    const double t = s - base;
    double w[4];
    catmull_rom_weights(t, w);
    for (int tap = 0; tap < 4; ++tap) {
      Index src = static_cast<Index>(base) - 1 + tap;
      src = std::clamp(src, Index(0), r - 1);
      w1d(i, src) += w[tap];
    }
  }
  return w1d;
}

}  // namespace

UpscaleOperator::UpscaleOperator(Index source_res, Index target_res)
    : r_(source_res), big_r_(target_res) {
  if (source_res < 1 || target_res < source_res)
    throw ShapeError("UpscaleOperator: need 1 <= source resolution <= target resolution");
  w1d_ = interpolation_matrix(r_, big_r_);
}

Vector UpscaleOperator::apply(const Vector& field) const {
  if (field.size() != source_dim()) throw ShapeError("upscale: field length mismatch");
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMajor> x(field.data(), r_, r_);
  RowMajor y = w1d_ * x * w1d_.transpose();
  return Eigen::Map<const Vector>(y.data(), y.size());
}

Vector UpscaleOperator::apply_adjoint(const Vector& field) const {
  if (field.size() != target_dim()) throw ShapeError("upscale adjoint: field length mismatch");
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMajor> y(field.data(), big_r_, big_r_);
  RowMajor x = w1d_.transpose() * y * w1d_;
  return Eigen::Map<const Vector>(x.data(), x.size());
}

}  // namespace gencs
