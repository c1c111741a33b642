#include <gencs/fourier.hpp>

#include <unsupported/Eigen/FFT>

#include <cmath>

namespace gencs {

CVector UnitaryOperator::forward_real(const Vector& x) const {
  return forward(x.cast<Complex>());
}

CMatrix UnitaryOperator::forward_columns(const Matrix& cols) const {
  CMatrix out(cols.rows(), cols.cols());
  for (Index c = 0; c < cols.cols(); ++c) {
    out.col(c) = forward_real(cols.col(c));
  }
  return out;
}

Dft2::Dft2(Index rows, Index cols) : rows_(rows), cols_(cols) {
  if (rows < 1 || cols < 1) throw ShapeError("Dft2: grid sides must be positive");
}

namespace {

enum class Direction { Forward, Inverse };

// Separable transform: raw 1D FFTs along both axes of the row-major
// vectorized grid, then one scalar normalization. Eigen's fwd is
// unnormalized and inv carries 1/n, so the unitary scale is restored
// explicitly: 1/sqrt(M) forward, sqrt(M) times the 1/M already applied
// on the inverse path.
CVector transform2d(const CVector& x, Index rows, Index cols, Direction dir) {
  const Index m = rows * cols;
  if (x.size() != m) throw ShapeError("Dft2: spectrum/field length does not match grid");

  Eigen::FFT<double> fft;
  CMatrix grid(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) grid(r, c) = x[r * cols + c];

  CVector buf_in, buf_out;
  for (Index c = 0; c < cols; ++c) {
    buf_in = grid.col(c);
    if (dir == Direction::Forward) {
      fft.fwd(buf_out, buf_in);
    } else {
      fft.inv(buf_out, buf_in);
    }
    grid.col(c) = buf_out;
  }
  for (Index r = 0; r < rows; ++r) {
    buf_in = grid.row(r).transpose();
    if (dir == Direction::Forward) {
      fft.fwd(buf_out, buf_in);
    } else {
      fft.inv(buf_out, buf_in);
    }
    grid.row(r) = buf_out.transpose();
  }

  const double scale = (dir == Direction::Forward) ? 1.0 / std::sqrt(double(m))
                                                   : std::sqrt(double(m));
  CVector out(m);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) out[r * cols + c] = grid(r, c) * scale;
  return out;
}

}  // namespace

CVector Dft2::forward(const CVector& x) const {
  return transform2d(x, rows_, cols_, Direction::Forward);
}

CVector Dft2::adjoint(const CVector& y) const {
  return transform2d(y, rows_, cols_, Direction::Inverse);
}

CVector IdentityOperator::forward(const CVector& x) const {
  if (x.size() != dim_) throw ShapeError("IdentityOperator: length mismatch");
  return x;
}

CVector IdentityOperator::adjoint(const CVector& y) const {
  if (y.size() != dim_) throw ShapeError("IdentityOperator: length mismatch");
  return y;
}

}  // namespace gencs
