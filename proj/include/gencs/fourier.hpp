#pragma once

#include <gencs/types.hpp>

namespace gencs {

/// Unitary transform between the signal space and the measurement basis.
/// Implementations must satisfy adjoint(forward(x)) == x up to round-off,
/// which is what every downstream bound relies on.
class UnitaryOperator {
public:
  virtual ~UnitaryOperator() = default;

  virtual Index dim() const = 0;
  virtual CVector forward(const CVector& x) const = 0;
  virtual CVector adjoint(const CVector& y) const = 0;

  CVector forward_real(const Vector& x) const;

  /// forward applied to each column of a real matrix.
  CMatrix forward_columns(const Matrix& cols) const;
};

/// 2D discrete Fourier transform with 1/sqrt(M) normalization on a
/// rows x cols grid; fields are vectorized row-major. Unitary, so the
/// adjoint is the inverse.
class Dft2 final : public UnitaryOperator {
public:
  Dft2(Index rows, Index cols);

  Index dim() const override { return rows_ * cols_; }
  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  CVector forward(const CVector& x) const override;
  CVector adjoint(const CVector& y) const override;

private:
  Index rows_;
  Index cols_;
};

/// Identity transform; test double standing in for F where the algebra,
/// not the Fourier structure, is under test.
class IdentityOperator final : public UnitaryOperator {
public:
  explicit IdentityOperator(Index dim) : dim_(dim) {}

  Index dim() const override { return dim_; }
  CVector forward(const CVector& x) const override;
  CVector adjoint(const CVector& y) const override;

private:
  Index dim_;
};

}  // namespace gencs
