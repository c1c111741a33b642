#include <gencs/darcy.hpp>
#include <gencs/rng.hpp>
#include <gencs/upscale.hpp>

#include <doctest.h>

#include <cmath>
#include <stdexcept>

using namespace gencs;

TEST_CASE("zero log-variance produces the unit permeability") {
  const PermeabilityField field = sample_permeability(16, 0.1, 0.0, 3);
  REQUIRE(field.res() == 16);
  CHECK((field.a.array() - 1.0).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("log permeability is centered with the prescribed variance") {
  const PermeabilityField field = sample_permeability(128, 0.05, 0.3, 7);
  const Eigen::ArrayXXd logs = field.a.array().log();
  const double n = 128.0 * 128.0;
  const double mean = logs.mean();
  const double var = (logs - mean).square().sum() / n;
  // Pixels are correlated, so allow a loose but diagnostic band.
  CHECK(std::abs(mean) < 0.1);
  CHECK(var == doctest::Approx(0.3).epsilon(0.35));
  CHECK((field.a.array() > 0.0).all());
  CHECK(field.corr_len == 0.05);
  CHECK(field.log_var == 0.3);
  CHECK(field.seed == 7);
}

TEST_CASE("permeability sampling is reproducible") {
  const PermeabilityField a = sample_permeability(32, 0.1, 0.5, 11);
  const PermeabilityField b = sample_permeability(32, 0.1, 0.5, 11);
  CHECK(a.a == b.a);
  CHECK(sample_permeability(32, 0.1, 0.5, 12).a != a.a);
  CHECK_THROWS_AS((void)sample_permeability(4, 0.1, 0.5, 0), std::invalid_argument);
  CHECK_THROWS_AS((void)sample_permeability(16, -0.1, 0.5, 0), std::invalid_argument);
}

TEST_CASE("zero source forces the zero pressure") {
  PermeabilityField field;
  field.a = Matrix::Ones(16, 16);
  const Matrix u = solve_darcy(field, Matrix::Zero(16, 16));
  CHECK(u.cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("the discrete operator is symmetric and positive definite") {
  Stream s(5);
  const Index res = 8;
  PermeabilityField field = sample_permeability(res, 0.2, 0.4, 9);
  for (int t = 0; t < 10; ++t) {
    const Vector x = s.normal_vector(res * res);
    const Vector y = s.normal_vector(res * res);
    const double xy = apply_darcy_operator(field.a, x).dot(y);
    const double yx = x.dot(apply_darcy_operator(field.a, y));
    CHECK(xy == doctest::Approx(yx).epsilon(1e-10));
    const double quad = apply_darcy_operator(field.a, x).dot(x);
    CHECK(quad > 0.0);
  }
  CHECK_THROWS_AS((void)apply_darcy_operator(field.a, Vector::Zero(5)), ShapeError);
  CHECK_THROWS_AS((void)apply_darcy_operator(Matrix::Zero(8, 8), Vector::Zero(64)),
                  std::invalid_argument);
}

TEST_CASE("the solver returns the field the operator maps back to the source") {
  const Index res = 16;
  const PermeabilityField field = sample_permeability(res, 0.1, 0.5, 21);
  Matrix f(res, res);
  for (Index i = 0; i < res; ++i)
    for (Index j = 0; j < res; ++j)
      f(i, j) = std::sin(M_PI * (i + 0.5) / res) * std::cos(M_PI * (j + 0.5) / res);
  const Matrix u = solve_darcy(field, f);
  Vector uvec(res * res);
  for (Index i = 0; i < res; ++i)
    for (Index j = 0; j < res; ++j) uvec[i * res + j] = u(i, j);
  const Vector back = apply_darcy_operator(field.a, uvec);
  Vector fvec(res * res);
  for (Index i = 0; i < res; ++i)
    for (Index j = 0; j < res; ++j) fvec[i * res + j] = f(i, j);
  CHECK((back - fvec).norm() <= 1e-8 * fvec.norm());
  CHECK_THROWS_AS((void)solve_darcy(field, Matrix::Zero(8, 8)), ShapeError);
}

TEST_CASE("unit permeability with unit source yields the positive Poisson solution") {
  PermeabilityField field;
  field.a = Matrix::Ones(32, 32);
  const Matrix u = solve_darcy(field, Matrix::Ones(32, 32));
  // Dirichlet walls and a positive source: positive interior, peak at the
  // center, symmetric under the grid's symmetries.
  CHECK(u.minCoeff() > 0.0);
  Index argmax_r = 0, argmax_c = 0;
  u.maxCoeff(&argmax_r, &argmax_c);
  CHECK(std::abs(static_cast<double>(argmax_r) - 15.5) <= 0.5);
  CHECK(std::abs(static_cast<double>(argmax_c) - 15.5) <= 0.5);
  CHECK((u - u.transpose()).cwiseAbs().maxCoeff() <= 1e-9);
  // The max of -Laplace u = 1 on the unit square is 0.0736712... at the
  // center; the FV solution approaches it from below on a coarse grid.
  CHECK(u.maxCoeff() == doctest::Approx(0.0736712).epsilon(0.02));
}

TEST_CASE("area averaging reduces blocks to their means") {
  Vector field(16);
  for (Index i = 0; i < 16; ++i) field[i] = static_cast<double>(i);
  const Vector coarse = area_average(field, 4, 2);
  REQUIRE(coarse.size() == 4);
  CHECK(coarse[0] == doctest::Approx((0.0 + 1 + 4 + 5) / 4.0));
  CHECK(coarse[1] == doctest::Approx((2.0 + 3 + 6 + 7) / 4.0));
  CHECK(coarse[2] == doctest::Approx((8.0 + 9 + 12 + 13) / 4.0));
  CHECK(coarse[3] == doctest::Approx((10.0 + 11 + 14 + 15) / 4.0));
  CHECK(area_average(field, 4, 4) == field);
  CHECK_THROWS_AS((void)area_average(field, 4, 3), ShapeError);
}

TEST_CASE("normalize_field centers and scales to unit peak") {
  Vector field(4);
  field << 1.0, 2.0, 3.0, 6.0;
  const Vector n = normalize_field(field);
  CHECK(n.sum() == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(n.cwiseAbs().maxCoeff() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(normalize_field(Vector::Zero(5)) == Vector::Zero(5));
}

TEST_CASE("datasets carry consistent multiresolution views of each solve") {
  const DarcyDataset ds = build_dataset(2, {16, 32, 64}, 0.08, 0.5, 13);
  CHECK(ds.count == 2);
  REQUIRE(ds.resolutions == std::vector<Index>{16, 32, 64});
  REQUIRE(ds.at_resolution(16).size() == 2);
  for (Index i = 0; i < 2; ++i) {
    const Vector& fine = ds.at_resolution(64)[static_cast<size_t>(i)];
    CHECK(fine.cwiseAbs().maxCoeff() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(fine.mean()) <= 1e-12);
    // The coarse view upscaled back correlates strongly with the fine one.
    for (Index res : {Index(16), Index(32)}) {
      const Vector& coarse = ds.at_resolution(res)[static_cast<size_t>(i)];
      UpscaleOperator up(res, 64);
      const Vector lifted = up.apply(coarse);
      const double corr = lifted.dot(fine) / (lifted.norm() * fine.norm());
      CHECK(corr >= 0.99);
    }
  }
  CHECK_THROWS_AS((void)ds.at_resolution(8), std::invalid_argument);

  // Same seed, same data.
  const DarcyDataset again = build_dataset(2, {16, 32, 64}, 0.08, 0.5, 13);
  CHECK(again.at_resolution(64)[0] == ds.at_resolution(64)[0]);

  CHECK_THROWS_AS((void)build_dataset(0, {16}, 0.1, 0.5, 0), std::invalid_argument);
  CHECK_THROWS_AS((void)build_dataset(1, {12, 64}, 0.1, 0.5, 0), std::invalid_argument);
}

TEST_CASE("the split carves train, validation, and test deterministically") {
  const DatasetSplit s = split_dataset(40);
  REQUIRE(s.train.size() == 18);
  REQUIRE(s.validation.size() == 2);
  REQUIRE(s.test.size() == 20);
  for (Index i = 0; i < 18; ++i) CHECK(s.train[static_cast<size_t>(i)] == i);
  CHECK(s.validation[0] == 18);
  CHECK(s.validation[1] == 19);
  for (Index i = 0; i < 20; ++i) CHECK(s.test[static_cast<size_t>(i)] == 20 + i);

  // The validation block is about a tenth of the first half, at least one.
  const DatasetSplit tiny = split_dataset(4);
  CHECK(tiny.train.size() == 1);
  CHECK(tiny.validation.size() == 1);
  CHECK(tiny.test.size() == 2);
  CHECK_THROWS_AS((void)split_dataset(1), std::invalid_argument);
}
