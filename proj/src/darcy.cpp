#include <gencs/darcy.hpp>

#include <gencs/fourier.hpp>
#include <gencs/rng.hpp>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace gencs {

PermeabilityField sample_permeability(Index res, double corr_len, double log_var,
                                      std::uint64_t seed) {
  if (res < 8) throw std::invalid_argument("sample_permeability: need res >= 8");
  if (corr_len <= 0.0 || log_var < 0.0)
    throw std::invalid_argument("sample_permeability: bad field parameters");

  PermeabilityField field;
  field.corr_len = corr_len;
  field.log_var = log_var;
  field.seed = seed;
  if (log_var == 0.0) {
    field.a = Matrix::Ones(res, res);
    return field;
  }

  // Mode weights on integer frequencies, wrapped to [-res/2, res/2).
  Vector spectrum_1d(res);
  for (Index i = 0; i < res; ++i) {
    const double k = (i <= res / 2) ? static_cast<double>(i) : static_cast<double>(i - res);
    spectrum_1d[i] = std::exp(-2.0 * std::numbers::pi * std::numbers::pi * corr_len * corr_len *
                              k * k);
  }
  Matrix spectral_weight(res, res);
  double total = 0.0;
  for (Index r = 0; r < res; ++r)
    for (Index c = 0; c < res; ++c) {
      spectral_weight(r, c) = spectrum_1d[r] * spectrum_1d[c];
      total += spectral_weight(r, c);
    }

  // g(x) = Re sum_k a_k xi_k e^{2 pi i k.x} with complex standard normal
  // xi_k gives Var g = sum a_k^2 / 2 at every grid point.
  Stream stream(derive_stream(seed, {0x67726600ULL}));
  CVector coeffs(res * res);
  for (Index r = 0; r < res; ++r)
    for (Index c = 0; c < res; ++c) {
      const double amp = std::sqrt(2.0 * log_var * spectral_weight(r, c) / total);
      const Complex xi(stream.normal() / std::numbers::sqrt2, stream.normal() / std::numbers::sqrt2);
      coeffs[r * res + c] = amp * xi;
    }

  const Dft2 dft(res, res);
  const CVector g = dft.adjoint(coeffs) * std::sqrt(static_cast<double>(res * res));
  field.a = Matrix(res, res);
  for (Index r = 0; r < res; ++r)
    for (Index c = 0; c < res; ++c) field.a(r, c) = std::exp(g[r * res + c].real());
  return field;
}

namespace {

// Transmissibilities of the 5-point stencil; h = 1/res, cell centers at
// ((i+1/2)h, (j+1/2)h), zero Dirichlet data on the walls.
struct Stencil {
  Index res;
  double inv_h2;
  const Matrix* a;

  double face(Index r0, Index c0, Index r1, Index c1) const {
    const double a0 = (*a)(r0, c0);
    const double a1 = (*a)(r1, c1);
    return 2.0 * a0 * a1 / (a0 + a1) * inv_h2;
  }
  double wall(Index r, Index c) const { return 2.0 * (*a)(r, c) * inv_h2; }
};

void check_positive(const Matrix& a) {
  if (a.rows() != a.cols() || a.rows() < 2) throw std::invalid_argument("darcy: bad grid");
  if (!(a.array() > 0.0).all()) throw std::invalid_argument("darcy: permeability must be positive");
}

}  // namespace

Vector apply_darcy_operator(const Matrix& a, const Vector& u) {
  check_positive(a);
  const Index res = a.rows();
  if (u.size() != res * res) throw ShapeError("apply_darcy_operator: field length mismatch");
  const Stencil st{res, static_cast<double>(res) * static_cast<double>(res), &a};

  Vector out(res * res);
  for (Index r = 0; r < res; ++r) {
    for (Index c = 0; c < res; ++c) {
      const Index idx = r * res + c;
      double diag = 0.0, off = 0.0;
      if (r > 0) {
        const double t = st.face(r, c, r - 1, c);
        diag += t;
        off += t * u[idx - res];
      } else {
        diag += st.wall(r, c);
      }
      if (r + 1 < res) {
        const double t = st.face(r, c, r + 1, c);
        diag += t;
        off += t * u[idx + res];
      } else {
        diag += st.wall(r, c);
      }
      if (c > 0) {
        const double t = st.face(r, c, r, c - 1);
        diag += t;
        off += t * u[idx - 1];
      } else {
        diag += st.wall(r, c);
      }
      if (c + 1 < res) {
        const double t = st.face(r, c, r, c + 1);
        diag += t;
        off += t * u[idx + 1];
      } else {
        diag += st.wall(r, c);
      }
      out[idx] = diag * u[idx] - off;
    }
  }
  return out;
}

Matrix solve_darcy(const PermeabilityField& field, const Matrix& f) {
  const Matrix& a = field.a;
  check_positive(a);
  const Index res = a.rows();
  if (f.rows() != res || f.cols() != res) throw ShapeError("solve_darcy: source shape mismatch");
  const Stencil st{res, static_cast<double>(res) * static_cast<double>(res), &a};

  using Sparse = Eigen::SparseMatrix<double>;
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(5 * res * res));
  for (Index r = 0; r < res; ++r) {
    for (Index c = 0; c < res; ++c) {
      const Index idx = r * res + c;
      double diag = 0.0;
      auto neighbor = [&](Index nr, Index nc, Index nidx) {
        const double t = st.face(r, c, nr, nc);
        diag += t;
        triplets.emplace_back(idx, nidx, -t);
      };
      if (r > 0) neighbor(r - 1, c, idx - res); else diag += st.wall(r, c);
      if (r + 1 < res) neighbor(r + 1, c, idx + res); else diag += st.wall(r, c);
      if (c > 0) neighbor(r, c - 1, idx - 1); else diag += st.wall(r, c);
      if (c + 1 < res) neighbor(r, c + 1, idx + 1); else diag += st.wall(r, c);
      triplets.emplace_back(idx, idx, diag);
    }
  }
  Sparse system(res * res, res * res);
  system.setFromTriplets(triplets.begin(), triplets.end());

  Vector rhs(res * res);
  for (Index r = 0; r < res; ++r)
    for (Index c = 0; c < res; ++c) rhs[r * res + c] = f(r, c);

  Eigen::ConjugateGradient<Sparse, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>>
      solver;
  solver.setTolerance(1e-12);
  solver.setMaxIterations(20 * res * res);
  solver.compute(system);
  const Vector u = solver.solve(rhs);
  const double residual = (system * u - rhs).norm() / std::max(rhs.norm(), 1e-300);
  if (residual > 1e-10)
    throw SolverError("solve_darcy: linear solve did not reach 1e-10 relative residual", residual);

  Matrix grid(res, res);
  for (Index r = 0; r < res; ++r)
    for (Index c = 0; c < res; ++c) grid(r, c) = u[r * res + c];
  return grid;
}

Vector area_average(const Vector& field, Index from_res, Index to_res) {
  if (to_res < 1 || from_res % to_res != 0)
    throw ShapeError("area_average: target resolution must divide the source");
  if (field.size() != from_res * from_res) throw ShapeError("area_average: field length mismatch");
  const Index block = from_res / to_res;
  const double inv = 1.0 / static_cast<double>(block * block);
  Vector out(to_res * to_res);
  for (Index r = 0; r < to_res; ++r) {
    for (Index c = 0; c < to_res; ++c) {
      double acc = 0.0;
      for (Index br = 0; br < block; ++br)
        for (Index bc = 0; bc < block; ++bc)
          acc += field[(r * block + br) * from_res + (c * block + bc)];
      out[r * to_res + c] = acc * inv;
    }
  }
  return out;
}

Vector normalize_field(Vector field) {
  if (field.size() == 0) return field;
  field.array() -= field.mean();
  const double peak = field.cwiseAbs().maxCoeff();
  if (peak > 0.0) field /= peak;
  return field;
}

const std::vector<Vector>& DarcyDataset::at_resolution(Index res) const {
  for (std::size_t i = 0; i < resolutions.size(); ++i) {
    if (resolutions[i] == res) return fields[i];
  }
  throw std::invalid_argument("DarcyDataset: resolution not present");
}

DarcyDataset build_dataset(Index n, std::vector<Index> resolutions, double corr_len,
                           double log_var, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("build_dataset: need n >= 1");
  if (resolutions.empty()) throw std::invalid_argument("build_dataset: no resolutions");
  std::sort(resolutions.begin(), resolutions.end());
  const Index finest = resolutions.back();
  for (Index res : resolutions) {
    if (res < 1 || finest % res != 0)
      throw std::invalid_argument("build_dataset: every resolution must divide the finest");
  }

  DarcyDataset ds;
  ds.resolutions = resolutions;
  ds.fields.resize(resolutions.size());
  ds.count = n;
  ds.corr_len = corr_len;
  ds.log_var = log_var;
  ds.seed = seed;

  const Matrix source = Matrix::Ones(finest, finest);
  for (Index i = 0; i < n; ++i) {
    const PermeabilityField perm = sample_permeability(
        finest, corr_len, log_var, derive_stream(seed, {0x64637900ULL, static_cast<std::uint64_t>(i)}));
    const Matrix u = solve_darcy(perm, source);
    Vector fine(finest * finest);
    for (Index r = 0; r < finest; ++r)
      for (Index c = 0; c < finest; ++c) fine[r * finest + c] = u(r, c);
    for (std::size_t ri = 0; ri < resolutions.size(); ++ri) {
      ds.fields[ri].push_back(normalize_field(area_average(fine, finest, resolutions[ri])));
    }
  }
  return ds;
}

DatasetSplit split_dataset(Index n) {
  if (n < 2) throw std::invalid_argument("split_dataset: need at least 2 instances");
  const Index half = n / 2;
  const Index val = std::max<Index>(1, (half + 9) / 10);
  DatasetSplit split;
  for (Index i = 0; i < half - val; ++i) split.train.push_back(i);
  for (Index i = half - val; i < half; ++i) split.validation.push_back(i);
  for (Index i = half; i < n; ++i) split.test.push_back(i);
  return split;
}

}  // namespace gencs
