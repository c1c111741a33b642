#include <gencs/generator.hpp>

#include <gencs/rng.hpp>

#include <Eigen/SVD>

#include <cmath>
#include <numbers>
#include <string>

namespace gencs {

void GgnModel::validate() const {
  if (hidden.empty()) throw ShapeError("GgnModel: depth must be at least 1");
  if (latent_dim() < 2) throw ShapeError("GgnModel: latent dimension must be >= 2");
  Index prev = latent_dim();
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    const Matrix& w = hidden[i];
    if (w.cols() != prev)
      throw ShapeError("GgnModel: layer " + std::to_string(i + 1) + " input width mismatch");
    if (w.rows() < prev)
      throw ShapeError("GgnModel: widths must be monotone nondecreasing");
    if (!w.allFinite()) throw ShapeError("GgnModel: non-finite hidden weight");
    prev = w.rows();
  }
  if (out.cols() != prev) throw ShapeError("GgnModel: final layer input width mismatch");
  if (out.rows() < prev) throw ShapeError("GgnModel: signal dimension must be >= last width");
  if (!out.allFinite()) throw ShapeError("GgnModel: non-finite final weight");
  if (grid_rows < 1 || grid_cols < 1 || grid_rows * grid_cols != out.rows())
    throw ShapeError("GgnModel: grid shape does not match signal dimension");
}

namespace {

Vector relu(Vector v) {
  return v.cwiseMax(0.0);
}

}  // namespace

Vector forward(const GgnModel& model, const Vector& z) {
  if (z.size() != model.latent_dim()) throw ShapeError("forward: latent length mismatch");
  Vector h = z;
  for (const Matrix& w : model.hidden) h = relu(w * h);
  return model.out * h;
}

Vector forward_grad(const GgnModel& model, const Vector& z, const Vector& cotangent) {
  if (z.size() != model.latent_dim()) throw ShapeError("forward_grad: latent length mismatch");
  if (cotangent.size() != model.signal_dim())
    throw ShapeError("forward_grad: cotangent length mismatch");

  const Index d = model.depth();
  std::vector<Vector> pre(d);  // pre-activations of hidden layers
  Vector h = z;
  for (Index i = 0; i < d; ++i) {
    pre[i] = model.hidden[i] * h;
    h = relu(pre[i]);
  }

  Vector g = model.out.transpose() * cotangent;
  for (Index i = d - 1; i >= 0; --i) {
    g.array() *= (pre[i].array() > 0.0).cast<double>();
    g = model.hidden[i].transpose() * g;
  }
  return g;
}

double cone_count_log_bound(Index k, Index d, Index k_d) {
  if (k < 2 || k > k_d || d < 1) throw ShapeError("cone_count_log_bound: need 2 <= k <= k_d, d >= 1");
  const double kd = static_cast<double>(k) * static_cast<double>(d);
  return kd * std::log(2.0 * std::numbers::e * static_cast<double>(k_d) / static_cast<double>(k));
}

namespace {

Matrix orthonormal_column_basis(const Matrix& a) {
  if (a.size() == 0) return Matrix(a.rows(), 0);
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  const double cutoff = 1e-10 * (sv.size() > 0 ? sv[0] : 0.0);
  Index rank = 0;
  for (Index i = 0; i < sv.size(); ++i)
    if (sv[i] > cutoff) ++rank;
  return svd.matrixU().leftCols(rank);
}

}  // namespace

Matrix range_subspace_basis(const GgnModel& model) {
  return orthonormal_column_basis(model.out);
}

Matrix range_subspace_basis(const GgnModel& model,
                            const std::function<Vector(const Vector&)>& lift) {
  if (model.out.cols() == 0) return Matrix(0, 0);
  Vector probe = lift(Vector(model.out.col(0)));
  Matrix lifted(probe.size(), model.out.cols());
  lifted.col(0) = probe;
  for (Index c = 1; c < model.out.cols(); ++c) lifted.col(c) = lift(Vector(model.out.col(c)));
  return orthonormal_column_basis(lifted);
}

GgnModel random_ggn(Index k, const std::vector<Index>& hidden_widths,
                    Index grid_rows, Index grid_cols, std::uint64_t seed) {
  GgnModel model;
  model.grid_rows = grid_rows;
  model.grid_cols = grid_cols;
  Index prev = k;
  for (std::size_t i = 0; i < hidden_widths.size(); ++i) {
    Stream stream(derive_stream(seed, {0x67676e00ULL, i}));
    const double sd = std::sqrt(2.0 / static_cast<double>(prev));
    Matrix w(hidden_widths[i], prev);
    for (Index r = 0; r < w.rows(); ++r)
      for (Index c = 0; c < w.cols(); ++c) w(r, c) = sd * stream.normal();
    model.hidden.push_back(std::move(w));
    prev = hidden_widths[i];
  }
  Stream stream(derive_stream(seed, {0x67676e00ULL, hidden_widths.size()}));
  const double sd = std::sqrt(2.0 / static_cast<double>(prev));
  model.out = Matrix(grid_rows * grid_cols, prev);
  for (Index r = 0; r < model.out.rows(); ++r)
    for (Index c = 0; c < model.out.cols(); ++c) model.out(r, c) = sd * stream.normal();
  model.validate();
  return model;
}

LatentSampler gaussian_sampler(Index k, std::uint64_t seed) {
  return [k, seed](std::uint64_t i) {
    Stream stream(derive_stream(seed, {0x6c617400ULL, i}));
    return stream.normal_vector(k);
  };
}

}  // namespace gencs
