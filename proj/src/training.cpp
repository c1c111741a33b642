#include <gencs/training.hpp>

#include <gencs/adam.hpp>
#include <gencs/rng.hpp>

#include <cmath>
#include <stdexcept>

namespace gencs {

void AutoencoderModel::validate() const {
  decoder.validate();
  if (enc_weights.empty() || enc_weights.size() != enc_biases.size())
    throw ShapeError("AutoencoderModel: encoder layer mismatch");
  if (enc_weights.front().cols() != decoder.signal_dim())
    throw ShapeError("AutoencoderModel: encoder input width mismatch");
  if (enc_weights.back().rows() != decoder.latent_dim())
    throw ShapeError("AutoencoderModel: encoder output width mismatch");
  for (std::size_t i = 0; i < enc_weights.size(); ++i) {
    if (enc_biases[i].size() != enc_weights[i].rows())
      throw ShapeError("AutoencoderModel: bias length mismatch");
    if (i + 1 < enc_weights.size() && enc_weights[i + 1].cols() != enc_weights[i].rows())
      throw ShapeError("AutoencoderModel: encoder layer chain mismatch");
  }
  if (resolution * resolution != decoder.signal_dim())
    throw ShapeError("AutoencoderModel: resolution does not match the signal dimension");
}

namespace {

Matrix he_matrix(Index rows, Index cols, Stream& stream) {
  const double sd = std::sqrt(2.0 / static_cast<double>(cols));
  Matrix w(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) w(r, c) = sd * stream.normal();
  return w;
}

struct BatchPass {
  // Encoder pre-activations (all layers) and decoder pre-activations; the
  // backward pass needs the ReLU gates.
  std::vector<Matrix> enc_pre;
  std::vector<Matrix> enc_act;  // enc_act[i] = activation after layer i
  std::vector<Matrix> dec_pre;
  std::vector<Matrix> dec_act;
  Matrix output;
};

BatchPass forward_batch(const AutoencoderModel& m, const Matrix& x) {
  BatchPass pass;
  const std::size_t enc_layers = m.enc_weights.size();
  pass.enc_pre.resize(enc_layers);
  pass.enc_act.resize(enc_layers);
  const Matrix* prev = &x;
  for (std::size_t i = 0; i < enc_layers; ++i) {
    pass.enc_pre[i].noalias() = m.enc_weights[i] * (*prev);
    pass.enc_pre[i].colwise() += m.enc_biases[i];
    pass.enc_act[i] = (i + 1 < enc_layers) ? pass.enc_pre[i].cwiseMax(0.0) : pass.enc_pre[i];
    prev = &pass.enc_act[i];
  }
  const std::size_t dec_layers = m.decoder.hidden.size();
  pass.dec_pre.resize(dec_layers);
  pass.dec_act.resize(dec_layers);
  for (std::size_t j = 0; j < dec_layers; ++j) {
    pass.dec_pre[j].noalias() = m.decoder.hidden[j] * (*prev);
    pass.dec_act[j] = pass.dec_pre[j].cwiseMax(0.0);
    prev = &pass.dec_act[j];
  }
  pass.output.noalias() = m.decoder.out * (*prev);
  return pass;
}

}  // namespace

Vector encode(const AutoencoderModel& m, const Vector& field) {
  if (field.size() != m.decoder.signal_dim()) throw ShapeError("encode: field length mismatch");
  Vector h = field;
  for (std::size_t i = 0; i < m.enc_weights.size(); ++i) {
    h = m.enc_weights[i] * h + m.enc_biases[i];
    if (i + 1 < m.enc_weights.size()) h = h.cwiseMax(0.0);
  }
  return h;
}

std::vector<Vector> encode_dataset(const AutoencoderModel& m, const std::vector<Vector>& dataset) {
  std::vector<Vector> latents;
  latents.reserve(dataset.size());
  for (const Vector& field : dataset) latents.push_back(encode(m, field));
  return latents;
}

double reconstruction_mse(const AutoencoderModel& m, const std::vector<Vector>& dataset) {
  if (dataset.empty()) throw std::invalid_argument("reconstruction_mse: empty dataset");
  const double inv_m = 1.0 / static_cast<double>(m.decoder.signal_dim());
  double acc = 0.0;
  for (const Vector& field : dataset) {
    acc += (forward(m.decoder, encode(m, field)) - field).squaredNorm() * inv_m;
  }
  return acc / static_cast<double>(dataset.size());
}

AutoencoderModel train_autoencoder(const std::vector<Vector>& dataset, Index resolution,
                                   const TrainingConfig& cfg) {
  if (dataset.empty()) throw std::invalid_argument("train_autoencoder: empty dataset");
  if (cfg.epochs < 1) throw std::invalid_argument("train_autoencoder: need epochs >= 1");
  if (cfg.batch < 1) throw std::invalid_argument("train_autoencoder: need batch >= 1");
  if (cfg.widths.empty()) throw std::invalid_argument("train_autoencoder: no hidden widths");
  const Index m_dim = resolution * resolution;
  for (const Vector& field : dataset)
    if (field.size() != m_dim) throw ShapeError("train_autoencoder: field length mismatch");

  // Decoder k -> widths -> M; encoder mirrors the widths in reverse.
  AutoencoderModel model;
  model.resolution = resolution;
  model.decoder.grid_rows = resolution;
  model.decoder.grid_cols = resolution;
  {
    Index prev = cfg.latent;
    std::uint64_t layer = 0;
    for (Index w : cfg.widths) {
      Stream stream(derive_stream(cfg.seed, {0x646563ULL, layer++}));
      model.decoder.hidden.push_back(he_matrix(w, prev, stream));
      prev = w;
    }
    Stream stream(derive_stream(cfg.seed, {0x646563ULL, layer}));
    model.decoder.out = he_matrix(m_dim, prev, stream);
  }
  {
    std::vector<Index> enc_dims;
    for (auto it = cfg.widths.rbegin(); it != cfg.widths.rend(); ++it) enc_dims.push_back(*it);
    enc_dims.push_back(cfg.latent);
    Index prev = m_dim;
    for (std::size_t i = 0; i < enc_dims.size(); ++i) {
      Stream stream(derive_stream(cfg.seed, {0x656e63ULL, i}));
      model.enc_weights.push_back(he_matrix(enc_dims[i], prev, stream));
      model.enc_biases.push_back(Vector::Zero(enc_dims[i]));
      prev = enc_dims[i];
    }
  }
  model.validate();

  std::vector<AdamState> enc_w_state, dec_w_state;
  std::vector<AdamState> enc_b_state;
  for (const Matrix& w : model.enc_weights) enc_w_state.emplace_back(w.size());
  for (const Vector& b : model.enc_biases) enc_b_state.emplace_back(b.size());
  for (const Matrix& w : model.decoder.hidden) dec_w_state.emplace_back(w.size());
  AdamState dec_out_state(model.decoder.out.size());
  const AdamParams params{cfg.learning_rate, 0.9, 0.999, 1e-8};

  const Index n = static_cast<Index>(dataset.size());
  std::vector<Index> order(n);
  for (Index i = 0; i < n; ++i) order[i] = i;

  model.loss_log.push_back(reconstruction_mse(model, dataset));

  for (Index epoch = 0; epoch < cfg.epochs; ++epoch) {
    Stream shuffle(derive_stream(cfg.seed, {0x73687566ULL, static_cast<std::uint64_t>(epoch)}));
    for (Index i = n - 1; i > 0; --i) {
      const Index j = std::min<Index>(static_cast<Index>(shuffle.uniform01() * (i + 1)), i);
      std::swap(order[i], order[j]);
    }

    for (Index start = 0; start < n; start += cfg.batch) {
      const Index b = std::min(cfg.batch, n - start);
      Matrix x(m_dim, b);
      for (Index i = 0; i < b; ++i) x.col(i) = dataset[order[start + i]];

      BatchPass pass = forward_batch(model, x);
      const double scale = 2.0 / (static_cast<double>(b) * static_cast<double>(m_dim));
      Matrix delta = scale * (pass.output - x);
      if (!delta.allFinite())
        throw DivergenceError("train_autoencoder: non-finite loss", static_cast<long>(epoch));

      // Decoder backward.
      const std::size_t dl = model.decoder.hidden.size();
      const Matrix& last_act = dl > 0 ? pass.dec_act[dl - 1] : pass.enc_act.back();
      Matrix d_out_w = delta * last_act.transpose();
      Matrix back = model.decoder.out.transpose() * delta;
      std::vector<Matrix> d_dec_w(dl);
      for (std::size_t j = dl; j-- > 0;) {
        back = back.cwiseProduct((pass.dec_pre[j].array() > 0.0).cast<double>().matrix());
        const Matrix& input = j > 0 ? pass.dec_act[j - 1] : pass.enc_act.back();
        d_dec_w[j] = back * input.transpose();
        back = model.decoder.hidden[j].transpose() * back;
      }

      // Encoder backward; the final encoder layer is linear.
      const std::size_t el = model.enc_weights.size();
      std::vector<Matrix> d_enc_w(el);
      std::vector<Vector> d_enc_b(el);
      for (std::size_t i = el; i-- > 0;) {
        if (i + 1 < el)
          back = back.cwiseProduct((pass.enc_pre[i].array() > 0.0).cast<double>().matrix());
        const Matrix& input = i > 0 ? pass.enc_act[i - 1] : x;
        d_enc_w[i] = back * input.transpose();
        d_enc_b[i] = back.rowwise().sum();
        if (i > 0) back = model.enc_weights[i].transpose() * back;
      }

      auto step_matrix = [&params](AdamState& state, Matrix& w, const Matrix& g) {
        Eigen::Map<Vector> flat(w.data(), w.size());
        state.step(flat, Eigen::Map<const Vector>(g.data(), g.size()), params);
      };
      for (std::size_t i = 0; i < el; ++i) {
        step_matrix(enc_w_state[i], model.enc_weights[i], d_enc_w[i]);
        enc_b_state[i].step(model.enc_biases[i], d_enc_b[i], params);
      }
      for (std::size_t j = 0; j < dl; ++j)
        step_matrix(dec_w_state[j], model.decoder.hidden[j], d_dec_w[j]);
      step_matrix(dec_out_state, model.decoder.out, d_out_w);
    }

    const double epoch_loss = reconstruction_mse(model, dataset);
    if (!std::isfinite(epoch_loss))
      throw DivergenceError("train_autoencoder: non-finite loss", static_cast<long>(epoch));
    model.loss_log.push_back(epoch_loss);
  }

  if (!(model.loss_log.back() < model.loss_log.front()))
    throw DivergenceError("train_autoencoder: training did not improve on initialization",
                          static_cast<long>(cfg.epochs));
  return model;
}

}  // namespace gencs
