#pragma once

#include <gencs/generator.hpp>
#include <gencs/types.hpp>

#include <cstdint>
#include <vector>

namespace gencs {

/// Encoder (biased ReLU MLP, signal -> latent) paired with a decoder that is
/// a valid bias-free generative network, so the sampling theory applies to
/// it unchanged.
struct AutoencoderModel {
  std::vector<Matrix> enc_weights;  // mirrored widths, final map to the latent
  std::vector<Vector> enc_biases;
  GgnModel decoder;
  Index resolution = 0;
  std::vector<double> loss_log;  // full-dataset MSE; entry 0 is pre-training

  Index latent_dim() const { return decoder.latent_dim(); }
  void validate() const;
};

struct TrainingConfig {
  Index latent = 16;
  std::vector<Index> widths = {16, 64, 256};  // decoder hidden widths k_1..k_d
  Index epochs = 2000;
  double learning_rate = 0.001;
  Index batch = 32;
  std::uint64_t seed = 0;
};

/// Adam on mean squared reconstruction error over row-major fields at one
/// resolution. Deterministic in the seed, including batch order. Throws
/// DivergenceError (with the epoch) on a non-finite loss, and refuses runs
/// whose final loss fails to improve on the initialized model.
AutoencoderModel train_autoencoder(const std::vector<Vector>& dataset, Index resolution,
                                   const TrainingConfig& cfg);

Vector encode(const AutoencoderModel& m, const Vector& field);

std::vector<Vector> encode_dataset(const AutoencoderModel& m, const std::vector<Vector>& dataset);

/// Mean over the dataset of |decode(encode(u)) - u|^2 / M.
double reconstruction_mse(const AutoencoderModel& m, const std::vector<Vector>& dataset);

}  // namespace gencs
