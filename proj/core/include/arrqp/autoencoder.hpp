#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "arrqp/common.hpp"
#include "arrqp/nn.hpp"

namespace arrqp {

struct AutoencoderConfig {
  std::vector<Eigen::Index> encoder_sizes;  // last entry is the bottleneck
  std::vector<Eigen::Index> decoder_sizes;  // last entry must equal the input width
  std::vector<nn::Activation> encoder_activations;
  std::vector<nn::Activation> decoder_activations;
  std::vector<double> encoder_dropout;  // applied after the first k encoder layers
  std::vector<double> decoder_dropout;
  nn::OptimizerKind optimizer = nn::OptimizerKind::RmsProp;
  double learning_rate = 0.001;
  int max_epochs = 500;
  int patience = 3;
  int batch_size = 32;  // <= 0 means full batch
  double validation_fraction = 0.2;

  Eigen::Index bottleneck() const { return encoder_sizes.empty() ? 0 : encoder_sizes.back(); }
  /// Throws DimensionError when the layer chain does not close on input_dim.
  void validate(Eigen::Index input_dim) const;
};

/// Dense tanh/linear autoencoder trained on mean squared reconstruction error.
class Autoencoder {
 public:
  Autoencoder(Eigen::Index input_dim, const AutoencoderConfig& config, std::uint64_t seed);

  Matrix encode(const Matrix& x);
  Matrix reconstruct(const Matrix& x);
  /// Mean squared reconstruction error with dropout disabled.
  double reconstruction_mse(const Matrix& x);

  Eigen::Index input_dim() const { return input_dim_; }
  Eigen::Index code_dim() const { return config_.bottleneck(); }
  const nn::TrainHistory& history() const { return history_; }
  nn::ParameterList parameters();

  friend Autoencoder train_autoencoder(const Matrix& inputs, const AutoencoderConfig& config,
                                       std::uint64_t seed);

 private:
  Matrix forward(const Matrix& x, bool training, std::size_t stop_after);
  void backward(const Matrix& d_out);

  Eigen::Index input_dim_;
  AutoencoderConfig config_;
  std::vector<nn::Dense> layers_;
  std::vector<nn::Dropout> dropouts_;  // one per layer (rate 0 where none configured)
  std::mt19937_64 rng_;
  nn::TrainHistory history_;
};

/// Trains on rows of `inputs`; a seeded validation_fraction of rows drives early stopping.
/// Throws TrainingError (with the epoch) on a non-finite loss.
Autoencoder train_autoencoder(const Matrix& inputs, const AutoencoderConfig& config, std::uint64_t seed);

}  // namespace arrqp
