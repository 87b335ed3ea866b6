#include "arrqp/autoencoder.hpp"

#include <algorithm>
#include <numeric>

namespace arrqp {

void AutoencoderConfig::validate(Eigen::Index input_dim) const {
  if (encoder_sizes.empty() || decoder_sizes.empty()) {
    throw DimensionError("autoencoder needs at least one encoder and one decoder layer");
  }
  if (encoder_activations.size() != encoder_sizes.size() ||
      decoder_activations.size() != decoder_sizes.size()) {
    throw DimensionError("autoencoder activation count must match layer count");
  }
  if (encoder_dropout.size() > encoder_sizes.size() || decoder_dropout.size() > decoder_sizes.size()) {
    throw DimensionError("more dropout rates than layers");
  }
  if (decoder_sizes.back() != input_dim) {
    throw DimensionError("last decoder size " + std::to_string(decoder_sizes.back()) +
                         " != input dimension " + std::to_string(input_dim));
  }
  for (auto s : encoder_sizes)
    if (s <= 0) throw DimensionError("layer sizes must be positive");
  for (auto s : decoder_sizes)
    if (s <= 0) throw DimensionError("layer sizes must be positive");
  for (double r : encoder_dropout)
    if (r < 0.0 || r >= 1.0) throw std::invalid_argument("dropout rate must lie in [0, 1)");
  for (double r : decoder_dropout)
    if (r < 0.0 || r >= 1.0) throw std::invalid_argument("dropout rate must lie in [0, 1)");
}

Autoencoder::Autoencoder(Eigen::Index input_dim, const AutoencoderConfig& config, std::uint64_t seed)
    : input_dim_(input_dim), config_(config), rng_(seed) {
  config_.validate(input_dim);
  Eigen::Index in = input_dim;
  for (std::size_t k = 0; k < config_.encoder_sizes.size(); ++k) {
    layers_.emplace_back("encoder." + std::to_string(k), in, config_.encoder_sizes[k],
                         config_.encoder_activations[k], rng_);
    dropouts_.emplace_back(k < config_.encoder_dropout.size() ? config_.encoder_dropout[k] : 0.0);
    in = config_.encoder_sizes[k];
  }
  for (std::size_t k = 0; k < config_.decoder_sizes.size(); ++k) {
    layers_.emplace_back("decoder." + std::to_string(k), in, config_.decoder_sizes[k],
                         config_.decoder_activations[k], rng_);
    dropouts_.emplace_back(k < config_.decoder_dropout.size() ? config_.decoder_dropout[k] : 0.0);
    in = config_.decoder_sizes[k];
  }
}

nn::ParameterList Autoencoder::parameters() {
  nn::ParameterList out;
  for (auto& l : layers_) {
    out.push_back(&l.weight());
    out.push_back(&l.bias());
  }
  return out;
}

Matrix Autoencoder::forward(const Matrix& x, bool training, std::size_t stop_after) {
  if (x.cols() != input_dim_) {
    throw DimensionError("autoencoder input width " + std::to_string(x.cols()) + " != " +
                         std::to_string(input_dim_));
  }
  Matrix h = x;
  for (std::size_t k = 0; k < stop_after; ++k) {
    h = layers_[k].forward(h);
    h = dropouts_[k].forward(h, training, rng_);
  }
  return h;
}

void Autoencoder::backward(const Matrix& d_out) {
  Matrix d = d_out;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    d = dropouts_[k].backward(d);
    d = layers_[k].backward(d);
  }
}

Matrix Autoencoder::encode(const Matrix& x) { return forward(x, false, config_.encoder_sizes.size()); }

Matrix Autoencoder::reconstruct(const Matrix& x) { return forward(x, false, layers_.size()); }

double Autoencoder::reconstruction_mse(const Matrix& x) {
  if (x.size() == 0) return 0.0;
  return (reconstruct(x) - x).squaredNorm() / static_cast<double>(x.size());
}

namespace {

Matrix gather_rows(const Matrix& x, const std::vector<Eigen::Index>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = x.row(rows[k]);
  return out;
}

}  // namespace

Autoencoder train_autoencoder(const Matrix& inputs, const AutoencoderConfig& config, std::uint64_t seed) {
  Autoencoder ae(inputs.cols(), config, mix_seed(seed, 1));
  if (inputs.rows() == 0) return ae;

  std::mt19937_64 split_rng(mix_seed(seed, 2));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(inputs.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::shuffle(order.begin(), order.end(), split_rng);
  auto n_val = static_cast<std::size_t>(config.validation_fraction * static_cast<double>(order.size()));
  if (n_val >= order.size()) n_val = 0;
  std::vector<Eigen::Index> val_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<Eigen::Index> train_rows(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val_rows.begin(), val_rows.end());
  std::sort(train_rows.begin(), train_rows.end());
  const Matrix train_x = gather_rows(inputs, train_rows);
  const Matrix val_x = val_rows.empty() ? train_x : gather_rows(inputs, val_rows);

  const auto n_train = static_cast<std::size_t>(train_x.rows());
  const std::size_t batch =
      config.batch_size <= 0 ? n_train : std::min(n_train, static_cast<std::size_t>(config.batch_size));
  std::mt19937_64 batch_rng(mix_seed(seed, 3));
  std::vector<Eigen::Index> perm(n_train);
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});

  nn::TrainHooks hooks;
  hooks.params = ae.parameters();
  hooks.train_epoch = [&](nn::Optimizer& opt, int) {
    if (batch < n_train) std::shuffle(perm.begin(), perm.end(), batch_rng);
    double total = 0.0;
    for (std::size_t start = 0; start < n_train; start += batch) {
      const std::size_t stop = std::min(n_train, start + batch);
      std::vector<Eigen::Index> rows(perm.begin() + static_cast<std::ptrdiff_t>(start),
                                     perm.begin() + static_cast<std::ptrdiff_t>(stop));
      const Matrix x = batch == n_train ? train_x : gather_rows(train_x, rows);
      nn::zero_grads(hooks.params);
      const Matrix r = ae.forward(x, true, ae.layers_.size());
      const Matrix diff = r - x;
      const double count = static_cast<double>(diff.size());
      total += diff.squaredNorm() / static_cast<double>(x.cols());
      ae.backward(diff * (2.0 / count));
      opt.step(hooks.params);
    }
    return total / static_cast<double>(n_train);
  };
  hooks.validation_loss = [&] { return ae.reconstruction_mse(val_x); };

  nn::TrainConfig tc;
  tc.optimizer = config.optimizer;
  tc.learning_rate = config.learning_rate;
  tc.max_epochs = config.max_epochs;
  tc.patience = config.patience;
  tc.seed = seed;
  try {
    ae.history_ = nn::train_loop(hooks, tc);
  } catch (const TrainingError& e) {
    throw TrainingError(std::string("autoencoder: ") + e.what());
  }
  return ae;
}

}  // namespace arrqp
