#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "arrqp/common.hpp"

// Small reverse-mode training substrate. Every layer caches what its backward pass needs during
// forward() and accumulates parameter gradients in backward(); callers zero gradients per step.
namespace arrqp::nn {

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  Eigen::Index size() const { return value.size(); }
};

using ParameterList = std::vector<Parameter*>;

void zero_grads(const ParameterList& params);

/// Glorot-uniform initialisation, limit sqrt(6 / (fan_in + fan_out)).
Matrix glorot_uniform(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng);

// --- elementwise activations --------------------------------------------------------------------

enum class Activation { Linear, Relu, LeakyRelu, Sigmoid, Tanh };

const char* to_string(Activation a);
Matrix activate(Activation a, const Matrix& pre, double leaky_slope = 0.2);
/// dL/dpre given dL/dout, the pre-activation and the activation output.
Matrix activate_backward(Activation a, const Matrix& d_out, const Matrix& pre, const Matrix& out,
                         double leaky_slope = 0.2);

inline Matrix relu(const Matrix& x) { return x.cwiseMax(0.0); }
Matrix leaky_relu(const Matrix& x, double slope);
Matrix sigmoid(const Matrix& x);

// --- layers ------------------------------------------------------------------------------------

/// y = act(x W + b); x is batch x in.
class Dense {
 public:
  Dense() = default;
  Dense(std::string name, Eigen::Index in, Eigen::Index out, Activation act, std::mt19937_64& rng);

  Matrix forward(const Matrix& x);
  /// Returns dL/dx and accumulates dL/dW, dL/db.
  Matrix backward(const Matrix& d_out);

  Eigen::Index in_dim() const { return weight_.value.rows(); }
  Eigen::Index out_dim() const { return weight_.value.cols(); }
  Activation activation() const { return act_; }

  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }
  const Parameter& weight() const { return weight_; }
  const Parameter& bias() const { return bias_; }
  ParameterList parameters() { return {&weight_, &bias_}; }

 private:
  Parameter weight_;
  Parameter bias_;
  Activation act_ = Activation::Linear;
  Matrix input_, pre_, out_;
};

/// Inverted dropout. Identity when rate == 0 or when not training.
class Dropout {
 public:
  explicit Dropout(double rate = 0.0) : rate_(rate) {}

  Matrix forward(const Matrix& x, bool training, std::mt19937_64& rng);
  Matrix backward(const Matrix& d_out) const;
  double rate() const { return rate_; }

 private:
  double rate_;
  Matrix scale_;
  bool active_ = false;
};

/// 1x1 convolution with a single filter over C equally shaped channels:
/// y = sum_c w_c X_c + b at every position.
class Conv1x1 {
 public:
  Conv1x1() = default;
  // Starts as the channel average.
  Conv1x1(std::string name, Eigen::Index channels);

  Matrix forward(const std::vector<Matrix>& channels);
  std::vector<Matrix> backward(const Matrix& d_out);

  Eigen::Index channels() const { return weight_.value.cols(); }
  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }
  ParameterList parameters() { return {&weight_, &bias_}; }

 private:
  Parameter weight_;  // 1 x C
  Parameter bias_;    // 1 x 1
  std::vector<Matrix> inputs_;
};

// --- losses --------------------------------------------------------------------------------------

enum class LossKind { Cauchy, Mse, Mae, Huber };

const char* to_string(LossKind kind);
LossKind parse_loss_kind(const std::string& text);

/// Summed over pairs. gamma is the Cauchy scale; delta the Huber threshold.
struct LossSpec {
  LossKind kind = LossKind::Cauchy;
  double gamma = 0.25;
  double delta = 1.0;
};

double cauchy_loss(const Vector& actual, const Vector& predicted, double gamma);
Vector cauchy_grad(const Vector& actual, const Vector& predicted, double gamma);

double loss_value(const LossSpec& spec, const Vector& actual, const Vector& predicted);
/// dL/dpredicted.
Vector loss_grad(const LossSpec& spec, const Vector& actual, const Vector& predicted);

// --- optimizers ----------------------------------------------------------------------------------

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual void step(const ParameterList& params) = 0;
  virtual void reset() = 0;
  virtual double learning_rate() const = 0;
  virtual void set_learning_rate(double lr) = 0;
};

struct AdamOptions {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam final : public Optimizer {
 public:
  explicit Adam(AdamOptions options = {}) : opt_(options) {}
  void step(const ParameterList& params) override;
  void reset() override;
  double learning_rate() const override { return opt_.learning_rate; }
  void set_learning_rate(double lr) override { opt_.learning_rate = lr; }
  long steps() const { return t_; }

 private:
  AdamOptions opt_;
  long t_ = 0;
  std::vector<Matrix> m_, v_;
};

struct RmsPropOptions {
  double learning_rate = 0.001;
  double rho = 0.9;
  double epsilon = 1e-7;
};

class RmsProp final : public Optimizer {
 public:
  explicit RmsProp(RmsPropOptions options = {}) : opt_(options) {}
  void step(const ParameterList& params) override;
  void reset() override;
  double learning_rate() const override { return opt_.learning_rate; }
  void set_learning_rate(double lr) override { opt_.learning_rate = lr; }

 private:
  RmsPropOptions opt_;
  std::vector<Matrix> sq_;
};

enum class OptimizerKind { Adam, RmsProp };

const char* to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(const std::string& text);
std::unique_ptr<Optimizer> make_optimizer(OptimizerKind kind, double learning_rate);

// --- training loop ------------------------------------------------------------------------------

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::Adam;
  double learning_rate = 0.001;
  int max_epochs = 20000;
  int patience = 300;
  // Learning rate ramps linearly from lr / warmup_epochs to lr over this many epochs.
  int warmup_epochs = 0;
  bool restore_best = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
  int best_epoch = 0;  // 1-based
  int epochs_run = 0;
  bool early_stopped = false;
  double best_validation_loss = 0.0;
};

struct TrainHooks {
  ParameterList params;
  /// One epoch of updates (the callee zeroes grads, back-propagates and calls opt.step as often as
  /// it likes). Returns the epoch's training loss.
  std::function<double(Optimizer&, int epoch)> train_epoch;
  /// Loss on held-out data with the current parameters.
  std::function<double()> validation_loss;
};

/// Runs epochs until validation loss has not improved for `patience` consecutive epochs or
/// max_epochs is reached; restores the best-validation parameters when configured.
/// Throws TrainingError on a non-finite loss.
TrainHistory train_loop(const TrainHooks& hooks, const TrainConfig& config);

}  // namespace arrqp::nn
