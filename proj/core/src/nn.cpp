#include "arrqp/nn.hpp"

#include <cmath>
#include <limits>

namespace arrqp::nn {

void zero_grads(const ParameterList& params) {
  for (auto* p : params) p->zero_grad();
}

Matrix glorot_uniform(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix w(rows, cols);
  for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = dist(rng);
  return w;
}

// --- activations ------------------------------------------------------------------------------

const char* to_string(Activation a) {
  switch (a) {
    case Activation::Linear: return "linear";
    case Activation::Relu: return "relu";
    case Activation::LeakyRelu: return "leaky_relu";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Tanh: return "tanh";
  }
  return "?";
}

Matrix leaky_relu(const Matrix& x, double slope) {
  return x.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
}

Matrix sigmoid(const Matrix& x) {
  return x.unaryExpr([](double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
}

Matrix activate(Activation a, const Matrix& pre, double leaky_slope) {
  switch (a) {
    case Activation::Linear: return pre;
    case Activation::Relu: return relu(pre);
    case Activation::LeakyRelu: return leaky_relu(pre, leaky_slope);
    case Activation::Sigmoid: return sigmoid(pre);
    case Activation::Tanh: return pre.array().tanh().matrix();
  }
  return pre;
}

Matrix activate_backward(Activation a, const Matrix& d_out, const Matrix& pre, const Matrix& out,
                         double leaky_slope) {
  switch (a) {
    case Activation::Linear: return d_out;
    case Activation::Relu:
      return (pre.array() > 0.0).select(d_out.array(), 0.0).matrix();
    case Activation::LeakyRelu:
      return (pre.array() > 0.0).select(d_out.array(), leaky_slope * d_out.array()).matrix();
    case Activation::Sigmoid:
      return (d_out.array() * out.array() * (1.0 - out.array())).matrix();
    case Activation::Tanh:
      return (d_out.array() * (1.0 - out.array().square())).matrix();
  }
  return d_out;
}

// --- Dense -------------------------------------------------------------------------------------

Dense::Dense(std::string name, Eigen::Index in, Eigen::Index out, Activation act, std::mt19937_64& rng)
    : weight_(name + ".weight", glorot_uniform(in, out, rng)),
      bias_(name + ".bias", Matrix::Zero(1, out)),
      act_(act) {}

Matrix Dense::forward(const Matrix& x) {
  if (x.cols() != in_dim()) {
    throw DimensionError(weight_.name + ": input width " + std::to_string(x.cols()) +
                         " != expected " + std::to_string(in_dim()));
  }
  input_ = x;
  pre_ = x * weight_.value;
  pre_.rowwise() += bias_.value.row(0);
  out_ = activate(act_, pre_);
  return out_;
}

Matrix Dense::backward(const Matrix& d_out) {
  if (d_out.rows() != out_.rows() || d_out.cols() != out_.cols()) {
    throw DimensionError(weight_.name + ": gradient shape does not match last forward output");
  }
  const Matrix d_pre = activate_backward(act_, d_out, pre_, out_);
  weight_.grad.noalias() += input_.transpose() * d_pre;
  bias_.grad.row(0) += d_pre.colwise().sum();
  return d_pre * weight_.value.transpose();
}

// --- Dropout -----------------------------------------------------------------------------------

Matrix Dropout::forward(const Matrix& x, bool training, std::mt19937_64& rng) {
  active_ = training && rate_ > 0.0;
  if (!active_) return x;
  std::bernoulli_distribution keep(1.0 - rate_);
  const double inv = 1.0 / (1.0 - rate_);
  scale_.resize(x.rows(), x.cols());
  for (Eigen::Index k = 0; k < scale_.size(); ++k) scale_.data()[k] = keep(rng) ? inv : 0.0;
  return x.cwiseProduct(scale_);
}

Matrix Dropout::backward(const Matrix& d_out) const {
  return active_ ? Matrix(d_out.cwiseProduct(scale_)) : d_out;
}

// --- Conv1x1 -----------------------------------------------------------------------------------

Conv1x1::Conv1x1(std::string name, Eigen::Index channels)
    : weight_(name + ".weight", Matrix::Constant(1, channels, 1.0 / static_cast<double>(channels))),
      bias_(name + ".bias", Matrix::Zero(1, 1)) {}

Matrix Conv1x1::forward(const std::vector<Matrix>& channels) {
  if (static_cast<Eigen::Index>(channels.size()) != this->channels()) {
    throw DimensionError(weight_.name + ": expected " + std::to_string(this->channels()) +
                         " channels, got " + std::to_string(channels.size()));
  }
  for (const auto& c : channels) {
    if (c.rows() != channels.front().rows() || c.cols() != channels.front().cols()) {
      throw DimensionError(weight_.name + ": channel shapes differ");
    }
  }
  inputs_ = channels;
  Matrix y = Matrix::Constant(channels.front().rows(), channels.front().cols(), bias_.value(0, 0));
  for (std::size_t c = 0; c < channels.size(); ++c) {
    y.noalias() += weight_.value(0, static_cast<Eigen::Index>(c)) * channels[c];
  }
  return y;
}

std::vector<Matrix> Conv1x1::backward(const Matrix& d_out) {
  std::vector<Matrix> d_in;
  d_in.reserve(inputs_.size());
  for (std::size_t c = 0; c < inputs_.size(); ++c) {
    const auto ci = static_cast<Eigen::Index>(c);
    weight_.grad(0, ci) += d_out.cwiseProduct(inputs_[c]).sum();
    d_in.push_back(weight_.value(0, ci) * d_out);
  }
  bias_.grad(0, 0) += d_out.sum();
  return d_in;
}

// --- losses ------------------------------------------------------------------------------------

const char* to_string(LossKind kind) {
  switch (kind) {
    case LossKind::Cauchy: return "cauchy";
    case LossKind::Mse: return "mse";
    case LossKind::Mae: return "mae";
    case LossKind::Huber: return "huber";
  }
  return "?";
}

LossKind parse_loss_kind(const std::string& text) {
  if (text == "cauchy") return LossKind::Cauchy;
  if (text == "mse") return LossKind::Mse;
  if (text == "mae") return LossKind::Mae;
  if (text == "huber") return LossKind::Huber;
  throw std::invalid_argument("unknown loss '" + text + "'");
}

namespace {

void check_pair(const Vector& actual, const Vector& predicted) {
  if (actual.size() != predicted.size()) {
    throw DimensionError("loss: actual and predicted lengths differ");
  }
}

}  // namespace

double cauchy_loss(const Vector& actual, const Vector& predicted, double gamma) {
  check_pair(actual, predicted);
  const double g2 = gamma * gamma;
  return ((actual - predicted).array().square() / g2).log1p().sum();
}

Vector cauchy_grad(const Vector& actual, const Vector& predicted, double gamma) {
  check_pair(actual, predicted);
  const double g2 = gamma * gamma;
  const Eigen::ArrayXd r = (actual - predicted).array();
  return (-2.0 * r / (g2 + r.square())).matrix();
}

double loss_value(const LossSpec& spec, const Vector& actual, const Vector& predicted) {
  check_pair(actual, predicted);
  const Eigen::ArrayXd r = (actual - predicted).array();
  switch (spec.kind) {
    case LossKind::Cauchy: return cauchy_loss(actual, predicted, spec.gamma);
    case LossKind::Mse: return r.square().sum();
    case LossKind::Mae: return r.abs().sum();
    case LossKind::Huber: {
      const double d = spec.delta;
      return r.abs().unaryExpr([d](double a) { return a <= d ? 0.5 * a * a : d * (a - 0.5 * d); }).sum();
    }
  }
  return 0.0;
}

Vector loss_grad(const LossSpec& spec, const Vector& actual, const Vector& predicted) {
  check_pair(actual, predicted);
  const Eigen::ArrayXd r = (actual - predicted).array();
  switch (spec.kind) {
    case LossKind::Cauchy: return cauchy_grad(actual, predicted, spec.gamma);
    case LossKind::Mse: return (-2.0 * r).matrix();
    case LossKind::Mae: return (-r.sign()).matrix();
    case LossKind::Huber: {
      const double d = spec.delta;
      return r.unaryExpr([d](double v) { return std::abs(v) <= d ? -v : (v > 0 ? -d : d); }).matrix();
    }
  }
  return Vector::Zero(actual.size());
}

// --- optimizers --------------------------------------------------------------------------------

namespace {

void ensure_state(std::vector<Matrix>& state, const ParameterList& params) {
  bool ok = state.size() == params.size();
  for (std::size_t k = 0; ok && k < params.size(); ++k) {
    ok = state[k].rows() == params[k]->value.rows() && state[k].cols() == params[k]->value.cols();
  }
  if (ok) return;
  state.clear();
  for (auto* p : params) state.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
}

}  // namespace

void Adam::step(const ParameterList& params) {
  if (m_.size() != params.size()) t_ = 0;
  ensure_state(m_, params);
  ensure_state(v_, params);
  ++t_;
  const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = *params[k];
    m_[k] = opt_.beta1 * m_[k] + (1.0 - opt_.beta1) * p.grad;
    v_[k] = opt_.beta2 * v_[k] + (1.0 - opt_.beta2) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= opt_.learning_rate * (m_[k].array() / c1) /
                       ((v_[k].array() / c2).sqrt() + opt_.epsilon);
  }
}

void Adam::reset() {
  t_ = 0;
  m_.clear();
  v_.clear();
}

void RmsProp::step(const ParameterList& params) {
  ensure_state(sq_, params);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = *params[k];
    sq_[k] = opt_.rho * sq_[k] + (1.0 - opt_.rho) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= opt_.learning_rate * p.grad.array() / (sq_[k].array().sqrt() + opt_.epsilon);
  }
}

void RmsProp::reset() { sq_.clear(); }

const char* to_string(OptimizerKind kind) { return kind == OptimizerKind::Adam ? "adam" : "rmsprop"; }

OptimizerKind parse_optimizer_kind(const std::string& text) {
  if (text == "adam") return OptimizerKind::Adam;
  if (text == "rmsprop") return OptimizerKind::RmsProp;
  throw std::invalid_argument("unknown optimizer '" + text + "'");
}

std::unique_ptr<Optimizer> make_optimizer(OptimizerKind kind, double learning_rate) {
  if (kind == OptimizerKind::Adam) return std::make_unique<Adam>(AdamOptions{.learning_rate = learning_rate});
  return std::make_unique<RmsProp>(RmsPropOptions{.learning_rate = learning_rate});
}

// --- train loop --------------------------------------------------------------------------------

void TrainConfig::validate() const {
  if (max_epochs <= 0) throw std::invalid_argument("max_epochs must be positive");
  if (patience <= 0 || patience > max_epochs) {
    throw std::invalid_argument("patience must lie in [1, max_epochs]");
  }
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (warmup_epochs < 0) throw std::invalid_argument("warmup_epochs must be non-negative");
}

TrainHistory train_loop(const TrainHooks& hooks, const TrainConfig& config) {
  config.validate();
  auto optimizer = make_optimizer(config.optimizer, config.learning_rate);
  TrainHistory h;
  double best = std::numeric_limits<double>::infinity();
  std::vector<Matrix> best_values;
  int since_best = 0;

  auto snapshot = [&] {
    best_values.clear();
    for (auto* p : hooks.params) best_values.push_back(p->value);
  };

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    if (epoch <= config.warmup_epochs) {
      optimizer->set_learning_rate(config.learning_rate * epoch / config.warmup_epochs);
    }
    const double train = hooks.train_epoch(*optimizer, epoch);
    if (!std::isfinite(train)) {
      throw TrainingError("non-finite training loss at epoch " + std::to_string(epoch));
    }
    const double val = hooks.validation_loss();
    if (!std::isfinite(val)) {
      throw TrainingError("non-finite validation loss at epoch " + std::to_string(epoch));
    }
    h.train_loss.push_back(train);
    h.validation_loss.push_back(val);
    h.epochs_run = epoch;
    if (val < best) {
      best = val;
      h.best_epoch = epoch;
      since_best = 0;
      if (config.restore_best) snapshot();
    } else if (++since_best >= config.patience) {
      h.early_stopped = true;
      break;
    }
  }
  h.best_validation_loss = best;
  if (config.restore_best && !best_values.empty()) {
    for (std::size_t k = 0; k < hooks.params.size(); ++k) hooks.params[k]->value = best_values[k];
  }
  return h;
}

}  // namespace arrqp::nn
