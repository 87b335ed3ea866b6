#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"

#include "arrqp/nn.hpp"
#include "gradcheck.hpp"

using namespace arrqp;
using namespace arrqp::nn;
namespace at = arrqp::testing;
using doctest::Approx;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index k = 0;
  for (double x : xs) v(k++) = x;
  return v;
}

}  // namespace

TEST_CASE("cauchy loss values") {
  CHECK(cauchy_loss(vec({1, 2}), vec({1, 2}), 0.25) == 0.0);
  CHECK(cauchy_loss(vec({2}), vec({1}), 1.0) == Approx(0.693147).epsilon(1e-6));
  CHECK(cauchy_loss(vec({0.5}), vec({0.7}), 0.25) == Approx(0.494696).epsilon(1e-6));
}

TEST_CASE("cauchy gradient") {
  CHECK(cauchy_grad(vec({2}), vec({2}), 1.0)(0) == 0.0);
  CHECK(cauchy_grad(vec({2}), vec({1}), 1.0)(0) == Approx(-1.0));

  Matrix p = at::probe(12, 1, 3);
  const Vector a = at::probe(12, 1, 4);
  auto loss = [&] { return cauchy_loss(a, p.col(0), 0.3); };
  const Matrix fd = at::numeric_gradient(p, loss);
  CHECK(at::relative_error(fd, cauchy_grad(a, p.col(0), 0.3)) < 1e-6);
}

TEST_CASE("losses are non-negative and cauchy grows with the residual") {
  const Vector a = vec({1.0});
  double last = -1.0;
  for (double r = 0.0; r < 5.0; r += 0.25) {
    const double c = cauchy_loss(a, vec({1.0 + r}), 0.25);
    CHECK(c > last);
    last = c;
    for (auto kind : {LossKind::Cauchy, LossKind::Mse, LossKind::Mae, LossKind::Huber}) {
      LossSpec s;
      s.kind = kind;
      CHECK(loss_value(s, a, vec({1.0 - r})) >= 0.0);
    }
  }
}

TEST_CASE("loss gradients match finite differences") {
  for (auto kind : {LossKind::Cauchy, LossKind::Mse, LossKind::Huber}) {
    LossSpec s;
    s.kind = kind;
    s.gamma = 0.7;
    s.delta = 0.5;
    Matrix p = at::probe(15, 1, 5);
    const Vector a = at::probe(15, 1, 6);
    auto loss = [&] { return loss_value(s, a, p.col(0)); };
    CHECK(at::relative_error(at::numeric_gradient(p, loss), loss_grad(s, a, p.col(0))) < 1e-5);
  }
}

TEST_CASE("dense layer gradients") {
  std::mt19937_64 rng(1);
  for (auto act : {Activation::Linear, Activation::Relu, Activation::LeakyRelu, Activation::Sigmoid,
                   Activation::Tanh}) {
    Dense layer("d", 4, 3, act, rng);
    layer.bias().value = at::probe(1, 3, 9);
    Matrix x = at::probe(6, 4, 7);
    const Matrix r = at::probe(6, 3, 8);
    auto loss = [&] { return layer.forward(x).cwiseProduct(r).sum(); };
    Matrix dx;
    const auto checks = at::check_parameters(layer.parameters(), loss, [&] {
      zero_grads(layer.parameters());
      layer.forward(x);
      dx = layer.backward(r);
    });
    CHECK(at::worst(checks) < 1e-5);
    CHECK(at::relative_error(at::numeric_gradient(x, loss), dx) < 1e-5);
  }
}

TEST_CASE("zero dense layer gives zero output") {
  std::mt19937_64 rng(1);
  Dense layer("d", 3, 2, Activation::Relu, rng);
  layer.weight().value.setZero();
  layer.bias().value.setZero();
  CHECK(layer.forward(at::probe(4, 3, 1)).isZero());
}

TEST_CASE("dropout") {
  std::mt19937_64 rng(2);
  const Matrix x = at::probe(5, 4, 1);
  Dropout none(0.0);
  CHECK(none.forward(x, true, rng) == x);
  Dropout half(0.5);
  CHECK(half.forward(x, false, rng) == x);
  const Matrix y = half.forward(x, true, rng);
  for (Eigen::Index k = 0; k < x.size(); ++k)
    CHECK((y.data()[k] == 0.0 || y.data()[k] == Approx(2.0 * x.data()[k])));
  const Matrix g = half.backward(Matrix::Ones(5, 4));
  for (Eigen::Index k = 0; k < x.size(); ++k) CHECK((g.data()[k] == 0.0) == (y.data()[k] == 0.0));
}

TEST_CASE("conv1x1 is a weighted channel sum") {
  Conv1x1 conv("c", 2);
  conv.weight().value << 2.0, -1.0;
  conv.bias().value(0, 0) = 0.5;
  const Matrix a = at::probe(3, 2, 1), b = at::probe(3, 2, 2);
  const Matrix out = conv.forward({a, b});
  CHECK((out - (2.0 * a - b).array().matrix() - Matrix::Constant(3, 2, 0.5)).cwiseAbs().maxCoeff() < 1e-15);
  CHECK_THROWS_AS(conv.forward({a}), DimensionError);

  Conv1x1 fresh("f", 4);
  CHECK(fresh.weight().value.sum() == Approx(1.0));
}

TEST_CASE("conv1x1 gradients") {
  Conv1x1 conv("c", 3);
  conv.weight().value = at::probe(1, 3, 3);
  std::vector<Matrix> xs = {at::probe(4, 5, 1), at::probe(4, 5, 2), at::probe(4, 5, 3)};
  const Matrix r = at::probe(4, 5, 4);
  auto loss = [&] { return conv.forward(xs).cwiseProduct(r).sum(); };
  std::vector<Matrix> dxs;
  const auto checks = at::check_parameters(conv.parameters(), loss, [&] {
    zero_grads(conv.parameters());
    conv.forward(xs);
    dxs = conv.backward(r);
  });
  CHECK(at::worst(checks) < 1e-5);
  for (std::size_t c = 0; c < xs.size(); ++c) CHECK(at::relative_error(at::numeric_gradient(xs[c], loss), dxs[c]) < 1e-5);
}

TEST_CASE("adam first step equals the learning rate") {
  Parameter p("p", Matrix::Constant(1, 1, 3.0));
  Adam adam;
  p.grad(0, 0) = 0.0;
  adam.step({&p});
  CHECK(p.value(0, 0) == 3.0);

  Adam fresh;
  p.grad(0, 0) = 1.0;
  fresh.step({&p});
  CHECK(p.value(0, 0) - 3.0 == Approx(-0.001).epsilon(1e-6));
}

TEST_CASE("rmsprop moves against the gradient") {
  Parameter p("p", Matrix::Constant(1, 2, 1.0));
  p.grad << 1.0, -1.0;
  RmsProp opt;
  opt.step({&p});
  CHECK(p.value(0, 0) < 1.0);
  CHECK(p.value(0, 1) > 1.0);
}

TEST_CASE("early stopping on a flat validation loss") {
  Parameter p("p", Matrix::Zero(1, 1));
  TrainHooks hooks;
  hooks.params = {&p};
  hooks.train_epoch = [&](Optimizer&, int) { return 1.0; };
  hooks.validation_loss = [] { return 1.0; };
  TrainConfig c;
  c.patience = 4;
  c.max_epochs = 100;
  const auto h = train_loop(hooks, c);
  CHECK(h.epochs_run == 5);
  CHECK(h.early_stopped);
  CHECK(h.best_epoch == 1);
}

TEST_CASE("best parameters are restored") {
  Parameter p("p", Matrix::Zero(1, 1));
  TrainHooks hooks;
  hooks.params = {&p};
  hooks.train_epoch = [&](Optimizer&, int epoch) {
    p.value(0, 0) = epoch;
    return 1.0;
  };
  hooks.validation_loss = [&] { return std::abs(p.value(0, 0) - 3.0); };
  TrainConfig c;
  c.patience = 2;
  c.max_epochs = 50;
  const auto h = train_loop(hooks, c);
  CHECK(h.best_epoch == 3);
  CHECK(p.value(0, 0) == 3.0);
}

TEST_CASE("non-finite loss aborts") {
  Parameter p("p", Matrix::Zero(1, 1));
  TrainHooks hooks;
  hooks.params = {&p};
  hooks.train_epoch = [](Optimizer&, int epoch) {
    return epoch == 3 ? std::numeric_limits<double>::quiet_NaN() : 1.0;
  };
  hooks.validation_loss = [] { return 1.0; };
  TrainConfig c;
  c.max_epochs = 10;
  c.patience = 10;
  CHECK_THROWS_AS(train_loop(hooks, c), TrainingError);
}

TEST_CASE("learning-rate warmup") {
  Parameter p("p", Matrix::Zero(1, 1));
  std::vector<double> rates;
  TrainHooks hooks;
  hooks.params = {&p};
  hooks.train_epoch = [&](Optimizer& opt, int) {
    rates.push_back(opt.learning_rate());
    return 1.0;
  };
  hooks.validation_loss = [] { return 1.0; };
  TrainConfig c;
  c.learning_rate = 0.01;
  c.warmup_epochs = 4;
  c.max_epochs = 6;
  c.patience = 6;
  train_loop(hooks, c);
  REQUIRE(rates.size() == 6);
  CHECK(rates[0] == Approx(0.0025));
  CHECK(rates[3] == Approx(0.01));
  CHECK(rates[5] == Approx(0.01));
}
